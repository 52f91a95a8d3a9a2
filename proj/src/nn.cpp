#include "canopy/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace canopy {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;

inline double elu(double x) { return x > 0.0 ? x : std::exp(x) - 1.0; }
inline double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }
}  // namespace

void PolicyArch::validate() const {
  if (image_h < 1 || image_w < 1 || image_ch < 1)
    throw std::invalid_argument("policy: bad image dimensions");
  if (action_dim < 1) throw std::invalid_argument("policy: bad action_dim");
  int h = image_h, w = image_w;
  for (size_t i = 0; i < conv.size(); ++i) {
    const ConvSpec& c = conv[i];
    if (c.out_channels < 1 || c.kernel < 1 || c.stride < 1)
      throw std::invalid_argument("policy: bad conv spec at layer " +
                                  std::to_string(i));
    if (c.kernel > h || c.kernel > w)
      throw std::invalid_argument("policy: conv layer " + std::to_string(i) +
                                  " kernel " + std::to_string(c.kernel) +
                                  " exceeds input " + std::to_string(h) + "x" +
                                  std::to_string(w));
    h = (h - c.kernel) / c.stride + 1;
    w = (w - c.kernel) / c.stride + 1;
  }
  if (ee_layers.empty() || joint_layers.empty() || combined_layers.empty())
    throw std::invalid_argument("policy: branch layer lists cannot be empty");
}

PolicyNet::PolicyNet(PolicyArch arch) : arch_(std::move(arch)) {
  arch_.validate();
  size_t off = 0;
  auto add_tensor = [&](const std::string& name, std::vector<int> shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    tensors_.push_back(TensorRef{name, off, std::move(shape), n});
    off += n;
    return tensors_.back().offset;
  };

  int h = arch_.image_h, w = arch_.image_w, ch = arch_.image_ch;
  for (size_t i = 0; i < arch_.conv.size(); ++i) {
    const ConvSpec& c = arch_.conv[i];
    ConvDims d;
    d.in_ch = ch;
    d.in_h = h;
    d.in_w = w;
    d.out_ch = c.out_channels;
    d.kernel = c.kernel;
    d.stride = c.stride;
    d.out_h = (h - c.kernel) / c.stride + 1;
    d.out_w = (w - c.kernel) / c.stride + 1;
    std::string base = "conv" + std::to_string(i);
    d.w_off = add_tensor(base + ".weight", {c.out_channels, ch, c.kernel, c.kernel});
    d.b_off = add_tensor(base + ".bias", {c.out_channels});
    conv_dims_.push_back(d);
    ch = c.out_channels;
    h = d.out_h;
    w = d.out_w;
  }
  conv_flat_ = ch * h * w;

  auto add_dense_stack = [&](const std::string& base, int in,
                             const std::vector<int>& layers,
                             std::vector<DenseDims>& out_dims) {
    for (size_t i = 0; i < layers.size(); ++i) {
      DenseDims d;
      d.in = in;
      d.out = layers[i];
      std::string name = base + std::to_string(i);
      d.w_off = add_tensor(name + ".weight", {d.out, d.in});
      d.b_off = add_tensor(name + ".bias", {d.out});
      out_dims.push_back(d);
      in = layers[i];
    }
    return in;
  };

  int ee_out = add_dense_stack("ee", arch_.ee_dim, arch_.ee_layers, ee_dims_);
  int joint_out =
      add_dense_stack("joint", arch_.joint_dim, arch_.joint_layers, joint_dims_);
  int comb_out = add_dense_stack("combined", conv_flat_ + ee_out + joint_out,
                                 arch_.combined_layers, comb_dims_);

  mean_head_.in = comb_out;
  mean_head_.out = arch_.action_dim;
  mean_head_.w_off = add_tensor("policy_mean.weight", {arch_.action_dim, comb_out});
  mean_head_.b_off = add_tensor("policy_mean.bias", {arch_.action_dim});
  value_head_.in = comb_out;
  value_head_.out = 1;
  value_head_.w_off = add_tensor("value.weight", {1, comb_out});
  value_head_.b_off = add_tensor("value.bias", {1});
  log_std_off_ = add_tensor("log_std", {arch_.action_dim});

  params_.assign(off, 0.0);
}

void PolicyNet::init_params(Rng& rng, double initial_log_std) {
  std::fill(params_.begin(), params_.end(), 0.0);
  for (const TensorRef& t : tensors_) {
    if (t.name == "log_std") {
      for (size_t i = 0; i < t.size; ++i) params_[t.offset + i] = initial_log_std;
      continue;
    }
    if (t.name.find(".weight") == std::string::npos) continue;  // biases stay 0
    size_t fan_in = 1;
    for (size_t d = 1; d < t.shape.size(); ++d)
      fan_in *= static_cast<size_t>(t.shape[d]);
    double scale = std::sqrt(1.0 / static_cast<double>(fan_in));
    if (t.name == "policy_mean.weight") scale *= 0.01;  // start near-zero actions
    for (size_t i = 0; i < t.size; ++i)
      params_[t.offset + i] = scale * rng.normal();
  }
}

void PolicyNet::conv_forward(const ConvDims& d, const double* in,
                             double* pre) const {
  const double* w = params_.data() + d.w_off;
  const double* b = params_.data() + d.b_off;
  const int k = d.kernel, s = d.stride;
  for (int oc = 0; oc < d.out_ch; ++oc) {
    const double* wc = w + static_cast<size_t>(oc) * d.in_ch * k * k;
    for (int oy = 0; oy < d.out_h; ++oy) {
      for (int ox = 0; ox < d.out_w; ++ox) {
        double acc = b[oc];
        for (int ic = 0; ic < d.in_ch; ++ic) {
          const double* wic = wc + static_cast<size_t>(ic) * k * k;
          const double* inc =
              in + (static_cast<size_t>(ic) * d.in_h + oy * s) * d.in_w + ox * s;
          for (int ky = 0; ky < k; ++ky) {
            const double* row = inc + static_cast<size_t>(ky) * d.in_w;
            const double* wrow = wic + static_cast<size_t>(ky) * k;
            for (int kx = 0; kx < k; ++kx) acc += wrow[kx] * row[kx];
          }
        }
        pre[(static_cast<size_t>(oc) * d.out_h + oy) * d.out_w + ox] = acc;
      }
    }
  }
}

void PolicyNet::conv_backward(const ConvDims& d, const double* in,
                              const double* pre, const double* dout,
                              double* din, std::vector<double>& grad) const {
  const double* w = params_.data() + d.w_off;
  double* dw = grad.data() + d.w_off;
  double* db = grad.data() + d.b_off;
  const int k = d.kernel, s = d.stride;
  for (int oc = 0; oc < d.out_ch; ++oc) {
    const double* wc = w + static_cast<size_t>(oc) * d.in_ch * k * k;
    double* dwc = dw + static_cast<size_t>(oc) * d.in_ch * k * k;
    for (int oy = 0; oy < d.out_h; ++oy) {
      for (int ox = 0; ox < d.out_w; ++ox) {
        size_t oidx = (static_cast<size_t>(oc) * d.out_h + oy) * d.out_w + ox;
        double g = dout[oidx] * elu_grad(pre[oidx]);
        if (g == 0.0) continue;
        db[oc] += g;
        for (int ic = 0; ic < d.in_ch; ++ic) {
          const double* wic = wc + static_cast<size_t>(ic) * k * k;
          double* dwic = dwc + static_cast<size_t>(ic) * k * k;
          size_t base = (static_cast<size_t>(ic) * d.in_h + oy * s) * d.in_w +
                        ox * s;
          for (int ky = 0; ky < k; ++ky) {
            const double* row = in + base + static_cast<size_t>(ky) * d.in_w;
            double* drow = din ? din + base + static_cast<size_t>(ky) * d.in_w
                               : nullptr;
            const double* wrow = wic + static_cast<size_t>(ky) * k;
            double* dwrow = dwic + static_cast<size_t>(ky) * k;
            for (int kx = 0; kx < k; ++kx) {
              dwrow[kx] += g * row[kx];
              if (drow) drow[kx] += g * wrow[kx];
            }
          }
        }
      }
    }
  }
}

void PolicyNet::dense_forward(const DenseDims& d, const double* in,
                              double* pre) const {
  const double* w = params_.data() + d.w_off;
  const double* b = params_.data() + d.b_off;
  for (int o = 0; o < d.out; ++o) {
    const double* wr = w + static_cast<size_t>(o) * d.in;
    double acc = b[o];
    for (int i = 0; i < d.in; ++i) acc += wr[i] * in[i];
    pre[o] = acc;
  }
}

void PolicyNet::dense_backward(const DenseDims& d, const double* in,
                               const double* pre, const double* dout,
                               double* din, bool use_elu,
                               std::vector<double>& grad) const {
  const double* w = params_.data() + d.w_off;
  double* dw = grad.data() + d.w_off;
  double* db = grad.data() + d.b_off;
  for (int o = 0; o < d.out; ++o) {
    double g = dout[o];
    if (use_elu) g *= elu_grad(pre[o]);
    if (g == 0.0) continue;
    db[o] += g;
    const double* wr = w + static_cast<size_t>(o) * d.in;
    double* dwr = dw + static_cast<size_t>(o) * d.in;
    for (int i = 0; i < d.in; ++i) {
      dwr[i] += g * in[i];
      if (din) din[i] += g * wr[i];
    }
  }
}

PolicyOutput PolicyNet::forward_cached(const double* image,
                                       const double* joints, const double* ee,
                                       Workspace& ws) const {
  const size_t ncv = conv_dims_.size();
  ws.conv_in.resize(ncv);
  ws.conv_pre.resize(ncv);

  for (size_t l = 0; l < ncv; ++l) {
    const ConvDims& d = conv_dims_[l];
    if (l == 0)
      ws.conv_in[0].assign(image, image + arch_.image_size());
    ws.conv_pre[l].resize(static_cast<size_t>(d.out_ch) * d.out_h * d.out_w);
    conv_forward(d, ws.conv_in[l].data(), ws.conv_pre[l].data());
    if (l + 1 < ncv) {
      ws.conv_in[l + 1].resize(ws.conv_pre[l].size());
      for (size_t i = 0; i < ws.conv_pre[l].size(); ++i)
        ws.conv_in[l + 1][i] = elu(ws.conv_pre[l][i]);
    }
  }

  std::vector<double> conv_act(conv_flat_);
  {
    const std::vector<double>& last = ws.conv_pre.back();
    for (int i = 0; i < conv_flat_; ++i) conv_act[i] = elu(last[i]);
  }

  auto run_stack = [&](const std::vector<DenseDims>& dims, const double* input,
                       int in_dim, std::vector<std::vector<double>>& ins,
                       std::vector<std::vector<double>>& pres) {
    ins.resize(dims.size());
    pres.resize(dims.size());
    std::vector<double> cur_act(input, input + in_dim);
    for (size_t l = 0; l < dims.size(); ++l) {
      ins[l] = cur_act;
      pres[l].resize(dims[l].out);
      dense_forward(dims[l], ins[l].data(), pres[l].data());
      cur_act.resize(dims[l].out);
      for (int i = 0; i < dims[l].out; ++i) cur_act[i] = elu(pres[l][i]);
    }
    return cur_act;
  };

  std::vector<double> ee_act =
      run_stack(ee_dims_, ee, arch_.ee_dim, ws.ee_in, ws.ee_pre);
  std::vector<double> joint_act =
      run_stack(joint_dims_, joints, arch_.joint_dim, ws.joint_in, ws.joint_pre);

  std::vector<double> concat;
  concat.reserve(conv_act.size() + ee_act.size() + joint_act.size());
  concat.insert(concat.end(), conv_act.begin(), conv_act.end());
  concat.insert(concat.end(), ee_act.begin(), ee_act.end());
  concat.insert(concat.end(), joint_act.begin(), joint_act.end());

  ws.feature = run_stack(comb_dims_, concat.data(),
                         static_cast<int>(concat.size()), ws.comb_in,
                         ws.comb_pre);

  PolicyOutput out;
  out.mean.resize(arch_.action_dim);
  dense_forward(mean_head_, ws.feature.data(), out.mean.data());
  double v = 0.0;
  dense_forward(value_head_, ws.feature.data(), &v);
  out.value = v;
  out.log_std.resize(arch_.action_dim);
  for (int i = 0; i < arch_.action_dim; ++i)
    out.log_std[i] = std::clamp(params_[log_std_off_ + i], arch_.log_std_min,
                                arch_.log_std_max);
  return out;
}

PolicyOutput PolicyNet::forward(const double* image, const double* joints,
                                const double* ee) const {
  Workspace ws;
  return forward_cached(image, joints, ee, ws);
}

void PolicyNet::backward(const Workspace& ws, const double* dmean,
                         const double* dlog_std, double dvalue,
                         std::vector<double>& grad) const {
  // log_std is a free parameter; gradient passes through unless clipped
  for (int i = 0; i < arch_.action_dim; ++i) {
    double p = params_[log_std_off_ + i];
    if (p > arch_.log_std_min && p < arch_.log_std_max)
      grad[log_std_off_ + i] += dlog_std[i];
  }

  std::vector<double> dfeature(mean_head_.in, 0.0);
  dense_backward(mean_head_, ws.feature.data(), nullptr, dmean,
                 dfeature.data(), false, grad);
  dense_backward(value_head_, ws.feature.data(), nullptr, &dvalue,
                 dfeature.data(), false, grad);

  auto back_stack = [&](const std::vector<DenseDims>& dims,
                        const std::vector<std::vector<double>>& ins,
                        const std::vector<std::vector<double>>& pres,
                        std::vector<double> dout) {
    for (size_t l = dims.size(); l-- > 0;) {
      std::vector<double> din(dims[l].in, 0.0);
      dense_backward(dims[l], ins[l].data(), pres[l].data(), dout.data(),
                     din.data(), true, grad);
      dout = std::move(din);
    }
    return dout;  // gradient w.r.t. the stack input
  };

  std::vector<double> dconcat =
      back_stack(comb_dims_, ws.comb_in, ws.comb_pre, dfeature);

  int ee_out = ee_dims_.back().out;
  int joint_out = joint_dims_.back().out;
  std::vector<double> dconv_act(dconcat.begin(), dconcat.begin() + conv_flat_);
  std::vector<double> dee(dconcat.begin() + conv_flat_,
                          dconcat.begin() + conv_flat_ + ee_out);
  std::vector<double> djoint(dconcat.begin() + conv_flat_ + ee_out,
                             dconcat.begin() + conv_flat_ + ee_out + joint_out);

  back_stack(ee_dims_, ws.ee_in, ws.ee_pre, std::move(dee));
  back_stack(joint_dims_, ws.joint_in, ws.joint_pre, std::move(djoint));

  // conv stack: the flatten boundary carries ELU of the last pre-activation
  std::vector<double> dout = std::move(dconv_act);
  for (size_t l = conv_dims_.size(); l-- > 0;) {
    const ConvDims& d = conv_dims_[l];
    std::vector<double> din;
    double* din_ptr = nullptr;
    if (l > 0) {
      din.assign(static_cast<size_t>(d.in_ch) * d.in_h * d.in_w, 0.0);
      din_ptr = din.data();
    }
    conv_backward(d, ws.conv_in[l].data(), ws.conv_pre[l].data(), dout.data(),
                  din_ptr, grad);
    if (l > 0) {
      // din is w.r.t. the post-ELU activation feeding layer l; convert to the
      // pre-activation gradient of layer l-1 inside the next iteration
      dout = std::move(din);
    }
  }
}

double PolicyNet::gaussian_logprob(const std::vector<double>& action,
                                   const std::vector<double>& mean,
                                   const std::vector<double>& log_std) {
  double lp = 0.0;
  for (size_t i = 0; i < action.size(); ++i) {
    double sigma = std::exp(log_std[i]);
    double z = (action[i] - mean[i]) / sigma;
    lp += -0.5 * z * z - log_std[i] - 0.5 * kLog2Pi;
  }
  return lp;
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad,
                double lr) {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
  }
}

}  // namespace canopy
