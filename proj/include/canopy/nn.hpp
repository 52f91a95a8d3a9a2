#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "canopy/rng.hpp"

namespace canopy {

struct ConvSpec {
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
};

// Three input branches (image conv stack, end-effector MLP, joint MLP)
// concatenated into a shared head that emits the Gaussian action mean, a
// state-independent log-std vector, and a scalar value.
struct PolicyArch {
  int image_h = 64, image_w = 64, image_ch = 5;
  std::vector<ConvSpec> conv = {{32, 8, 4}, {128, 4, 2}, {128, 3, 1}, {128, 3, 1}};
  std::vector<int> ee_layers = {64, 64};
  std::vector<int> joint_layers = {64, 64};
  std::vector<int> combined_layers = {512};
  int ee_dim = 3;
  int joint_dim = 6;
  int action_dim = 6;
  double log_std_min = -20.0;
  double log_std_max = 2.0;

  void validate() const;  // throws on impossible conv dimensions
  size_t image_size() const {
    return static_cast<size_t>(image_ch) * image_h * image_w;
  }
  size_t obs_size() const { return image_size() + joint_dim + ee_dim; }
};

struct TensorRef {
  std::string name;
  size_t offset = 0;
  std::vector<int> shape;
  size_t size = 0;
};

struct PolicyOutput {
  std::vector<double> mean;     // action_dim
  std::vector<double> log_std;  // action_dim, clipped
  double value = 0.0;
};

class PolicyNet {
 public:
  explicit PolicyNet(PolicyArch arch);

  const PolicyArch& arch() const { return arch_; }
  size_t param_count() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  const std::vector<TensorRef>& tensors() const { return tensors_; }

  // Small random weights (scaled by fan-in), zero biases, log_std = initial.
  void init_params(Rng& rng, double initial_log_std = 0.0);

  // Scratch buffers for a cached forward pass; reusable across calls.
  struct Workspace {
    std::vector<std::vector<double>> conv_in;    // input to each conv layer
    std::vector<std::vector<double>> conv_pre;   // pre-activation
    std::vector<std::vector<double>> ee_in, ee_pre;
    std::vector<std::vector<double>> joint_in, joint_pre;
    std::vector<std::vector<double>> comb_in, comb_pre;
    std::vector<double> feature;  // final head input
  };

  PolicyOutput forward(const double* image, const double* joints,
                       const double* ee) const;
  PolicyOutput forward_cached(const double* image, const double* joints,
                              const double* ee, Workspace& ws) const;

  // Reverse pass from head gradients; accumulates into grad (param-sized).
  void backward(const Workspace& ws, const double* dmean,
                const double* dlog_std, double dvalue,
                std::vector<double>& grad) const;

  // log N(action | mean, exp(log_std)) summed over components
  static double gaussian_logprob(const std::vector<double>& action,
                                 const std::vector<double>& mean,
                                 const std::vector<double>& log_std);

 private:
  struct ConvDims {
    int in_ch, in_h, in_w, out_ch, out_h, out_w, kernel, stride;
    size_t w_off, b_off;
  };
  struct DenseDims {
    int in, out;
    size_t w_off, b_off;
  };

  void conv_forward(const ConvDims& d, const double* in, double* pre) const;
  void conv_backward(const ConvDims& d, const double* in, const double* pre,
                     const double* dout, double* din,
                     std::vector<double>& grad) const;
  void dense_forward(const DenseDims& d, const double* in, double* pre) const;
  void dense_backward(const DenseDims& d, const double* in, const double* pre,
                      const double* dout, double* din, bool elu,
                      std::vector<double>& grad) const;

  PolicyArch arch_;
  std::vector<double> params_;
  std::vector<TensorRef> tensors_;
  std::vector<ConvDims> conv_dims_;
  std::vector<DenseDims> ee_dims_, joint_dims_, comb_dims_;
  DenseDims mean_head_, value_head_;
  size_t log_std_off_ = 0;
  int conv_flat_ = 0;
};

// Adam with bias correction.
class Adam {
 public:
  Adam(size_t dim, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(dim, 0.0), v_(dim, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(std::vector<double>& params, const std::vector<double>& grad,
            double lr);
  std::vector<double>& m_state() { return m_; }
  std::vector<double>& v_state() { return v_; }
  long long t() const { return t_; }
  void set_t(long long t) { t_ = t; }

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  long long t_ = 0;
};

}  // namespace canopy
