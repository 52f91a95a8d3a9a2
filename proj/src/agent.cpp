#include "canopy/agent.hpp"

#include <algorithm>
#include <stdexcept>

#include "canopy/checkpoint.hpp"

namespace canopy {

Agent::Agent(PolicyArch arch)
    : net_(std::move(arch)),
      image_scaler_(net_.arch().image_size()),
      joint_scaler_(net_.arch().joint_dim),
      ee_scaler_(net_.arch().ee_dim),
      value_scaler_(1) {}

void Agent::update_obs_stats(const Observation& obs) {
  const size_t n = net_.arch().image_size();
  if (obs.frame.data.size() != n)
    throw std::invalid_argument("agent: observation image size mismatch");
  std::vector<double> img(n);
  for (size_t i = 0; i < n; ++i) img[i] = obs.frame.data[i];
  image_scaler_.update(img.data());
  joint_scaler_.update(obs.joints.data());
  ee_scaler_.update(obs.ee_position.data());
}

void Agent::standardize(const Observation& obs, std::vector<float>& out) const {
  const size_t n = net_.arch().image_size();
  if (obs.frame.data.size() != n)
    throw std::invalid_argument("agent: observation image size mismatch");
  out.resize(obs_dim());
  for (size_t i = 0; i < n; ++i)
    out[i] = static_cast<float>(
        image_scaler_.apply_one(static_cast<double>(obs.frame.data[i]), i));
  for (int i = 0; i < net_.arch().joint_dim; ++i)
    out[n + i] = static_cast<float>(joint_scaler_.apply_one(obs.joints[i], i));
  for (int i = 0; i < net_.arch().ee_dim; ++i)
    out[n + net_.arch().joint_dim + i] =
        static_cast<float>(ee_scaler_.apply_one(obs.ee_position[i], i));
}

PolicyOutput Agent::forward_std(const float* obs_std) const {
  PolicyNet::Workspace ws;
  return forward_std_cached(obs_std, ws);
}

PolicyOutput Agent::forward_std_cached(const float* obs_std,
                                       PolicyNet::Workspace& ws) const {
  const PolicyArch& a = net_.arch();
  std::vector<double> image(a.image_size());
  for (size_t i = 0; i < image.size(); ++i) image[i] = obs_std[i];
  std::vector<double> joints(a.joint_dim), ee(a.ee_dim);
  for (int i = 0; i < a.joint_dim; ++i) joints[i] = obs_std[image.size() + i];
  for (int i = 0; i < a.ee_dim; ++i)
    ee[i] = obs_std[image.size() + a.joint_dim + i];
  return net_.forward_cached(image.data(), joints.data(), ee.data(), ws);
}

std::array<double, kArmJoints> Agent::act_mean(const Observation& obs,
                                               bool zeroed_mask) const {
  Observation o = zeroed_mask ? zero_mask(obs) : obs;
  std::vector<float> std_obs;
  standardize(o, std_obs);
  PolicyOutput out = forward_std(std_obs.data());
  std::array<double, kArmJoints> action{};
  for (int i = 0; i < kArmJoints && i < net_.arch().action_dim; ++i)
    action[i] = std::clamp(out.mean[i], -1.0, 1.0);
  return action;
}

namespace {

void put_scaler(TensorFile& tf, const std::string& base,
                const RunningScaler& s) {
  int n = static_cast<int>(s.dim());
  tf.put(base + ".mean", {n}, s.mean_state());
  tf.put(base + ".m2", {n}, s.m2_state());
  tf.put_scalar(base + ".count", static_cast<double>(s.count()));
}

void load_scaler(const TensorFile& tf, const std::string& base,
                 RunningScaler& s) {
  const auto& mean = tf.get(base + ".mean");
  const auto& m2 = tf.get(base + ".m2");
  if (mean.data.size() != s.dim() || m2.data.size() != s.dim())
    throw std::runtime_error("checkpoint: scaler '" + base + "' size mismatch");
  s.mean_state() = mean.data;
  s.m2_state() = m2.data;
  s.set_count(static_cast<long long>(tf.get_scalar(base + ".count")));
}

}  // namespace

void Agent::save(const std::string& path) const {
  TensorFile tf;
  const PolicyArch& a = net_.arch();
  tf.put_scalar("meta.image_h", a.image_h);
  tf.put_scalar("meta.image_w", a.image_w);
  tf.put_scalar("meta.image_ch", a.image_ch);
  tf.put_scalar("meta.action_dim", a.action_dim);
  std::vector<double> conv_flat;
  for (const ConvSpec& c : a.conv) {
    conv_flat.push_back(c.out_channels);
    conv_flat.push_back(c.kernel);
    conv_flat.push_back(c.stride);
  }
  tf.put("meta.conv", {static_cast<int>(conv_flat.size())}, conv_flat);
  auto layers_of = [](const std::vector<int>& v) {
    return std::vector<double>(v.begin(), v.end());
  };
  tf.put("meta.ee_layers", {static_cast<int>(a.ee_layers.size())},
         layers_of(a.ee_layers));
  tf.put("meta.joint_layers", {static_cast<int>(a.joint_layers.size())},
         layers_of(a.joint_layers));
  tf.put("meta.combined_layers", {static_cast<int>(a.combined_layers.size())},
         layers_of(a.combined_layers));

  for (const TensorRef& t : net_.tensors()) {
    std::vector<double> data(net_.params().begin() + t.offset,
                             net_.params().begin() + t.offset + t.size);
    tf.put("param." + t.name, t.shape, std::move(data));
  }
  put_scaler(tf, "scaler.image", image_scaler_);
  put_scaler(tf, "scaler.joints", joint_scaler_);
  put_scaler(tf, "scaler.ee", ee_scaler_);
  put_scaler(tf, "scaler.value", value_scaler_);
  tf.save(path);
}

Agent Agent::load(const std::string& path) {
  TensorFile tf = TensorFile::load(path);
  PolicyArch a;
  a.image_h = static_cast<int>(tf.get_scalar("meta.image_h"));
  a.image_w = static_cast<int>(tf.get_scalar("meta.image_w"));
  a.image_ch = static_cast<int>(tf.get_scalar("meta.image_ch"));
  a.action_dim = static_cast<int>(tf.get_scalar("meta.action_dim"));
  a.conv.clear();
  const auto& conv = tf.get("meta.conv").data;
  if (conv.size() % 3 != 0)
    throw std::runtime_error("checkpoint: bad conv metadata");
  for (size_t i = 0; i < conv.size(); i += 3)
    a.conv.push_back(ConvSpec{static_cast<int>(conv[i]),
                              static_cast<int>(conv[i + 1]),
                              static_cast<int>(conv[i + 2])});
  auto to_ints = [&](const std::string& name) {
    const auto& d = tf.get(name).data;
    return std::vector<int>(d.begin(), d.end());
  };
  a.ee_layers = to_ints("meta.ee_layers");
  a.joint_layers = to_ints("meta.joint_layers");
  a.combined_layers = to_ints("meta.combined_layers");

  Agent agent(a);
  for (const TensorRef& t : agent.net_.tensors()) {
    const auto& e = tf.get("param." + t.name);
    if (e.data.size() != t.size)
      throw std::runtime_error("checkpoint: tensor '" + t.name +
                               "' size mismatch");
    std::copy(e.data.begin(), e.data.end(),
              agent.net_.params().begin() + t.offset);
  }
  load_scaler(tf, "scaler.image", agent.image_scaler_);
  load_scaler(tf, "scaler.joints", agent.joint_scaler_);
  load_scaler(tf, "scaler.ee", agent.ee_scaler_);
  load_scaler(tf, "scaler.value", agent.value_scaler_);
  return agent;
}

}  // namespace canopy
