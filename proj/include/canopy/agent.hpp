#pragma once

#include <array>
#include <string>
#include <vector>

#include "canopy/env.hpp"
#include "canopy/nn.hpp"
#include "canopy/scaler.hpp"

namespace canopy {

// Policy network plus its observation/value standardizers: everything a
// consumer needs to turn an Observation into an action, and everything a
// checkpoint has to carry.
class Agent {
 public:
  explicit Agent(PolicyArch arch);

  PolicyNet& net() { return net_; }
  const PolicyNet& net() const { return net_; }
  const PolicyArch& arch() const { return net_.arch(); }
  size_t obs_dim() const { return net_.arch().obs_size(); }

  RunningScaler& image_scaler() { return image_scaler_; }
  RunningScaler& joint_scaler() { return joint_scaler_; }
  RunningScaler& ee_scaler() { return ee_scaler_; }
  RunningScaler& value_scaler() { return value_scaler_; }
  const RunningScaler& value_scaler() const { return value_scaler_; }

  void update_obs_stats(const Observation& obs);
  // standardized observation, layout [image planes | joints | ee]
  void standardize(const Observation& obs, std::vector<float>& out) const;

  PolicyOutput forward_std(const float* obs_std) const;
  PolicyOutput forward_std_cached(const float* obs_std,
                                  PolicyNet::Workspace& ws) const;

  // deterministic action: clip(mean) component-wise to [-1, 1]
  std::array<double, kArmJoints> act_mean(const Observation& obs,
                                          bool zeroed_mask) const;

  double value_to_natural(double v_std) const {
    return value_scaler_.unapply_one(v_std, 0);
  }

  void save(const std::string& path) const;
  static Agent load(const std::string& path);

 private:
  PolicyNet net_;
  RunningScaler image_scaler_;
  RunningScaler joint_scaler_;
  RunningScaler ee_scaler_;
  RunningScaler value_scaler_;
};

}  // namespace canopy
