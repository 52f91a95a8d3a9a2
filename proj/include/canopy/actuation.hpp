#pragma once

#include <array>

#include "canopy/arm.hpp"

namespace canopy {

// PD servo with a hard torque cap: the software analog of a per-motor
// current limit. Joint inertia is 1, so gains and tau_max are the only
// knobs that matter.
struct ServoConfig {
  std::array<double, kArmJoints> kp{};
  std::array<double, kArmJoints> kd{};
  std::array<double, kArmJoints> tau_max{};
  double dt = 1.0 / 60.0;

  static ServoConfig default_config();
  void validate() const;
};

// Policy action: per-joint deltas in [-1, 1], scaled to radians at apply time.
struct ActionCommand {
  std::array<double, kArmJoints> delta{};
  std::array<double, kArmJoints> scale{};  // radians per unit

  static std::array<double, kArmJoints> default_scale();
};

struct ServoResult {
  ArmState state;
  std::array<double, kArmJoints> tau{};  // emitted motor torque (post-clamp)
};

// q_target += clip(delta, -1, 1) * scale, clamped to the joint limits.
// q and qdot are untouched.
ArmState apply_action(const ArmState& arm, const ActionCommand& cmd,
                      const ArmSpec& spec);

// One servo integration step:
//   tau  = clamp(kp*(q_target - q) - kd*qdot, +-tau_max)
//   qdot += dt * (tau + resist)
//   q    += dt * qdot
ServoResult servo_step(const ArmState& arm,
                       const std::array<double, kArmJoints>& resist,
                       const ServoConfig& cfg);

}  // namespace canopy
