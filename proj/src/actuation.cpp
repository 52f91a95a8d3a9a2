#include "canopy/actuation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace canopy {

ServoConfig ServoConfig::default_config() {
  ServoConfig c;
  c.kp.fill(40.0);
  c.kd.fill(4.0);
  c.tau_max.fill(2.0);
  c.dt = 1.0 / 60.0;
  return c;
}

void ServoConfig::validate() const {
  for (int i = 0; i < kArmJoints; ++i) {
    if (kp[i] <= 0.0) throw std::invalid_argument("servo: kp must be > 0");
    if (kd[i] < 0.0) throw std::invalid_argument("servo: kd must be >= 0");
    if (tau_max[i] <= 0.0)
      throw std::invalid_argument("servo: tau_max must be > 0");
  }
  if (dt <= 0.0) throw std::invalid_argument("servo: dt must be > 0");
}

std::array<double, kArmJoints> ActionCommand::default_scale() {
  std::array<double, kArmJoints> s;
  s.fill(0.035);  // ~2 degrees per step
  return s;
}

ArmState apply_action(const ArmState& arm, const ActionCommand& cmd,
                      const ArmSpec& spec) {
  ArmState next = arm;
  std::array<double, kArmJoints> target = arm.q_target;
  for (int i = 0; i < kArmJoints; ++i) {
    double d = std::clamp(cmd.delta[i], -1.0, 1.0);
    target[i] += d * cmd.scale[i];
  }
  next.q_target = clamp_to_limits(spec, target);
  return next;
}

ServoResult servo_step(const ArmState& arm,
                       const std::array<double, kArmJoints>& resist,
                       const ServoConfig& cfg) {
  ServoResult out;
  out.state = arm;
  for (int i = 0; i < kArmJoints; ++i) {
    if (!std::isfinite(resist[i]))
      throw std::domain_error("servo_step: non-finite resist torque");
    double tau = cfg.kp[i] * (arm.q_target[i] - arm.q[i]) -
                 cfg.kd[i] * arm.qdot[i];
    tau = std::clamp(tau, -cfg.tau_max[i], cfg.tau_max[i]);
    out.tau[i] = tau;
    out.state.qdot[i] += cfg.dt * (tau + resist[i]);
    out.state.q[i] += cfg.dt * out.state.qdot[i];
  }
  return out;
}

}  // namespace canopy
