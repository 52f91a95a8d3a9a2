#include "canopy/arm.hpp"

#include <cmath>
#include <stdexcept>

namespace canopy {

namespace {
constexpr double kDeg = 3.14159265358979323846 / 180.0;
}

ArmSpec ArmSpec::default_spec() {
  // Proportions loosely following a small dual-arm desktop robot: a waist
  // joint plus five arm joints, ~0.34 m total reach.
  ArmSpec s;
  s.link_lengths = {0.07, 0.07, 0.06, 0.05, 0.05, 0.04};
  s.joint_axes = {Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitX(),
                  Vec3::UnitY(), Vec3::UnitX(), Vec3::UnitY()};
  for (int i = 0; i < kArmJoints; ++i) {
    s.limit_lo[i] = -180.0 * kDeg;
    s.limit_hi[i] = 180.0 * kDeg;
    s.capsule_radii[i] = 0.012;
  }
  s.limit_lo[0] = -45.0 * kDeg;  // waist
  s.limit_hi[0] = 45.0 * kDeg;
  s.base_pose = Iso3::Identity();
  return s;
}

void ArmSpec::validate() const {
  for (int i = 0; i < kArmJoints; ++i) {
    if (!(limit_lo[i] < limit_hi[i]))
      throw std::invalid_argument("arm: joint " + std::to_string(i) +
                                  " limits must satisfy lo < hi");
    if (link_lengths[i] <= 0.0)
      throw std::invalid_argument("arm: link_lengths must be > 0");
    if (capsule_radii[i] <= 0.0)
      throw std::invalid_argument("arm: capsule_radii must be > 0");
    if (joint_axes[i].norm() < 1e-9)
      throw std::invalid_argument("arm: joint axis must be nonzero");
  }
}

ArmPose forward_kinematics(const ArmSpec& spec,
                           const std::array<double, kArmJoints>& q) {
  ArmPose pose;
  Iso3 t = spec.base_pose;
  for (int i = 0; i < kArmJoints; ++i) {
    Iso3 joint = Iso3::Identity();
    joint.linear() = rot_axis(spec.joint_axes[i], q[i]);
    t = t * joint;
    t.translation() += t.linear() * Vec3(0, 0, spec.link_lengths[i]);
    pose.link_frames[i] = t;
  }
  pose.ee_position = t.translation();
  return pose;
}

std::vector<Capsule> arm_capsules(const ArmSpec& spec,
                                  const std::array<double, kArmJoints>& q) {
  ArmPose pose = forward_kinematics(spec, q);
  std::vector<Capsule> caps;
  caps.reserve(kArmJoints);
  Vec3 prev = spec.base_pose.translation();
  for (int i = 0; i < kArmJoints; ++i) {
    Vec3 tip = pose.link_frames[i].translation();
    caps.push_back(Capsule{prev, tip, spec.capsule_radii[i]});
    prev = tip;
  }
  return caps;
}

bool check_self_collision(const ArmSpec& spec,
                          const std::array<double, kArmJoints>& q) {
  std::vector<Capsule> caps = arm_capsules(spec, q);
  for (int i = 0; i < kArmJoints; ++i) {
    for (int j = i + 2; j < kArmJoints; ++j) {  // adjacent pairs excluded
      double d = segment_segment_distance(caps[i].a, caps[i].b, caps[j].a,
                                          caps[j].b);
      if (d < caps[i].radius + caps[j].radius) return true;
    }
  }
  return false;
}

std::array<double, kArmJoints> clamp_to_limits(
    const ArmSpec& spec, const std::array<double, kArmJoints>& q) {
  std::array<double, kArmJoints> out;
  for (int i = 0; i < kArmJoints; ++i)
    out[i] = std::clamp(q[i], spec.limit_lo[i], spec.limit_hi[i]);
  return out;
}

void enforce_limits(const ArmSpec& spec, ArmState& state) {
  for (int i = 0; i < kArmJoints; ++i) {
    if (state.q[i] < spec.limit_lo[i]) {
      state.q[i] = spec.limit_lo[i];
      if (state.qdot[i] < 0.0) state.qdot[i] = 0.0;
    } else if (state.q[i] > spec.limit_hi[i]) {
      state.q[i] = spec.limit_hi[i];
      if (state.qdot[i] > 0.0) state.qdot[i] = 0.0;
    }
  }
}

}  // namespace canopy
