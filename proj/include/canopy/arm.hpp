#pragma once

#include <array>
#include <vector>

#include "canopy/geom.hpp"

namespace canopy {

inline constexpr int kArmJoints = 6;  // waist + five arm joints

struct ArmSpec {
  std::array<double, kArmJoints> link_lengths{};
  std::array<Vec3, kArmJoints> joint_axes{};   // unit axes in the parent frame
  std::array<double, kArmJoints> limit_lo{};   // radians
  std::array<double, kArmJoints> limit_hi{};
  std::array<double, kArmJoints> capsule_radii{};
  Iso3 base_pose = Iso3::Identity();

  static ArmSpec default_spec();
  void validate() const;
};

struct ArmState {
  std::array<double, kArmJoints> q{};
  std::array<double, kArmJoints> qdot{};
  std::array<double, kArmJoints> q_target{};
};

struct ArmPose {
  std::array<Iso3, kArmJoints> link_frames;  // frame at the tip of each link
  Vec3 ee_position;                          // origin of the final link tip
};

// Serial-chain forward kinematics:
//   T_i = T_{i-1} * Rot(axis_i, q_i) * Trans(0, 0, L_i)
ArmPose forward_kinematics(const ArmSpec& spec,
                           const std::array<double, kArmJoints>& q);

// World-space collision capsules, one per link (joint origin to link tip).
std::vector<Capsule> arm_capsules(const ArmSpec& spec,
                                  const std::array<double, kArmJoints>& q);

// True iff any non-adjacent link pair overlaps.
bool check_self_collision(const ArmSpec& spec,
                          const std::array<double, kArmJoints>& q);

std::array<double, kArmJoints> clamp_to_limits(
    const ArmSpec& spec, const std::array<double, kArmJoints>& q);

// Clamp q to the limits and kill the velocity of any joint pinned at a stop.
void enforce_limits(const ArmSpec& spec, ArmState& state);

}  // namespace canopy
