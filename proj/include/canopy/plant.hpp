#pragma once

#include <cstdint>
#include <vector>

#include "canopy/geom.hpp"

namespace canopy {

struct PlantSpec {
  int stem_segments = 5;
  double segment_length = 0.05;   // meters
  int branch_count = 3;
  int leaves_per_branch = 3;
  double leaf_radius = 0.035;     // major semi-axis, meters
  double stiffness = 0.3;         // N*m/rad per joint
  double damping = 0.02;          // N*m*s/rad per joint
  Iso3 base_pose = Iso3::Identity();
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

// One torsional joint with two bending DoF (about local x then local y).
// The rigid segment extends along the joint frame's +z axis.
struct PlantJoint {
  int parent = -1;             // index of parent joint, -1 for the root
  Iso3 mount = Iso3::Identity();  // parent segment tip frame -> joint base frame
  double length = 0.0;         // segment length, meters
  double radius = 0.0;         // collision/render radius, meters
  double inertia = 1.0;        // rotational inertia about the joint, kg*m^2
};

struct Leaf {
  int joint = 0;          // segment the leaf rides on
  Iso3 local = Iso3::Identity();  // segment tip frame -> leaf center frame (+z = normal)
  double semi_major = 0.0;
  double semi_minor = 0.0;
};

// Structure plus dynamic state of a plant. The structure arrays are fixed
// after build; angles/velocities evolve. Node positions are always a pure
// function of (structure, angles) via update_kinematics.
struct PlantState {
  std::vector<PlantJoint> joints;
  std::vector<Leaf> leaves;
  double stiffness = 0.0;
  double damping = 0.0;
  Iso3 base_pose = Iso3::Identity();

  std::vector<Vec2> angles;      // (bend_x, bend_y) per joint, radians
  std::vector<Vec2> velocities;  // rad/s
  std::vector<Vec2> rest_angles;

  // world frames, derived: joint base frame (pre-bend), segment tip frame
  std::vector<Iso3> joint_frames;
  std::vector<Iso3> tip_frames;

  void update_kinematics();
  // world-space capsule of segment i (joint origin -> tip)
  Capsule segment_capsule(int i) const;
  // world center/axes of leaf i
  Iso3 leaf_frame(int i) const;
};

struct PlantContact {
  int probe = 0;     // index into the probe list
  int segment = 0;   // plant joint index
  Vec3 point;        // contact point on the segment axis, world
  Vec3 force;        // force applied to the plant, world (N)
};

// Deterministic procedural build; the plant is at rest afterwards.
PlantState build_plant(const PlantSpec& spec);

// Semi-implicit Euler with the damping term folded in implicitly:
//   v' = (v + h*(tau_ext - k*(theta - rest))/I) / (1 + h*c/I)
//   theta' = theta + h*v'
// applied `solver_iterations` times with h = dt/solver_iterations.
// external_torques has one (x, y) entry per joint and is held constant
// over dt. Returns a new state; the input is untouched.
PlantState step_plant(const PlantState& state,
                      const std::vector<Vec2>& external_torques, double dt,
                      int solver_iterations = 8);

// Penalty contacts between probe capsules and plant segments.
std::vector<PlantContact> contact_points(const PlantState& plant,
                                         const std::vector<Capsule>& probes,
                                         double penalty_gain);

// Torques the probe contacts induce on every plant joint (via the lever arms
// of all ancestor joints of each touched segment).
std::vector<Vec2> contact_torques(const PlantState& plant,
                                  const std::vector<Capsule>& probes,
                                  double penalty_gain = 50.0);

// Accumulates contact reactions into already-sized per-joint torque arrays.
void accumulate_contact_torques(const PlantState& plant,
                                const std::vector<PlantContact>& contacts,
                                std::vector<Vec2>& torques);

// Elastic plus kinetic energy, joules.
double plant_energy(const PlantState& state, const PlantSpec& spec);

}  // namespace canopy
