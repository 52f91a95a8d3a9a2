#include "canopy/plant.hpp"

#include <cmath>
#include <stdexcept>

#include "canopy/rng.hpp"

namespace canopy {

namespace {

constexpr double kLinearDensity = 0.12;  // kg/m, used to derive joint inertia
constexpr double kMinInertia = 1e-6;
constexpr double kStemRadius = 0.008;
constexpr double kBranchRadius = 0.005;
constexpr double kTwoPi = 6.283185307179586;

double rod_inertia(double length) {
  double i = kLinearDensity * length * length * length / 3.0;
  return std::max(i, kMinInertia);
}

}  // namespace

void PlantSpec::validate() const {
  if (stem_segments < 2)
    throw std::invalid_argument("plant: stem_segments must be >= 2");
  if (segment_length <= 0.0)
    throw std::invalid_argument("plant: segment_length must be > 0");
  if (branch_count < 0)
    throw std::invalid_argument("plant: branch_count must be >= 0");
  if (leaves_per_branch < 0)
    throw std::invalid_argument("plant: leaves_per_branch must be >= 0");
  if (leaf_radius <= 0.0)
    throw std::invalid_argument("plant: leaf_radius must be > 0");
  if (stiffness <= 0.0)
    throw std::invalid_argument("plant: stiffness must be > 0");
  if (damping <= 0.0)
    throw std::invalid_argument("plant: damping must be > 0");
}

void PlantState::update_kinematics() {
  const size_t n = joints.size();
  joint_frames.resize(n);
  tip_frames.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const PlantJoint& j = joints[i];
    const Iso3& parent = j.parent < 0 ? base_pose : tip_frames[j.parent];
    Iso3 base = parent * j.mount;
    Iso3 bend = Iso3::Identity();
    bend.linear() = rot_x(angles[i].x()) * rot_y(angles[i].y());
    joint_frames[i] = base * bend;
    tip_frames[i] = joint_frames[i];
    tip_frames[i].translation() += joint_frames[i].linear() * Vec3(0, 0, j.length);
  }
}

Capsule PlantState::segment_capsule(int i) const {
  return Capsule{joint_frames[i].translation(), tip_frames[i].translation(),
                 joints[i].radius};
}

Iso3 PlantState::leaf_frame(int i) const {
  const Leaf& lf = leaves[i];
  return tip_frames[lf.joint] * lf.local;
}

PlantState build_plant(const PlantSpec& spec) {
  spec.validate();
  Rng rng(Rng::mix(spec.seed ^ 0x706c616e74ull));

  PlantState p;
  p.stiffness = spec.stiffness;
  p.damping = spec.damping;
  p.base_pose = spec.base_pose;

  // vertical stem: one joint at the base of every segment
  for (int i = 0; i < spec.stem_segments; ++i) {
    PlantJoint j;
    j.parent = i - 1;
    j.mount = Iso3::Identity();
    j.length = spec.segment_length;
    j.radius = kStemRadius;
    j.inertia = rod_inertia(spec.segment_length);
    p.joints.push_back(j);
  }

  // branches attach along the upper two thirds of the stem, fanned in yaw
  const int branch_segments = 2;
  const double branch_len = 0.8 * spec.segment_length;
  for (int b = 0; b < spec.branch_count; ++b) {
    int lo = spec.stem_segments / 3;
    int attach = lo + (b % std::max(1, spec.stem_segments - lo - 1));
    double yaw = kTwoPi * (static_cast<double>(b) / spec.branch_count) +
                 rng.uniform(-0.25, 0.25);
    double pitch = rng.uniform(0.9, 1.35);  // tilt away from vertical
    Iso3 mount = Iso3::Identity();
    mount.linear() = rot_z(yaw) * rot_y(pitch);

    int parent = attach;
    for (int s = 0; s < branch_segments; ++s) {
      PlantJoint j;
      j.parent = parent;
      j.mount = s == 0 ? mount : Iso3::Identity();
      j.length = branch_len;
      j.radius = kBranchRadius;
      j.inertia = rod_inertia(branch_len);
      parent = static_cast<int>(p.joints.size());
      p.joints.push_back(j);

      for (int l = 0; l < spec.leaves_per_branch; ++l) {
        if (l % branch_segments != s) continue;
        Leaf leaf;
        leaf.joint = parent;
        double roll = rng.uniform(0.0, kTwoPi);
        double tilt = rng.uniform(0.25, 0.75);
        Iso3 local = Iso3::Identity();
        local.linear() = rot_z(roll) * rot_x(tilt);
        // push the leaf off the branch tip so the disc sits clear of the stalk
        local.translation() =
            local.linear() * Vec3(0, spec.leaf_radius * 0.9, 0);
        leaf.local = local;
        leaf.semi_major = spec.leaf_radius * rng.uniform(0.85, 1.15);
        leaf.semi_minor = leaf.semi_major * 0.65;
        p.leaves.push_back(leaf);
      }
    }
  }

  const size_t n = p.joints.size();
  p.rest_angles.assign(n, Vec2::Zero());
  // small random rest bends keep the foliage from looking combed
  for (size_t i = static_cast<size_t>(spec.stem_segments); i < n; ++i)
    p.rest_angles[i] = Vec2(rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12));
  p.angles = p.rest_angles;
  p.velocities.assign(n, Vec2::Zero());
  p.update_kinematics();
  return p;
}

PlantState step_plant(const PlantState& state,
                      const std::vector<Vec2>& external_torques, double dt,
                      int solver_iterations) {
  if (dt <= 0.0) throw std::invalid_argument("step_plant: dt must be > 0");
  if (solver_iterations < 1)
    throw std::invalid_argument("step_plant: solver_iterations must be >= 1");
  if (external_torques.size() != state.joints.size())
    throw std::invalid_argument("step_plant: torque count mismatch");
  for (const Vec2& t : external_torques)
    if (!t.allFinite())
      throw std::domain_error("step_plant: non-finite external torque");

  PlantState next = state;
  const double h = dt / solver_iterations;
  const double k = state.stiffness;
  const double c = state.damping;
  for (int it = 0; it < solver_iterations; ++it) {
    for (size_t j = 0; j < next.joints.size(); ++j) {
      const double inv_i = 1.0 / next.joints[j].inertia;
      const double drag = 1.0 + h * c * inv_i;
      for (int d = 0; d < 2; ++d) {
        double spring = -k * (next.angles[j][d] - next.rest_angles[j][d]);
        double v = (next.velocities[j][d] +
                    h * (spring + external_torques[j][d]) * inv_i) /
                   drag;
        next.velocities[j][d] = v;
        next.angles[j][d] += h * v;
      }
    }
  }
  next.update_kinematics();
  return next;
}

std::vector<PlantContact> contact_points(const PlantState& plant,
                                         const std::vector<Capsule>& probes,
                                         double penalty_gain) {
  std::vector<PlantContact> out;
  for (size_t pi = 0; pi < probes.size(); ++pi) {
    const Capsule& probe = probes[pi];
    if (!probe.a.allFinite() || !probe.b.allFinite())
      throw std::domain_error("contact: non-finite probe capsule");
    for (size_t si = 0; si < plant.joints.size(); ++si) {
      Capsule seg = plant.segment_capsule(static_cast<int>(si));
      Vec3 on_probe, on_seg;
      double d = segment_segment_distance(probe.a, probe.b, seg.a, seg.b,
                                          &on_probe, &on_seg);
      double reach = probe.radius + seg.radius;
      if (d >= reach) continue;
      Vec3 n;
      if (d > 1e-12) {
        n = (on_seg - on_probe) / d;
      } else {
        // axes intersect; push along any direction orthogonal to the segment
        Vec3 axis = (seg.b - seg.a).normalized();
        n = axis.cross(Vec3::UnitX());
        if (n.squaredNorm() < 1e-12) n = axis.cross(Vec3::UnitY());
        n.normalize();
      }
      PlantContact ct;
      ct.probe = static_cast<int>(pi);
      ct.segment = static_cast<int>(si);
      ct.point = on_seg;
      ct.force = penalty_gain * (reach - d) * n;
      out.push_back(ct);
    }
  }
  return out;
}

void accumulate_contact_torques(const PlantState& plant,
                                const std::vector<PlantContact>& contacts,
                                std::vector<Vec2>& torques) {
  for (const PlantContact& ct : contacts) {
    for (int j = ct.segment; j >= 0; j = plant.joints[j].parent) {
      const Iso3& jf = plant.joint_frames[j];
      Vec3 lever = ct.point - jf.translation();
      Vec3 moment = lever.cross(ct.force);
      // bend-x axis is the pre-bend local x; bend-y follows the x rotation
      const PlantJoint& pj = plant.joints[j];
      const Iso3& parent = pj.parent < 0 ? plant.base_pose
                                         : plant.tip_frames[pj.parent];
      Mat3 base = (parent * pj.mount).linear();
      Vec3 axis_x = base.col(0);
      Vec3 axis_y = (base * rot_x(plant.angles[j].x())).col(1);
      torques[j].x() += moment.dot(axis_x);
      torques[j].y() += moment.dot(axis_y);
    }
  }
}

std::vector<Vec2> contact_torques(const PlantState& plant,
                                  const std::vector<Capsule>& probes,
                                  double penalty_gain) {
  std::vector<Vec2> torques(plant.joints.size(), Vec2::Zero());
  accumulate_contact_torques(plant, contact_points(plant, probes, penalty_gain),
                             torques);
  return torques;
}

double plant_energy(const PlantState& state, const PlantSpec& spec) {
  double e = 0.0;
  for (size_t j = 0; j < state.joints.size(); ++j) {
    for (int d = 0; d < 2; ++d) {
      double dq = state.angles[j][d] - state.rest_angles[j][d];
      e += 0.5 * spec.stiffness * dq * dq;
      e += 0.5 * state.joints[j].inertia * state.velocities[j][d] *
           state.velocities[j][d];
    }
  }
  return e;
}

}  // namespace canopy
