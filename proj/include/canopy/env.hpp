#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "canopy/actuation.hpp"
#include "canopy/arm.hpp"
#include "canopy/plant.hpp"
#include "canopy/rng.hpp"
#include "canopy/render.hpp"

namespace canopy {

struct RewardConfig {
  double k = 1.0;             // occlusion reward scale
  double r_fv_value = 3.0;    // full-visibility bonus
  double r_sv_value = 2.0;    // sustained-visibility bonus
  double sc_penalty = -5.0;   // self-collision penalty
  double aad_weight = 1.0;    // post-visibility action penalty scale
  double w_sc = 1.0, w_occ = 1.0, w_fv = 1.0, w_sus = 1.0, w_aad = 1.0;
  double full_visibility_fraction = 0.05;
  int sustain_steps = 10;

  void validate() const;
};

struct RewardBreakdown {
  double r_sc = 0.0;
  double r_occ = 0.0;
  double r_fv = 0.0;
  double r_sus = 0.0;
  double r_aad = 0.0;
  double total = 0.0;
};

struct FruitSpec {
  Vec3 center = Vec3::Zero();
  double radius = 0.05;
  Vec3 color = Vec3(0.62, 0.06, 0.06);
};

struct EpisodeSetup {
  PlantSpec plant;
  double plant_yaw = 0.0;
  FruitSpec fruit;
  std::array<double, kArmJoints> initial_q{};
  double lighting = 1.0;
  double depth_noise_sigma = 0.0;
  double tau_factor = 1.0;
  std::uint64_t seed = 0;
};

struct Observation {
  Frame frame;
  std::array<double, kArmJoints> joints{};
  Vec3 ee_position = Vec3::Zero();
};

// Replaces the fruit-mask channel with zeros (deployment mode); rgb and
// depth are untouched.
Observation zero_mask(const Observation& obs);

// r_occ = (1 - occluded/total) * k           (0 when the fruit is out of view)
// r_fv  = r_fv_value while occluded fraction < full_visibility_fraction
// r_sus = r_sv_value while that condition has held >= sustain_steps
// r_aad = -aad_weight * mask_active * ||action||
// r_sc  = sc_penalty on self-collision
// total = the weighted sum. visibility_history must already include the
// current step's full-visibility flag.
RewardBreakdown compute_reward(const OcclusionStats& occ, bool collided,
                               const std::vector<bool>& visibility_history,
                               double action_magnitude, bool mask_active,
                               const RewardConfig& cfg);

// True iff the `window` most recent entries all lie strictly below threshold.
bool check_success(const std::vector<double>& intersection_history,
                   double threshold, int window);

struct EnvConfig {
  PlantSpec plant;
  ArmSpec arm = ArmSpec::default_spec();
  ServoConfig servo = ServoConfig::default_config();
  CameraSpec camera;
  RewardConfig reward;

  Vec3 plant_position = Vec3(0.0, 0.22, 0.0);
  Vec3 arm_base = Vec3(0.0, -0.12, 0.0);
  double fruit_radius = 0.05;
  bool fruit_lattice_mode = true;
  std::vector<Vec3> fruit_lattice;  // drawn uniformly when lattice mode is on
  Vec3 fruit_box_lo = Vec3(-0.08, 0.40, 0.10);
  Vec3 fruit_box_hi = Vec3(0.08, 0.44, 0.30);

  Vec3 workspace_lo = Vec3(-0.2, -0.15, 0.0);
  Vec3 workspace_hi = Vec3(0.2, 0.45, 0.4);
  std::array<double, kArmJoints> init_q_lo{};
  std::array<double, kArmJoints> init_q_hi{};

  int max_steps = 600;
  int physics_substeps = 6;        // physics steps per control step
  double physics_dt = 1.0 / 60.0;  // seconds
  int plant_solver_iterations = 8;
  double contact_gain = 50.0;

  double success_threshold = 0.10;  // fraction of the fruit footprint
  bool success_pixels = false;      // interpret threshold as a raw pixel count
  int success_window = 5;

  std::array<bool, kArmJoints> actuated{};
  std::array<double, kArmJoints> action_scale = ActionCommand::default_scale();

  // scene variation (always active; collapse the ranges to pin a value)
  double yaw_lo = 0.0;
  double yaw_hi = 6.283185307179586;
  double tau_factor_lo = 1.0, tau_factor_hi = 1.0;
  double stiffness_lo = 0.0, stiffness_hi = 0.0;  // <=0 keeps the spec value
  double damping_lo = 0.0, damping_hi = 0.0;
  bool randomize_plant_shape = false;

  // sensor-fidelity randomization (the high/low fidelity switch)
  bool sensor_randomize = true;
  double light_lo = 0.4, light_hi = 1.6;
  double light_fixed = 1.0;
  double depth_noise_max = 0.02;  // sigma drawn in [0, max] per episode

  static EnvConfig defaults();
  void validate() const;
};

enum class DoneReason { none, success, self_collision, step_budget };

struct StepInfo {
  OcclusionStats occ;
  std::array<double, kArmJoints> tau_abs_max{};  // per-joint |tau| peak
  bool full_visibility = false;
  bool out_of_view = false;
  DoneReason reason = DoneReason::none;
};

struct StepResult {
  Observation obs;
  RewardBreakdown reward;
  bool done = false;
  StepInfo info;
};

class Env {
 public:
  explicit Env(EnvConfig cfg);

  // Draws the episode by rejection sampling (self-collision-free start with
  // the end effector inside the workspace box), resets all state, returns
  // the first observation.
  std::pair<Observation, EpisodeSetup> reset(std::uint64_t episode_seed);

  StepResult step(const std::array<double, kArmJoints>& delta);

  bool done() const { return done_; }
  int steps() const { return step_count_; }
  const EnvConfig& config() const { return cfg_; }
  const EpisodeSetup& setup() const { return setup_; }
  const ArmState& arm_state() const { return arm_; }
  const PlantState& plant_state() const { return plant_; }
  double last_intersection() const;

  Scene build_scene() const;
  Observation observe() const;

 private:
  void draw_setup(Rng& rng);

  EnvConfig cfg_;
  ServoConfig servo_;  // per-episode torque limits applied
  EpisodeSetup setup_;
  PlantState plant_;
  ArmState arm_;
  std::uint64_t episode_seed_ = 0;
  int step_count_ = 0;
  bool done_ = false;
  bool started_ = false;
  bool mask_active_ = false;  // previous step satisfied full visibility
  std::vector<double> intersection_history_;
  std::vector<bool> visibility_history_;
};

}  // namespace canopy
