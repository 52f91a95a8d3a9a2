#include "canopy/env.hpp"

#include <cmath>
#include <stdexcept>

#include "canopy/rng.hpp"

namespace canopy {

namespace {
const Vec3 kLeafColor(0.10, 0.45, 0.12);
const Vec3 kStemColor(0.32, 0.22, 0.10);
const Vec3 kArmColor(0.30, 0.30, 0.36);
constexpr int kResetAttempts = 1000;
}  // namespace

void RewardConfig::validate() const {
  if (sustain_steps < 1)
    throw std::invalid_argument("reward: sustain_steps must be >= 1");
  if (full_visibility_fraction < 0.0 || full_visibility_fraction > 1.0)
    throw std::invalid_argument(
        "reward: full_visibility_fraction must be in [0, 1]");
}

Observation zero_mask(const Observation& obs) {
  Observation out = obs;
  float* alpha = out.frame.data.data() + 3 * out.frame.plane_size();
  std::fill(alpha, alpha + out.frame.plane_size(), 0.0f);
  return out;
}

RewardBreakdown compute_reward(const OcclusionStats& occ, bool collided,
                               const std::vector<bool>& visibility_history,
                               double action_magnitude, bool mask_active,
                               const RewardConfig& cfg) {
  RewardBreakdown r;
  r.r_sc = collided ? cfg.sc_penalty : 0.0;
  r.r_occ = occ.out_of_view() ? 0.0 : (1.0 - occ.occluded_fraction()) * cfg.k;

  bool full_vis = !visibility_history.empty() && visibility_history.back();
  r.r_fv = full_vis ? cfg.r_fv_value : 0.0;

  int streak = 0;
  for (auto it = visibility_history.rbegin(); it != visibility_history.rend();
       ++it) {
    if (!*it) break;
    ++streak;
  }
  r.r_sus = streak >= cfg.sustain_steps ? cfg.r_sv_value : 0.0;
  r.r_aad = mask_active ? -cfg.aad_weight * action_magnitude : 0.0;

  r.total = cfg.w_sc * r.r_sc + cfg.w_occ * r.r_occ + cfg.w_fv * r.r_fv +
            cfg.w_sus * r.r_sus + cfg.w_aad * r.r_aad;
  return r;
}

bool check_success(const std::vector<double>& intersection_history,
                   double threshold, int window) {
  if (window < 1) throw std::invalid_argument("check_success: window must be >= 1");
  if (static_cast<int>(intersection_history.size()) < window) return false;
  for (int i = 0; i < window; ++i) {
    if (!(intersection_history[intersection_history.size() - 1 - i] < threshold))
      return false;
  }
  return true;
}

EnvConfig EnvConfig::defaults() {
  EnvConfig c;
  c.plant.base_pose = make_pose(c.plant_position, Vec3::Zero());
  c.camera.pose = make_pose(Vec3(0.0, -0.40, 0.22), Vec3::Zero());
  // camera frame: +x right, +y up, +z forward. Look along world +y.
  Mat3 look;
  look.col(0) = Vec3(1, 0, 0);   // right
  look.col(1) = Vec3(0, 0, 1);   // up
  look.col(2) = Vec3(0, 1, 0);   // forward
  c.camera.pose.linear() = look;
  c.camera.fov = 0.50;  // ~28.6 degrees, keeps the plant tight in frame
  c.camera.width = 64;
  c.camera.height = 64;
  c.arm.base_pose = make_pose(c.arm_base, Vec3::Zero());

  // 3x3 lattice behind the plant (left/center/right x low/mid/high), 20 cm
  // behind the stem
  for (double z : {0.12, 0.20, 0.28})
    for (double x : {-0.07, 0.0, 0.07})
      c.fruit_lattice.push_back(Vec3(x, 0.42, z));

  c.actuated.fill(true);
  double d30 = 30.0 * 3.14159265358979323846 / 180.0;
  for (int i = 0; i < kArmJoints; ++i) {
    c.init_q_lo[i] = -d30;
    c.init_q_hi[i] = d30;
  }
  c.init_q_lo[1] = 0.1;  // lean the shoulder toward the plant
  c.init_q_hi[1] = d30 + 0.1;
  return c;
}

void EnvConfig::validate() const {
  plant.validate();
  arm.validate();
  servo.validate();
  camera.validate();
  reward.validate();
  if (max_steps < 1) throw std::invalid_argument("env: max_steps must be >= 1");
  if (physics_substeps < 1)
    throw std::invalid_argument("env: physics_substeps must be >= 1");
  if (physics_dt <= 0.0) throw std::invalid_argument("env: physics_dt must be > 0");
  if (plant_solver_iterations < 1)
    throw std::invalid_argument("env: plant_solver_iterations must be >= 1");
  if (success_window < 1)
    throw std::invalid_argument("env: success_window must be >= 1");
  if (fruit_radius <= 0.0)
    throw std::invalid_argument("env: fruit_radius must be > 0");
  if (fruit_lattice_mode && fruit_lattice.empty())
    throw std::invalid_argument("env: fruit lattice is empty");
  for (int i = 0; i < kArmJoints; ++i)
    if (init_q_lo[i] > init_q_hi[i])
      throw std::invalid_argument("env: init_q range inverted");
}

Env::Env(EnvConfig cfg) : cfg_(std::move(cfg)), servo_(cfg_.servo) {
  cfg_.validate();
  plant_ = build_plant(cfg_.plant);
}

void Env::draw_setup(Rng& rng) {
  setup_ = EpisodeSetup{};
  setup_.seed = episode_seed_;
  setup_.plant = cfg_.plant;
  if (cfg_.randomize_plant_shape) setup_.plant.seed = rng.next_u64();
  if (cfg_.stiffness_hi > 0.0)
    setup_.plant.stiffness = rng.uniform(cfg_.stiffness_lo, cfg_.stiffness_hi);
  if (cfg_.damping_hi > 0.0)
    setup_.plant.damping = rng.uniform(cfg_.damping_lo, cfg_.damping_hi);

  setup_.plant_yaw = rng.uniform(cfg_.yaw_lo, cfg_.yaw_hi);
  Iso3 base = make_pose(cfg_.plant_position, Vec3(0, 0, setup_.plant_yaw));
  setup_.plant.base_pose = base;

  setup_.fruit.radius = cfg_.fruit_radius;
  if (cfg_.fruit_lattice_mode) {
    int cell = rng.uniform_int(0, static_cast<int>(cfg_.fruit_lattice.size()) - 1);
    setup_.fruit.center = cfg_.fruit_lattice[cell];
  } else {
    for (int d = 0; d < 3; ++d)
      setup_.fruit.center[d] =
          rng.uniform(cfg_.fruit_box_lo[d], cfg_.fruit_box_hi[d]);
  }

  setup_.lighting = cfg_.sensor_randomize
                        ? rng.uniform(cfg_.light_lo, cfg_.light_hi)
                        : cfg_.light_fixed;
  setup_.depth_noise_sigma =
      cfg_.sensor_randomize ? rng.uniform(0.0, cfg_.depth_noise_max) : 0.0;
  setup_.tau_factor = rng.uniform(cfg_.tau_factor_lo, cfg_.tau_factor_hi);

  // initial configuration: self-collision-free, end effector in the box
  bool ok = false;
  for (int attempt = 0; attempt < kResetAttempts; ++attempt) {
    std::array<double, kArmJoints> q;
    for (int i = 0; i < kArmJoints; ++i)
      q[i] = rng.uniform(cfg_.init_q_lo[i], cfg_.init_q_hi[i]);
    q = clamp_to_limits(cfg_.arm, q);
    if (check_self_collision(cfg_.arm, q)) continue;
    Vec3 ee = forward_kinematics(cfg_.arm, q).ee_position;
    bool in_box = true;
    for (int d = 0; d < 3; ++d)
      in_box = in_box && ee[d] > cfg_.workspace_lo[d] &&
               ee[d] < cfg_.workspace_hi[d];
    if (!in_box) continue;
    setup_.initial_q = q;
    ok = true;
    break;
  }
  if (!ok)
    throw std::runtime_error(
        "env reset: no valid initial configuration in 1000 draws; workspace "
        "bounds and init_q ranges are inconsistent");
}

std::pair<Observation, EpisodeSetup> Env::reset(std::uint64_t episode_seed) {
  episode_seed_ = episode_seed;
  Rng rng(Rng::mix(episode_seed ^ 0x657069736f6465ull));
  draw_setup(rng);

  plant_ = build_plant(setup_.plant);
  arm_ = ArmState{};
  arm_.q = setup_.initial_q;
  arm_.q_target = setup_.initial_q;
  arm_.qdot.fill(0.0);

  servo_ = cfg_.servo;
  for (int i = 0; i < kArmJoints; ++i) servo_.tau_max[i] *= setup_.tau_factor;
  servo_.dt = cfg_.physics_dt;

  step_count_ = 0;
  done_ = false;
  started_ = true;
  mask_active_ = false;
  intersection_history_.clear();
  visibility_history_.clear();
  return {observe(), setup_};
}

Scene Env::build_scene() const {
  Scene scene;
  for (size_t i = 0; i < plant_.joints.size(); ++i) {
    scene.capsules.push_back(
        SceneCapsule{plant_.segment_capsule(static_cast<int>(i)), kStemColor,
                     /*plant=*/true});
  }
  for (size_t i = 0; i < plant_.leaves.size(); ++i) {
    const Leaf& lf = plant_.leaves[i];
    scene.discs.push_back(SceneDisc{plant_.leaf_frame(static_cast<int>(i)),
                                    lf.semi_major, lf.semi_minor, kLeafColor,
                                    /*plant=*/true});
  }
  for (const Capsule& c : arm_capsules(cfg_.arm, arm_.q))
    scene.capsules.push_back(SceneCapsule{c, kArmColor, /*plant=*/false});
  scene.fruit =
      SceneSphere{setup_.fruit.center, setup_.fruit.radius, setup_.fruit.color};
  return scene;
}

Observation Env::observe() const {
  Scene scene = build_scene();
  Observation obs;
  obs.frame = render(scene, cfg_.camera, setup_.lighting);
  obs.frame = add_depth_noise(obs.frame, setup_.depth_noise_sigma,
                              Rng::mix(episode_seed_) + 7919u *
                                  static_cast<std::uint64_t>(step_count_),
                              cfg_.camera);
  obs.joints = arm_.q;
  obs.ee_position = forward_kinematics(cfg_.arm, arm_.q).ee_position;
  return obs;
}

double Env::last_intersection() const {
  return intersection_history_.empty() ? -1.0 : intersection_history_.back();
}

StepResult Env::step(const std::array<double, kArmJoints>& delta) {
  if (!started_) throw std::logic_error("env: step before reset");
  if (done_) throw std::logic_error("env: step after episode end");

  ActionCommand cmd;
  cmd.scale = cfg_.action_scale;
  double action_sq = 0.0;
  for (int i = 0; i < kArmJoints; ++i) {
    double d = std::clamp(delta[i], -1.0, 1.0);
    if (!cfg_.actuated[i]) d = 0.0;
    cmd.delta[i] = d;
    action_sq += d * d;
  }
  arm_ = apply_action(arm_, cmd, cfg_.arm);

  StepResult out;
  out.info.tau_abs_max.fill(0.0);
  std::vector<Vec2> plant_torques(plant_.joints.size());
  for (int sub = 0; sub < cfg_.physics_substeps; ++sub) {
    std::vector<Capsule> probes = arm_capsules(cfg_.arm, arm_.q);
    std::vector<PlantContact> contacts =
        contact_points(plant_, probes, cfg_.contact_gain);

    for (auto& t : plant_torques) t.setZero();
    accumulate_contact_torques(plant_, contacts, plant_torques);

    // reaction torques on the arm chain
    std::array<double, kArmJoints> resist{};
    if (!contacts.empty()) {
      ArmPose pose = forward_kinematics(cfg_.arm, arm_.q);
      for (const PlantContact& ct : contacts) {
        Vec3 reaction = -ct.force;
        for (int j = 0; j <= ct.probe; ++j) {
          const Iso3& before =
              j == 0 ? cfg_.arm.base_pose : pose.link_frames[j - 1];
          Vec3 axis = before.linear() * cfg_.arm.joint_axes[j];
          Vec3 lever = ct.point - before.translation();
          resist[j] += lever.cross(reaction).dot(axis);
        }
      }
    }

    ServoResult sr = servo_step(arm_, resist, servo_);
    arm_ = sr.state;
    enforce_limits(cfg_.arm, arm_);
    for (int i = 0; i < kArmJoints; ++i)
      out.info.tau_abs_max[i] =
          std::max(out.info.tau_abs_max[i], std::abs(sr.tau[i]));

    plant_ = step_plant(plant_, plant_torques, cfg_.physics_dt,
                        cfg_.plant_solver_iterations);
  }

  ++step_count_;
  bool collided = check_self_collision(cfg_.arm, arm_.q);

  Scene scene = build_scene();
  out.info.occ = occlusion_stats(scene, cfg_.camera);
  out.info.out_of_view = out.info.occ.out_of_view();

  double intersection =
      cfg_.success_pixels ? static_cast<double>(out.info.occ.occluded_pixels)
                          : out.info.occ.occluded_fraction();
  // an out-of-view fruit can never count toward success
  if (out.info.out_of_view)
    intersection = cfg_.success_pixels
                       ? 1e18
                       : 2.0;  // above any reachable threshold
  intersection_history_.push_back(intersection);

  bool full_vis =
      !out.info.out_of_view &&
      out.info.occ.occluded_fraction() < cfg_.reward.full_visibility_fraction;
  visibility_history_.push_back(full_vis);
  out.info.full_visibility = full_vis;

  out.reward = compute_reward(out.info.occ, collided, visibility_history_,
                              std::sqrt(action_sq), mask_active_, cfg_.reward);
  mask_active_ = full_vis;

  bool success = check_success(intersection_history_, cfg_.success_threshold,
                               cfg_.success_window);
  if (collided) {
    out.info.reason = DoneReason::self_collision;
  } else if (success) {
    out.info.reason = DoneReason::success;
  } else if (step_count_ >= cfg_.max_steps) {
    out.info.reason = DoneReason::step_budget;
  }
  done_ = out.info.reason != DoneReason::none;
  out.done = done_;

  out.obs = observe();
  return out;
}

}  // namespace canopy
