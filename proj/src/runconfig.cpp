#include "canopy/runconfig.hpp"

#include <cmath>

namespace canopy {

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

std::array<double, kArmJoints> to_array6(const std::vector<double>& v) {
  std::array<double, kArmJoints> out{};
  for (int i = 0; i < kArmJoints; ++i) out[i] = v[i];
  return out;
}

std::vector<double> from_array6(const std::array<double, kArmJoints>& a) {
  return std::vector<double>(a.begin(), a.end());
}

Vec3 to_vec3(const std::vector<double>& v) { return Vec3(v[0], v[1], v[2]); }

}  // namespace

RunConfig RunConfig::from_config(const Config& cfg) {
  RunConfig rc;
  rc.raw = cfg;
  rc.env = EnvConfig::defaults();

  {
    SectionReader run(cfg, "run");
    rc.master_seed =
        static_cast<std::uint64_t>(run.integer("seed", 0));
    rc.out_dir = run.str("out_dir", rc.out_dir);
    run.finish();
  }

  {
    SectionReader p(cfg, "plant");
    PlantSpec& ps = rc.env.plant;
    ps.stem_segments = static_cast<int>(p.integer("stem_segments", ps.stem_segments));
    ps.segment_length = p.real("segment_length", ps.segment_length);
    ps.branch_count = static_cast<int>(p.integer("branch_count", ps.branch_count));
    ps.leaves_per_branch =
        static_cast<int>(p.integer("leaves_per_branch", ps.leaves_per_branch));
    ps.leaf_radius = p.real("leaf_radius", ps.leaf_radius);
    ps.stiffness = p.real("stiffness", ps.stiffness);
    ps.damping = p.real("damping", ps.damping);
    ps.seed = static_cast<std::uint64_t>(p.integer("seed", 0));
    rc.env.plant_position = to_vec3(p.array_n(
        "position", 3,
        {rc.env.plant_position.x(), rc.env.plant_position.y(),
         rc.env.plant_position.z()}));
    p.finish();
    ps.base_pose = make_pose(rc.env.plant_position, Vec3::Zero());
  }

  {
    SectionReader a(cfg, "arm");
    ArmSpec& as = rc.env.arm;
    auto lengths = a.array_n("link_lengths", kArmJoints,
                             std::vector<double>(as.link_lengths.begin(),
                                                 as.link_lengths.end()));
    auto radii = a.array_n("capsule_radii", kArmJoints,
                           std::vector<double>(as.capsule_radii.begin(),
                                               as.capsule_radii.end()));
    std::vector<double> lo_deg(kArmJoints), hi_deg(kArmJoints);
    for (int i = 0; i < kArmJoints; ++i) {
      lo_deg[i] = as.limit_lo[i] / kDeg;
      hi_deg[i] = as.limit_hi[i] / kDeg;
    }
    lo_deg = a.array_n("limit_lo_deg", kArmJoints, lo_deg);
    hi_deg = a.array_n("limit_hi_deg", kArmJoints, hi_deg);
    rc.env.arm_base = to_vec3(a.array_n(
        "base", 3, {rc.env.arm_base.x(), rc.env.arm_base.y(), rc.env.arm_base.z()}));
    a.finish();
    for (int i = 0; i < kArmJoints; ++i) {
      as.link_lengths[i] = lengths[i];
      as.capsule_radii[i] = radii[i];
      as.limit_lo[i] = lo_deg[i] * kDeg;
      as.limit_hi[i] = hi_deg[i] * kDeg;
    }
    as.base_pose = make_pose(rc.env.arm_base, Vec3::Zero());
  }

  {
    SectionReader s(cfg, "servo");
    ServoConfig& sc = rc.env.servo;
    double kp = s.real("kp", sc.kp[0]);
    double kd = s.real("kd", sc.kd[0]);
    double tau = s.real("tau_max", sc.tau_max[0]);
    s.finish();
    sc.kp.fill(kp);
    sc.kd.fill(kd);
    sc.tau_max.fill(tau);
  }

  {
    SectionReader c(cfg, "camera");
    CameraSpec& cam = rc.env.camera;
    cam.width = static_cast<int>(c.integer("width", cam.width));
    cam.height = static_cast<int>(c.integer("height", cam.height));
    cam.fov = c.real("fov", cam.fov);
    cam.near = c.real("near", cam.near);
    cam.far = c.real("far", cam.far);
    Vec3 pos = to_vec3(c.array_n("position", 3,
                                 {cam.pose.translation().x(),
                                  cam.pose.translation().y(),
                                  cam.pose.translation().z()}));
    c.finish();
    cam.pose.translation() = pos;
  }

  {
    SectionReader r(cfg, "reward");
    RewardConfig& rw = rc.env.reward;
    rw.k = r.real("k", rw.k);
    rw.r_fv_value = r.real("r_fv_value", rw.r_fv_value);
    rw.r_sv_value = r.real("r_sv_value", rw.r_sv_value);
    rw.sc_penalty = r.real("sc_penalty", rw.sc_penalty);
    rw.aad_weight = r.real("aad_weight", rw.aad_weight);
    rw.w_sc = r.real("w_sc", rw.w_sc);
    rw.w_occ = r.real("w_occ", rw.w_occ);
    rw.w_fv = r.real("w_fv", rw.w_fv);
    rw.w_sus = r.real("w_sus", rw.w_sus);
    rw.w_aad = r.real("w_aad", rw.w_aad);
    rw.full_visibility_fraction =
        r.real("full_visibility_fraction", rw.full_visibility_fraction);
    rw.sustain_steps =
        static_cast<int>(r.integer("sustain_steps", rw.sustain_steps));
    r.finish();
  }

  {
    SectionReader e(cfg, "env");
    EnvConfig& ec = rc.env;
    ec.max_steps = static_cast<int>(e.integer("max_steps", ec.max_steps));
    ec.physics_substeps =
        static_cast<int>(e.integer("physics_substeps", ec.physics_substeps));
    ec.plant_solver_iterations = static_cast<int>(
        e.integer("plant_solver_iterations", ec.plant_solver_iterations));
    ec.physics_dt = e.real("physics_dt", ec.physics_dt);
    ec.contact_gain = e.real("contact_gain", ec.contact_gain);
    ec.success_threshold = e.real("success_threshold", ec.success_threshold);
    ec.success_pixels = e.boolean("success_pixels", ec.success_pixels);
    ec.success_window =
        static_cast<int>(e.integer("success_window", ec.success_window));
    ec.fruit_radius = e.real("fruit_radius", ec.fruit_radius);
    ec.fruit_lattice_mode =
        e.boolean("fruit_lattice_mode", ec.fruit_lattice_mode);
    {
      std::vector<double> flat;
      for (const Vec3& v : ec.fruit_lattice)
        flat.insert(flat.end(), {v.x(), v.y(), v.z()});
      flat = e.array("fruit_lattice", flat);
      if (flat.size() % 3 != 0)
        throw ConfigError("[env] fruit_lattice length must be a multiple of 3");
      ec.fruit_lattice.clear();
      for (size_t i = 0; i < flat.size(); i += 3)
        ec.fruit_lattice.push_back(Vec3(flat[i], flat[i + 1], flat[i + 2]));
    }
    ec.fruit_box_lo = to_vec3(e.array_n(
        "fruit_box_lo", 3,
        {ec.fruit_box_lo.x(), ec.fruit_box_lo.y(), ec.fruit_box_lo.z()}));
    ec.fruit_box_hi = to_vec3(e.array_n(
        "fruit_box_hi", 3,
        {ec.fruit_box_hi.x(), ec.fruit_box_hi.y(), ec.fruit_box_hi.z()}));
    ec.workspace_lo = to_vec3(e.array_n(
        "workspace_lo", 3,
        {ec.workspace_lo.x(), ec.workspace_lo.y(), ec.workspace_lo.z()}));
    ec.workspace_hi = to_vec3(e.array_n(
        "workspace_hi", 3,
        {ec.workspace_hi.x(), ec.workspace_hi.y(), ec.workspace_hi.z()}));
    {
      std::vector<double> lo(kArmJoints), hi(kArmJoints);
      for (int i = 0; i < kArmJoints; ++i) {
        lo[i] = ec.init_q_lo[i] / kDeg;
        hi[i] = ec.init_q_hi[i] / kDeg;
      }
      lo = e.array_n("init_q_lo_deg", kArmJoints, lo);
      hi = e.array_n("init_q_hi_deg", kArmJoints, hi);
      for (int i = 0; i < kArmJoints; ++i) {
        ec.init_q_lo[i] = lo[i] * kDeg;
        ec.init_q_hi[i] = hi[i] * kDeg;
      }
    }
    {
      std::vector<double> act(kArmJoints, 1.0);
      for (int i = 0; i < kArmJoints; ++i) act[i] = ec.actuated[i] ? 1.0 : 0.0;
      act = e.array_n("actuated", kArmJoints, act);
      for (int i = 0; i < kArmJoints; ++i) ec.actuated[i] = act[i] != 0.0;
    }
    {
      std::vector<double> scale = from_array6(ec.action_scale);
      scale = e.array_n("action_scale", kArmJoints, scale);
      ec.action_scale = to_array6(scale);
    }
    ec.yaw_lo = e.real("yaw_lo", ec.yaw_lo);
    ec.yaw_hi = e.real("yaw_hi", ec.yaw_hi);
    ec.tau_factor_lo = e.real("tau_factor_lo", ec.tau_factor_lo);
    ec.tau_factor_hi = e.real("tau_factor_hi", ec.tau_factor_hi);
    ec.stiffness_lo = e.real("stiffness_lo", ec.stiffness_lo);
    ec.stiffness_hi = e.real("stiffness_hi", ec.stiffness_hi);
    ec.damping_lo = e.real("damping_lo", ec.damping_lo);
    ec.damping_hi = e.real("damping_hi", ec.damping_hi);
    ec.randomize_plant_shape =
        e.boolean("randomize_plant_shape", ec.randomize_plant_shape);
    ec.sensor_randomize = e.boolean("sensor_randomize", ec.sensor_randomize);
    ec.light_lo = e.real("light_lo", ec.light_lo);
    ec.light_hi = e.real("light_hi", ec.light_hi);
    ec.light_fixed = e.real("light_fixed", ec.light_fixed);
    ec.depth_noise_max = e.real("depth_noise_max", ec.depth_noise_max);
    e.finish();
  }

  {
    SectionReader p(cfg, "ppo");
    PPOConfig& pc = rc.ppo;
    pc.rollouts = static_cast<int>(p.integer("rollouts", pc.rollouts));
    pc.learning_epochs =
        static_cast<int>(p.integer("learning_epochs", pc.learning_epochs));
    pc.mini_batches =
        static_cast<int>(p.integer("mini_batches", pc.mini_batches));
    pc.gamma = p.real("gamma", pc.gamma);
    pc.lam = p.real("lambda", pc.lam);
    pc.learning_rate = p.real("learning_rate", pc.learning_rate);
    pc.kl_threshold = p.real("kl_threshold", pc.kl_threshold);
    pc.clip_epsilon = p.real("clip_epsilon", pc.clip_epsilon);
    pc.entropy_coef = p.real("entropy_coef", pc.entropy_coef);
    pc.value_coef = p.real("value_coef", pc.value_coef);
    pc.max_grad_norm = p.real("max_grad_norm", pc.max_grad_norm);
    p.finish();
  }

  {
    SectionReader p(cfg, "policy");
    std::vector<double> conv_flat;
    for (const ConvSpec& c : rc.arch.conv)
      conv_flat.insert(conv_flat.end(),
                       {static_cast<double>(c.out_channels),
                        static_cast<double>(c.kernel),
                        static_cast<double>(c.stride)});
    conv_flat = p.array("conv", conv_flat);
    if (conv_flat.size() % 3 != 0)
      throw ConfigError("[policy] conv must be flat (channels,kernel,stride) triples");
    rc.arch.conv.clear();
    for (size_t i = 0; i < conv_flat.size(); i += 3)
      rc.arch.conv.push_back(ConvSpec{static_cast<int>(conv_flat[i]),
                                      static_cast<int>(conv_flat[i + 1]),
                                      static_cast<int>(conv_flat[i + 2])});
    auto to_layers = [](const std::vector<double>& v) {
      std::vector<int> out;
      for (double d : v) out.push_back(static_cast<int>(d));
      return out;
    };
    rc.arch.ee_layers = to_layers(
        p.array("ee_layers", std::vector<double>(rc.arch.ee_layers.begin(),
                                                 rc.arch.ee_layers.end())));
    rc.arch.joint_layers = to_layers(p.array(
        "joint_layers", std::vector<double>(rc.arch.joint_layers.begin(),
                                            rc.arch.joint_layers.end())));
    rc.arch.combined_layers = to_layers(p.array(
        "combined_layers", std::vector<double>(rc.arch.combined_layers.begin(),
                                               rc.arch.combined_layers.end())));
    rc.arch.log_std_min = p.real("log_std_min", rc.arch.log_std_min);
    rc.arch.log_std_max = p.real("log_std_max", rc.arch.log_std_max);
    rc.initial_log_std = p.real("initial_log_std", rc.initial_log_std);
    p.finish();
  }

  {
    SectionReader t(cfg, "train");
    rc.num_envs = static_cast<int>(t.integer("num_envs", rc.num_envs));
    rc.max_env_steps = t.integer("max_env_steps", rc.max_env_steps);
    rc.eval_every_updates = static_cast<int>(
        t.integer("eval_every_updates", rc.eval_every_updates));
    rc.eval_episodes =
        static_cast<int>(t.integer("eval_episodes", rc.eval_episodes));
    rc.stop_success = t.real("stop_success", rc.stop_success);
    rc.eval_zero_mask = t.boolean("eval_zero_mask", rc.eval_zero_mask);
    rc.checkpoint_every_updates = static_cast<int>(
        t.integer("checkpoint_every_updates", rc.checkpoint_every_updates));
    t.finish();
  }

  {
    SectionReader e(cfg, "eval");
    rc.randomized_episodes = static_cast<int>(
        e.integer("randomized_episodes", rc.randomized_episodes));
    std::vector<double> plant_seeds = e.array("grid_plant_seeds", {0});
    std::vector<double> cells;
    for (const Vec3& v : rc.env.fruit_lattice)
      cells.insert(cells.end(), {v.x(), v.y(), v.z()});
    cells = e.array("grid_fruit_cells", cells);
    if (cells.size() % 3 != 0)
      throw ConfigError("[eval] grid_fruit_cells length must be a multiple of 3");
    std::vector<double> configs = e.array("grid_initial_configs_deg", {});
    if (configs.size() % kArmJoints != 0)
      throw ConfigError(
          "[eval] grid_initial_configs_deg length must be a multiple of 6");
    rc.grid.repeats = static_cast<int>(e.integer("grid_repeats", 1));
    e.finish();

    for (double s : plant_seeds) {
      PlantSpec ps = rc.env.plant;
      ps.seed = static_cast<std::uint64_t>(s);
      rc.grid.plants.push_back(ps);
    }
    for (size_t i = 0; i < cells.size(); i += 3)
      rc.grid.fruit_cells.push_back(Vec3(cells[i], cells[i + 1], cells[i + 2]));
    for (size_t i = 0; i < configs.size(); i += kArmJoints) {
      std::array<double, kArmJoints> q{};
      for (int j = 0; j < kArmJoints; ++j) q[j] = configs[i + j] * kDeg;
      rc.grid.initial_configs.push_back(q);
    }
    if (rc.grid.initial_configs.empty()) {
      // default: a handful of mid-range poses
      for (double w : {-0.3, 0.0, 0.3}) {
        std::array<double, kArmJoints> q{};
        q[0] = w;
        q[1] = 0.25;
        rc.grid.initial_configs.push_back(q);
      }
    }
  }

  {
    SectionReader b(cfg, "bridge");
    rc.bridge_host = b.str("host", rc.bridge_host);
    rc.bridge_port = static_cast<int>(b.integer("port", rc.bridge_port));
    rc.bridge_rate_hz = b.real("rate_hz", rc.bridge_rate_hz);
    rc.mask_mode = b.str("mask_mode", rc.mask_mode);
    b.finish();
    if (rc.mask_mode != "privileged" && rc.mask_mode != "zeroed")
      throw ConfigError("[bridge] mask_mode must be privileged or zeroed");
  }

  // image branch follows the camera
  rc.arch.image_h = rc.env.camera.height;
  rc.arch.image_w = rc.env.camera.width;
  rc.arch.image_ch = Frame::kChannels;
  rc.arch.action_dim = kArmJoints;

  rc.env.validate();
  rc.ppo.validate();
  rc.arch.validate();
  return rc;
}

RunConfig RunConfig::from_file(const std::string& path) {
  return from_config(Config::parse_file(path));
}

TrainOptions RunConfig::train_options() const {
  TrainOptions opt;
  opt.ppo = ppo;
  opt.arch = arch;
  opt.initial_log_std = initial_log_std;
  opt.num_envs = num_envs;
  opt.max_env_steps = max_env_steps;
  opt.seed = master_seed;
  opt.out_dir = out_dir;
  opt.eval_every_updates = eval_every_updates;
  opt.eval_episodes = eval_episodes;
  opt.stop_success = stop_success;
  opt.eval_zero_mask = eval_zero_mask;
  opt.checkpoint_every_updates = checkpoint_every_updates;
  return opt;
}

}  // namespace canopy
