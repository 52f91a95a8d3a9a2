#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "canopy/agent.hpp"
#include "canopy/bridge.hpp"
#include "canopy/evalharness.hpp"
#include "canopy/ppo.hpp"
#include "canopy/runconfig.hpp"
#include "canopy/trajectory.hpp"

namespace {

using namespace canopy;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  long long seed = -1;
  std::string out_dir;
};

RunConfig load_run_config(const CommonArgs& args) {
  Config cfg = Config::parse_file(args.config_path);
  for (const std::string& ov : args.overrides) cfg.apply_override(ov);
  if (args.seed >= 0)
    cfg.set("run", "seed", ConfigValue(static_cast<long long>(args.seed)));
  if (!args.out_dir.empty())
    cfg.set("run", "out_dir", ConfigValue(args.out_dir));
  return RunConfig::from_config(cfg);
}

int cmd_train(const CommonArgs& args, int envs_override,
              long long steps_override) {
  RunConfig rc = load_run_config(args);
  TrainOptions opt = rc.train_options();
  if (envs_override > 0) opt.num_envs = envs_override;
  if (steps_override > 0) opt.max_env_steps = steps_override;
  TrainResult res = train(rc.env, opt);
  std::printf("trained %lld env steps over %d updates\n", res.env_steps,
              res.updates);
  std::printf("checkpoint: %s\nmetrics: %s\n", res.checkpoint_path.c_str(),
              res.metrics_path.c_str());
  if (res.final_eval_success >= 0.0)
    std::printf("final eval success: %.3f\n", res.final_eval_success);
  return res.aborted ? 1 : 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint,
             const std::string& mode, const std::string& mask_mode,
             int episodes_override) {
  RunConfig rc = load_run_config(args);
  Agent agent = Agent::load(checkpoint);
  bool zeroed = (mask_mode.empty() ? rc.mask_mode : mask_mode) == "zeroed";

  EvalReport report;
  if (mode == "randomized") {
    int episodes =
        episodes_override > 0 ? episodes_override : rc.randomized_episodes;
    report = run_randomized_eval(rc.env, agent, episodes, rc.master_seed,
                                 zeroed);
  } else if (mode == "grid") {
    report = run_grid_eval(rc.env, agent, rc.grid, rc.master_seed, zeroed);
  } else {
    std::fprintf(stderr, "eval: mode must be randomized or grid\n");
    return 2;
  }
  std::filesystem::create_directories(rc.out_dir);
  std::string csv = rc.out_dir + "/eval_trials.csv";
  std::string json = rc.out_dir + "/eval_report.json";
  write_report(report, csv, json);
  std::printf("episodes: %zu  success_rate: %.4f  steps mean: %.1f\n",
              report.trials.size(), report.success_rate, report.steps_mean);
  std::printf("wrote %s and %s\n", csv.c_str(), json.c_str());
  return 0;
}

int cmd_rollout(const CommonArgs& args, const std::string& checkpoint,
                const std::string& out_path, const std::string& mask_mode,
                bool dump_frames) {
  RunConfig rc = load_run_config(args);
  Agent agent = Agent::load(checkpoint);
  bool zeroed = (mask_mode.empty() ? rc.mask_mode : mask_mode) == "zeroed";

  Env env(rc.env);
  std::uint64_t episode_seed = rc.master_seed;
  Trajectory traj;
  traj.episode_seed = episode_seed;
  traj.config_text = rc.raw.serialize();

  auto [obs, setup] = env.reset(episode_seed);
  std::filesystem::path frames_dir;
  if (dump_frames) {
    frames_dir = std::filesystem::path(rc.out_dir) / "frames";
    std::filesystem::create_directories(frames_dir);
    write_ppm(obs.frame, (frames_dir / "frame_000000.ppm").string());
  }
  while (!env.done()) {
    std::array<double, kArmJoints> action = agent.act_mean(obs, zeroed);
    StepResult r = env.step(action);
    TrajectoryStep s;
    s.t = env.steps() - 1;
    s.action = action;
    s.reward = r.reward;
    s.occ_total = r.info.occ.fruit_pixels_total;
    s.occ_occluded = r.info.occ.occluded_pixels;
    s.occ_visible = r.info.occ.visible_pixels;
    s.tau = r.info.tau_abs_max;
    s.done = r.done;
    traj.steps.push_back(s);
    obs = r.obs;
    if (dump_frames) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%06d.ppm", env.steps());
      write_ppm(obs.frame, (frames_dir / name).string());
    }
  }
  std::filesystem::create_directories(
      std::filesystem::path(out_path).parent_path().empty()
          ? "."
          : std::filesystem::path(out_path).parent_path().string());
  traj.write(out_path);
  std::printf("rollout: %zu steps -> %s\n", traj.steps.size(),
              out_path.c_str());
  return 0;
}

int cmd_replay(const std::string& trajectory_path) {
  Trajectory traj = Trajectory::read(trajectory_path);
  ReplayDiff diff = replay_trajectory(traj);
  std::printf("replayed %d steps, %d mismatches\n", diff.steps_compared,
              diff.mismatches);
  for (const std::string& d : diff.details)
    std::printf("  %s\n", d.c_str());
  return diff.mismatches == 0 ? 0 : 1;
}

int cmd_serve(const CommonArgs& args, const std::string& addr, double rate_hz,
              int episodes) {
  RunConfig rc = load_run_config(args);
  std::string host = rc.bridge_host;
  int port = rc.bridge_port;
  if (!addr.empty()) {
    size_t colon = addr.rfind(':');
    if (colon == std::string::npos) {
      std::fprintf(stderr, "serve: --addr must be host:port\n");
      return 2;
    }
    host = addr.substr(0, colon);
    port = std::stoi(addr.substr(colon + 1));
  }
  Env env(rc.env);
  ServeOptions opt;
  opt.rate_hz = rate_hz >= 0 ? rate_hz : rc.bridge_rate_hz;
  opt.max_episodes = episodes;
  opt.max_sessions = 0;
  opt.seed = rc.master_seed;
  opt.log_to_stderr = true;
  int bound = 0;
  std::printf("serving on %s:%d at %.2f Hz\n", host.c_str(), port, opt.rate_hz);
  SessionLog log = serve_env(host, port, env, opt, &bound);
  std::printf("served %d episodes, %d ticks, %d missed deadlines\n",
              log.episodes, log.ticks, log.missed_deadlines);
  std::filesystem::create_directories(rc.out_dir);
  std::string log_path = rc.out_dir + "/session_log.jsonl";
  std::ofstream lf(log_path);
  for (size_t i = 0; i < log.rewards.size(); ++i) {
    lf << "{\"tick\":" << i << ",\"reward\":" << log.rewards[i] << "}\n";
  }
  std::printf("session log: %s\n", log_path.c_str());
  return 0;
}

int cmd_client(const std::string& addr, const std::string& checkpoint,
               const std::string& mask_mode, int episodes) {
  size_t colon = addr.rfind(':');
  if (colon == std::string::npos) {
    std::fprintf(stderr, "client: --addr must be host:port\n");
    return 2;
  }
  Agent agent = Agent::load(checkpoint);
  ClientOptions opt;
  opt.zeroed_mask = mask_mode == "zeroed";
  opt.max_episodes = episodes;
  ClientResult res = run_policy_client(addr.substr(0, colon),
                                       std::stoi(addr.substr(colon + 1)),
                                       agent, opt);
  std::printf("client: %d episodes, %zu actions\n", res.episodes,
              res.actions.size());
  for (double r : res.episode_rewards)
    std::printf("  episode reward %.3f\n", r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"occlusion-aware plant manipulation: train, evaluate, replay, bridge"};
  app.require_subcommand(1);

  CommonArgs common;
  auto add_common = [&](CLI::App* sub, bool need_config = true) {
    auto* opt = sub->add_option("--config", common.config_path,
                                "run configuration file");
    if (need_config) opt->required();
    sub->add_option("--set", common.overrides,
                    "override section.key=value (repeatable)");
    sub->add_option("--seed", common.seed, "master seed override");
    sub->add_option("--out", common.out_dir, "output directory override");
  };

  // train
  auto* train_cmd = app.add_subcommand("train", "PPO training run");
  add_common(train_cmd);
  int envs_override = 0;
  long long steps_override = 0;
  train_cmd->add_option("--envs", envs_override, "parallel environments");
  train_cmd->add_option("--steps", steps_override, "max environment steps");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "policy evaluation");
  add_common(eval_cmd);
  std::string checkpoint, mode = "randomized", mask_mode;
  int episodes_override = 0;
  eval_cmd->add_option("--checkpoint", checkpoint, "agent checkpoint")->required();
  eval_cmd->add_option("--mode", mode, "randomized|grid");
  eval_cmd->add_option("--mask-mode", mask_mode, "privileged|zeroed");
  eval_cmd->add_option("--episodes", episodes_override, "episode count");

  // rollout
  auto* roll_cmd = app.add_subcommand("rollout", "single recorded episode");
  add_common(roll_cmd);
  std::string roll_checkpoint, roll_out = "trajectory.jsonl", roll_mask;
  bool dump_frames = false;
  roll_cmd->add_option("--checkpoint", roll_checkpoint, "agent checkpoint")
      ->required();
  roll_cmd->add_option("--trajectory", roll_out, "output JSON-lines path");
  roll_cmd->add_option("--mask-mode", roll_mask, "privileged|zeroed");
  roll_cmd->add_flag("--dump-frames", dump_frames, "write PPM frames");

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "recompute a trajectory");
  std::string traj_path;
  replay_cmd->add_option("trajectory", traj_path, "trajectory JSON-lines file")
      ->required();

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "environment server");
  add_common(serve_cmd);
  std::string addr;
  double rate_hz = -1.0;
  int serve_episodes = 0;
  serve_cmd->add_option("--addr", addr, "host:port");
  serve_cmd->add_option("--rate-hz", rate_hz, "tick rate (0 = lockstep)");
  serve_cmd->add_option("--episodes", serve_episodes, "stop after N episodes");

  // client
  auto* client_cmd = app.add_subcommand("client", "policy client");
  std::string client_addr = "127.0.0.1:7070", client_checkpoint,
              client_mask = "privileged";
  int client_episodes = 1;
  client_cmd->add_option("--addr", client_addr, "host:port");
  client_cmd->add_option("--checkpoint", client_checkpoint, "agent checkpoint")
      ->required();
  client_cmd->add_option("--mask-mode", client_mask, "privileged|zeroed");
  client_cmd->add_option("--episodes", client_episodes, "episodes to run");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(train_cmd))
      return cmd_train(common, envs_override, steps_override);
    if (app.got_subcommand(eval_cmd))
      return cmd_eval(common, checkpoint, mode, mask_mode, episodes_override);
    if (app.got_subcommand(roll_cmd))
      return cmd_rollout(common, roll_checkpoint, roll_out, roll_mask,
                         dump_frames);
    if (app.got_subcommand(replay_cmd)) return cmd_replay(traj_path);
    if (app.got_subcommand(serve_cmd))
      return cmd_serve(common, addr, rate_hz, serve_episodes);
    if (app.got_subcommand(client_cmd))
      return cmd_client(client_addr, client_checkpoint, client_mask,
                        client_episodes);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
