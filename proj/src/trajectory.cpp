#include "canopy/trajectory.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "canopy/runconfig.hpp"

namespace canopy {

using nlohmann::json;

namespace {

json step_to_json(const TrajectoryStep& s) {
  return json{{"type", "step"},
              {"t", s.t},
              {"action", s.action},
              {"reward",
               {{"r_sc", s.reward.r_sc},
                {"r_occ", s.reward.r_occ},
                {"r_fv", s.reward.r_fv},
                {"r_sus", s.reward.r_sus},
                {"r_aad", s.reward.r_aad},
                {"total", s.reward.total}}},
              {"occ",
               {{"total", s.occ_total},
                {"occluded", s.occ_occluded},
                {"visible", s.occ_visible}}},
              {"tau", s.tau},
              {"done", s.done}};
}

TrajectoryStep step_from_json(const json& j) {
  TrajectoryStep s;
  s.t = j.at("t").get<int>();
  auto act = j.at("action");
  for (int i = 0; i < kArmJoints; ++i) s.action[i] = act.at(i).get<double>();
  const auto& r = j.at("reward");
  s.reward.r_sc = r.at("r_sc").get<double>();
  s.reward.r_occ = r.at("r_occ").get<double>();
  s.reward.r_fv = r.at("r_fv").get<double>();
  s.reward.r_sus = r.at("r_sus").get<double>();
  s.reward.r_aad = r.at("r_aad").get<double>();
  s.reward.total = r.at("total").get<double>();
  const auto& o = j.at("occ");
  s.occ_total = o.at("total").get<long long>();
  s.occ_occluded = o.at("occluded").get<long long>();
  s.occ_visible = o.at("visible").get<long long>();
  auto tau = j.at("tau");
  for (int i = 0; i < kArmJoints; ++i) s.tau[i] = tau.at(i).get<double>();
  s.done = j.at("done").get<bool>();
  return s;
}

}  // namespace

void Trajectory::write(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("trajectory: cannot open " + path);
  json header{{"type", "header"},
              {"episode_seed", episode_seed},
              {"config", config_text}};
  f << header.dump() << "\n";
  for (const TrajectoryStep& s : steps) f << step_to_json(s).dump() << "\n";
  if (!f) throw std::runtime_error("trajectory: write failed for " + path);
}

Trajectory Trajectory::read(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("trajectory: cannot open " + path);
  Trajectory traj;
  std::string line;
  bool have_header = false;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw std::runtime_error("trajectory: bad JSON at line " +
                               std::to_string(lineno));
    std::string type = j.value("type", "");
    if (type == "header") {
      traj.episode_seed = j.at("episode_seed").get<std::uint64_t>();
      traj.config_text = j.at("config").get<std::string>();
      have_header = true;
    } else if (type == "step") {
      traj.steps.push_back(step_from_json(j));
    }
  }
  if (!have_header)
    throw std::runtime_error("trajectory: missing header line in " + path);
  return traj;
}

Trajectory record_episode(
    Env& env, std::uint64_t episode_seed, const std::string& config_text,
    const std::vector<std::array<double, kArmJoints>>& scripted_actions) {
  Trajectory traj;
  traj.episode_seed = episode_seed;
  traj.config_text = config_text;
  env.reset(episode_seed);
  for (const auto& action : scripted_actions) {
    if (env.done()) break;
    StepResult r = env.step(action);
    TrajectoryStep s;
    s.t = env.steps() - 1;
    for (int i = 0; i < kArmJoints; ++i)
      s.action[i] = std::clamp(action[i], -1.0, 1.0);
    s.reward = r.reward;
    s.occ_total = r.info.occ.fruit_pixels_total;
    s.occ_occluded = r.info.occ.occluded_pixels;
    s.occ_visible = r.info.occ.visible_pixels;
    s.tau = r.info.tau_abs_max;
    s.done = r.done;
    traj.steps.push_back(s);
  }
  return traj;
}

ReplayDiff replay_trajectory(const Trajectory& traj) {
  RunConfig rc = RunConfig::from_config(Config::parse(traj.config_text));
  Env env(rc.env);
  env.reset(traj.episode_seed);

  ReplayDiff diff;
  auto note = [&](const std::string& what, int t) {
    ++diff.mismatches;
    if (diff.details.size() < 16)
      diff.details.push_back("step " + std::to_string(t) + ": " + what);
  };

  for (const TrajectoryStep& s : traj.steps) {
    if (env.done()) {
      note("episode ended early on replay", s.t);
      break;
    }
    StepResult r = env.step(s.action);
    ++diff.steps_compared;
    if (r.reward.total != s.reward.total) note("reward.total differs", s.t);
    if (r.reward.r_sc != s.reward.r_sc) note("reward.r_sc differs", s.t);
    if (r.reward.r_occ != s.reward.r_occ) note("reward.r_occ differs", s.t);
    if (r.reward.r_fv != s.reward.r_fv) note("reward.r_fv differs", s.t);
    if (r.reward.r_sus != s.reward.r_sus) note("reward.r_sus differs", s.t);
    if (r.reward.r_aad != s.reward.r_aad) note("reward.r_aad differs", s.t);
    if (r.info.occ.fruit_pixels_total != s.occ_total)
      note("occ.total differs", s.t);
    if (r.info.occ.occluded_pixels != s.occ_occluded)
      note("occ.occluded differs", s.t);
    for (int i = 0; i < kArmJoints; ++i)
      if (r.info.tau_abs_max[i] != s.tau[i]) {
        note("tau differs at joint " + std::to_string(i), s.t);
        break;
      }
    if (r.done != s.done) note("done flag differs", s.t);
  }
  return diff;
}

}  // namespace canopy
