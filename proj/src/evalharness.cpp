#include "canopy/evalharness.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <stdexcept>

namespace canopy {

using nlohmann::json;

std::string cell_name(int index) {
  std::string name;
  name.push_back(static_cast<char>('A' + index % 26));
  if (index >= 26) name += std::to_string(index / 26);
  return name;
}

void EvalReport::finalize() {
  if (trials.empty()) {
    success_rate = 0.0;
    steps_min = steps_max = 0;
    steps_mean = 0.0;
    return;
  }
  long long wins = 0;
  long long steps_sum = 0;
  steps_min = std::numeric_limits<int>::max();
  steps_max = 0;
  for (const TrialRecord& t : trials) {
    wins += t.success ? 1 : 0;
    steps_sum += t.steps;
    steps_min = std::min(steps_min, t.steps);
    steps_max = std::max(steps_max, t.steps);
  }
  success_rate = static_cast<double>(wins) / trials.size();
  steps_mean = static_cast<double>(steps_sum) / trials.size();
}

EvalReport run_randomized_eval(const EnvConfig& cfg, const Agent& agent,
                               int episodes, std::uint64_t seed,
                               bool zeroed_mask, bool stochastic) {
  if (episodes < 1)
    throw std::invalid_argument("eval: episodes must be >= 1");
  EvalReport report;
  Env env(cfg);
  Rng action_rng(Rng::mix(seed ^ 0xac710eull));
  for (int ep = 0; ep < episodes; ++ep) {
    std::uint64_t episode_seed = Rng::mix(seed + 0x9e3779b97f4a7c15ull * ep);
    EpisodeOutcome oc = run_episode(env, agent, episode_seed, zeroed_mask,
                                    stochastic ? &action_rng : nullptr);
    TrialRecord t;
    t.trial_id = ep;
    t.plant_id = 0;
    t.fruit_cell = "-";
    t.config_id = 0;
    t.seed = episode_seed;
    t.success = oc.success;
    t.steps = oc.success ? oc.steps_to_success : oc.steps;
    t.final_occlusion_fraction = oc.final_intersection;
    report.trials.push_back(t);
  }
  report.finalize();
  return report;
}

EvalReport run_grid_eval(const EnvConfig& cfg, const Agent& agent,
                         const EvalGrid& grid, std::uint64_t seed,
                         bool zeroed_mask) {
  if (grid.plants.empty() || grid.fruit_cells.empty() ||
      grid.initial_configs.empty() || grid.repeats < 1)
    throw std::invalid_argument("eval grid: empty dimension");

  // pre-check the designated poses
  for (size_t c = 0; c < grid.initial_configs.size(); ++c) {
    if (check_self_collision(cfg.arm, grid.initial_configs[c]))
      throw std::runtime_error("eval grid: initial configuration " +
                               std::to_string(c) + " self-collides");
  }

  EvalReport report;
  report.heatmap.assign(grid.plants.size(),
                        std::vector<int>(grid.fruit_cells.size(), 0));
  int trial_id = 0;
  for (size_t p = 0; p < grid.plants.size(); ++p) {
    for (size_t c = 0; c < grid.fruit_cells.size(); ++c) {
      for (size_t q = 0; q < grid.initial_configs.size(); ++q) {
        for (int rep = 0; rep < grid.repeats; ++rep) {
          EnvConfig trial_cfg = cfg;
          trial_cfg.plant = grid.plants[p];
          trial_cfg.fruit_lattice_mode = true;
          trial_cfg.fruit_lattice = {grid.fruit_cells[c]};
          for (int i = 0; i < kArmJoints; ++i) {
            trial_cfg.init_q_lo[i] = grid.initial_configs[q][i];
            trial_cfg.init_q_hi[i] = grid.initial_configs[q][i];
          }
          // the designated pose must also sit inside the workspace gate
          Vec3 ee = forward_kinematics(cfg.arm, grid.initial_configs[q])
                        .ee_position;
          for (int d = 0; d < 3; ++d) {
            trial_cfg.workspace_lo[d] =
                std::min(trial_cfg.workspace_lo[d], ee[d] - 1e-9);
            trial_cfg.workspace_hi[d] =
                std::max(trial_cfg.workspace_hi[d], ee[d] + 1e-9);
          }

          Env env(trial_cfg);
          std::uint64_t episode_seed =
              Rng::mix(seed ^ (0x67726964ull + trial_id));
          EpisodeOutcome oc = run_episode(env, agent, episode_seed, zeroed_mask);

          TrialRecord t;
          t.trial_id = trial_id++;
          t.plant_id = static_cast<int>(p);
          t.fruit_cell = cell_name(static_cast<int>(c));
          t.config_id = static_cast<int>(q);
          t.seed = episode_seed;
          t.success = oc.success;
          t.steps = oc.success ? oc.steps_to_success : oc.steps;
          t.final_occlusion_fraction = oc.final_intersection;
          report.trials.push_back(t);
          if (oc.success) ++report.heatmap[p][c];
        }
      }
    }
  }
  report.finalize();
  return report;
}

void write_report(const EvalReport& report, const std::string& csv_path,
                  const std::string& json_path) {
  {
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("eval: cannot write " + csv_path);
    csv << "trial_id,plant_id,fruit_cell,config_id,seed,success,steps,"
           "final_occlusion_fraction\n";
    for (const TrialRecord& t : report.trials) {
      csv << t.trial_id << "," << t.plant_id << "," << t.fruit_cell << ","
          << t.config_id << "," << t.seed << "," << (t.success ? 1 : 0) << ","
          << t.steps << "," << t.final_occlusion_fraction << "\n";
    }
    if (!csv) throw std::runtime_error("eval: write failed for " + csv_path);
  }
  {
    json j{{"success_rate", report.success_rate},
           {"steps",
            {{"min", report.steps_min},
             {"mean", report.steps_mean},
             {"max", report.steps_max}}},
           {"heatmap", report.heatmap}};
    std::ofstream jf(json_path);
    if (!jf) throw std::runtime_error("eval: cannot write " + json_path);
    jf << j.dump(2) << "\n";
    if (!jf) throw std::runtime_error("eval: write failed for " + json_path);
  }
}

}  // namespace canopy
