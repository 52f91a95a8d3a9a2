#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "canopy/agent.hpp"
#include "canopy/env.hpp"
#include "canopy/ppo.hpp"

namespace canopy {

// Structured sweep: plants x fruit lattice cells x initial configurations
// x repeats. Cells are labelled A, B, C, ... in lattice order.
struct EvalGrid {
  std::vector<PlantSpec> plants;
  std::vector<Vec3> fruit_cells;
  std::vector<std::array<double, kArmJoints>> initial_configs;
  int repeats = 1;
};

struct TrialRecord {
  int trial_id = 0;
  int plant_id = 0;
  std::string fruit_cell;
  int config_id = 0;
  std::uint64_t seed = 0;
  bool success = false;
  int steps = 0;  // steps to success, or steps executed when failed
  double final_occlusion_fraction = 0.0;
};

struct EvalReport {
  std::vector<TrialRecord> trials;
  double success_rate = 0.0;
  int steps_min = 0;
  double steps_mean = 0.0;
  int steps_max = 0;
  // heatmap[plant][cell] = success count over configs x repeats
  std::vector<std::vector<int>> heatmap;

  void finalize();  // recompute aggregates from trials
};

// Fixed-seed randomized episodes with the deterministic (mean) policy;
// `stochastic` switches to sampled actions.
EvalReport run_randomized_eval(const EnvConfig& cfg, const Agent& agent,
                               int episodes, std::uint64_t seed,
                               bool zeroed_mask, bool stochastic = false);

// Exhaustive Cartesian sweep over the grid. Throws (naming the cell) when a
// designated initial pose self-collides.
EvalReport run_grid_eval(const EnvConfig& cfg, const Agent& agent,
                         const EvalGrid& grid, std::uint64_t seed,
                         bool zeroed_mask);

// trials as CSV, aggregates + heatmap as JSON; stable column order
void write_report(const EvalReport& report, const std::string& csv_path,
                  const std::string& json_path);

std::string cell_name(int index);

}  // namespace canopy
