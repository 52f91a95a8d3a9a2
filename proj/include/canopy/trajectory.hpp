#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "canopy/env.hpp"

namespace canopy {

// One control step of an episode as logged to JSON-lines.
struct TrajectoryStep {
  int t = 0;
  std::array<double, kArmJoints> action{};  // clipped action the env executed
  RewardBreakdown reward;
  long long occ_total = 0;
  long long occ_occluded = 0;
  long long occ_visible = 0;
  std::array<double, kArmJoints> tau{};  // per-joint |tau| peak this step
  bool done = false;
};

struct Trajectory {
  std::uint64_t episode_seed = 0;
  std::string config_text;  // the run config, embedded for replay
  std::vector<TrajectoryStep> steps;

  void write(const std::string& path) const;
  static Trajectory read(const std::string& path);
};

// Re-runs the episode from (config, seed, logged actions) and counts fields
// that fail exact equality.
struct ReplayDiff {
  int steps_compared = 0;
  int mismatches = 0;
  std::vector<std::string> details;  // first few mismatch descriptions
};

ReplayDiff replay_trajectory(const Trajectory& traj);

// Runs one episode with the given per-step action source and records it.
Trajectory record_episode(Env& env, std::uint64_t episode_seed,
                          const std::string& config_text,
                          const std::vector<std::array<double, kArmJoints>>&
                              scripted_actions);

}  // namespace canopy
