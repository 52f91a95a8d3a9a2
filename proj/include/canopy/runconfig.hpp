#pragma once

#include <cstdint>
#include <string>

#include "canopy/config.hpp"
#include "canopy/env.hpp"
#include "canopy/evalharness.hpp"
#include "canopy/nn.hpp"
#include "canopy/ppo.hpp"

namespace canopy {

// Everything a run needs, bound from the sectioned config file. Unknown keys
// anywhere are a validation error naming the key.
struct RunConfig {
  std::uint64_t master_seed = 0;
  std::string out_dir = "out";

  EnvConfig env;
  PPOConfig ppo;
  PolicyArch arch;
  double initial_log_std = 0.0;

  // training driver
  int num_envs = 8;
  long long max_env_steps = 500000;
  int eval_every_updates = 25;
  int eval_episodes = 40;
  double stop_success = -1.0;
  bool eval_zero_mask = false;
  int checkpoint_every_updates = 0;

  // evaluation protocols
  int randomized_episodes = 200;
  EvalGrid grid;

  // bridge
  std::string bridge_host = "127.0.0.1";
  int bridge_port = 7070;
  double bridge_rate_hz = 1.0;
  std::string mask_mode = "privileged";  // or "zeroed"

  Config raw;  // the parsed file (plus overrides), for provenance

  static RunConfig from_config(const Config& cfg);
  static RunConfig from_file(const std::string& path);

  TrainOptions train_options() const;
};

}  // namespace canopy
