#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "canopy/agent.hpp"
#include "canopy/env.hpp"
#include "canopy/nn.hpp"
#include "canopy/rng.hpp"

namespace canopy {

struct PPOConfig {
  int rollouts = 32;        // steps collected per env per update
  int learning_epochs = 5;
  int mini_batches = 32;
  double gamma = 0.99;
  double lam = 0.95;
  double learning_rate = 3e-4;
  double kl_threshold = 0.008;
  double clip_epsilon = 0.2;
  double entropy_coef = 0.0;
  double value_coef = 1.0;
  double max_grad_norm = 1.0;  // 0 disables clipping
  double lr_min = 1e-6;
  double lr_max = 1e-2;

  void validate() const;
};

struct ActionSample {
  std::vector<double> action;  // clipped to [-1, 1], what the env executes
  std::vector<double> raw;     // pre-clip Gaussian draw (density is defined here)
  double logprob = 0.0;
};

// Gaussian draw per component; log-prob is of the pre-clip sample.
ActionSample sample_action(const std::vector<double>& mean,
                           const std::vector<double>& log_std, Rng& rng);

double discounted_return(const std::vector<double>& rewards, double gamma);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// delta_t = r_t + gamma*V_{t+1}*(1-done_t) - V_t
// A_t     = delta_t + gamma*lambda*(1-done_t)*A_{t+1}
// values must carry one extra bootstrap entry.
GaeResult gae(const std::vector<double>& rewards,
              const std::vector<double>& values,
              const std::vector<std::uint8_t>& dones, double gamma,
              double lambda);

// kl > 2t -> lr/1.5 ; kl < t/2 -> lr*1.5 ; else unchanged; clipped to [lo, hi].
double kl_adaptive_lr(double lr, double observed_kl, double threshold,
                      double lo = 1e-6, double hi = 1e-2);

struct RolloutBuffer {
  int steps = 0;
  int envs = 0;
  size_t obs_dim = 0;
  int action_dim = 0;
  std::vector<float> obs;           // [step][env][obs_dim], standardized
  std::vector<double> actions_raw;  // [step][env][action_dim]
  std::vector<double> logprobs;     // [step][env]
  std::vector<double> rewards;
  std::vector<double> values;       // natural (unstandardized) space
  std::vector<std::uint8_t> dones;
  std::vector<double> bootstrap;    // [env], value after the last step

  void resize(int steps_, int envs_, size_t obs_dim_, int action_dim_);
  size_t flat(int t, int e) const { return static_cast<size_t>(t) * envs + e; }
  float* obs_at(int t, int e) { return obs.data() + flat(t, e) * obs_dim; }
  const float* obs_at(int t, int e) const {
    return obs.data() + flat(t, e) * obs_dim;
  }
  double* action_at(int t, int e) {
    return actions_raw.data() + flat(t, e) * action_dim;
  }
  const double* action_at(int t, int e) const {
    return actions_raw.data() + flat(t, e) * action_dim;
  }
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
  double lr_after = 0.0;
  bool aborted = false;
  std::string message;
};

// One PPO update over the buffer: learning_epochs passes of mini_batches
// shards, advantages standardized per minibatch, clipped surrogate + value
// MSE (+ entropy bonus), Adam steps, KL-adaptive learning rate per epoch.
// On a non-finite loss the parameters are restored and `aborted` is set.
UpdateStats ppo_update(const RolloutBuffer& buffer, Agent& agent, Adam& adam,
                       double& lr, const PPOConfig& cfg, Rng& rng);

struct TrainOptions {
  PPOConfig ppo;
  PolicyArch arch;
  double initial_log_std = 0.0;
  int num_envs = 16;
  long long max_env_steps = 2000000;
  std::uint64_t seed = 0;
  std::string out_dir;            // metrics.csv and checkpoints land here
  int eval_every_updates = 25;    // 0 disables in-training evaluation
  int eval_episodes = 40;
  double stop_success = -1.0;     // early-stop threshold on eval success rate
  bool eval_zero_mask = false;
  int checkpoint_every_updates = 0;
  bool quiet = false;
};

struct TrainResult {
  long long env_steps = 0;
  int updates = 0;
  double final_eval_success = -1.0;
  std::string checkpoint_path;
  std::string metrics_path;
  bool aborted = false;
};

TrainResult train(const EnvConfig& env_cfg, const TrainOptions& opt);

// One deterministic (or optionally stochastic) episode with a frozen agent.
struct EpisodeOutcome {
  bool success = false;
  int steps = 0;
  int steps_to_success = -1;
  double final_intersection = 0.0;
  double total_reward = 0.0;
  DoneReason reason = DoneReason::none;
  EpisodeSetup setup;
};

EpisodeOutcome run_episode(Env& env, const Agent& agent, std::uint64_t seed,
                           bool zeroed_mask, Rng* action_rng = nullptr);

}  // namespace canopy
