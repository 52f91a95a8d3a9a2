#include "canopy/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace canopy {

void PPOConfig::validate() const {
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("ppo: gamma must be in [0, 1]");
  if (lam < 0.0 || lam > 1.0)
    throw std::invalid_argument("ppo: lambda must be in [0, 1]");
  if (learning_rate <= 0.0)
    throw std::invalid_argument("ppo: learning_rate must be > 0");
  if (rollouts < 1 || learning_epochs < 1 || mini_batches < 1)
    throw std::invalid_argument("ppo: counts must be >= 1");
  if (clip_epsilon <= 0.0)
    throw std::invalid_argument("ppo: clip_epsilon must be > 0");
}

ActionSample sample_action(const std::vector<double>& mean,
                           const std::vector<double>& log_std, Rng& rng) {
  ActionSample s;
  s.raw.resize(mean.size());
  s.action.resize(mean.size());
  for (size_t i = 0; i < mean.size(); ++i) {
    double sigma = std::exp(log_std[i]);
    s.raw[i] = mean[i] + sigma * rng.normal();
    s.action[i] = std::clamp(s.raw[i], -1.0, 1.0);
  }
  s.logprob = PolicyNet::gaussian_logprob(s.raw, mean, log_std);
  return s;
}

double discounted_return(const std::vector<double>& rewards, double gamma) {
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("discounted_return: gamma must be in [0, 1]");
  double acc = 0.0;
  for (auto it = rewards.rbegin(); it != rewards.rend(); ++it)
    acc = *it + gamma * acc;
  return acc;
}

GaeResult gae(const std::vector<double>& rewards,
              const std::vector<double>& values,
              const std::vector<std::uint8_t>& dones, double gamma,
              double lambda) {
  const size_t n = rewards.size();
  if (values.size() != n + 1)
    throw std::invalid_argument("gae: values must have rewards.size()+1 entries");
  if (dones.size() != n)
    throw std::invalid_argument("gae: dones length mismatch");
  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double acc = 0.0;
  for (size_t i = n; i-- > 0;) {
    double not_done = dones[i] ? 0.0 : 1.0;
    double delta = rewards[i] + gamma * values[i + 1] * not_done - values[i];
    acc = delta + gamma * lambda * not_done * acc;
    out.advantages[i] = acc;
    out.returns[i] = acc + values[i];
  }
  return out;
}

double kl_adaptive_lr(double lr, double observed_kl, double threshold,
                      double lo, double hi) {
  if (observed_kl > 2.0 * threshold)
    lr /= 1.5;
  else if (observed_kl < 0.5 * threshold)
    lr *= 1.5;
  return std::clamp(lr, lo, hi);
}

void RolloutBuffer::resize(int steps_, int envs_, size_t obs_dim_,
                           int action_dim_) {
  steps = steps_;
  envs = envs_;
  obs_dim = obs_dim_;
  action_dim = action_dim_;
  size_t n = static_cast<size_t>(steps) * envs;
  obs.assign(n * obs_dim, 0.0f);
  actions_raw.assign(n * action_dim, 0.0);
  logprobs.assign(n, 0.0);
  rewards.assign(n, 0.0);
  values.assign(n, 0.0);
  dones.assign(n, 0);
  bootstrap.assign(envs, 0.0);
}

UpdateStats ppo_update(const RolloutBuffer& buffer, Agent& agent, Adam& adam,
                       double& lr, const PPOConfig& cfg, Rng& rng) {
  cfg.validate();
  UpdateStats stats;
  const int batch = buffer.steps * buffer.envs;
  if (batch == 0) throw std::invalid_argument("ppo_update: empty buffer");
  const int action_dim = buffer.action_dim;

  // advantages/returns per environment column
  std::vector<double> adv(batch), ret(batch);
  {
    std::vector<double> r(buffer.steps), v(buffer.steps + 1);
    std::vector<std::uint8_t> d(buffer.steps);
    for (int e = 0; e < buffer.envs; ++e) {
      for (int t = 0; t < buffer.steps; ++t) {
        size_t i = buffer.flat(t, e);
        r[t] = buffer.rewards[i];
        v[t] = buffer.values[i];
        d[t] = buffer.dones[i];
      }
      v[buffer.steps] = buffer.bootstrap[e];
      GaeResult g = gae(r, v, d, cfg.gamma, cfg.lam);
      for (int t = 0; t < buffer.steps; ++t) {
        adv[buffer.flat(t, e)] = g.advantages[t];
        ret[buffer.flat(t, e)] = g.returns[t];
      }
    }
  }

  // value targets in standardized space, scaler refreshed with this batch
  for (int i = 0; i < batch; ++i) agent.value_scaler().update(&ret[i]);
  std::vector<double> vtarget(batch);
  for (int i = 0; i < batch; ++i)
    vtarget[i] = agent.value_scaler().apply_one(ret[i], 0);

  std::vector<double> params_backup = agent.net().params();
  std::vector<int> order(batch);
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> grad(agent.net().param_count(), 0.0);
  PolicyNet::Workspace ws;
  std::vector<double> action(action_dim), dmean(action_dim),
      dlog_std(action_dim);

  double kl_sum = 0.0, clip_sum = 0.0, ploss_sum = 0.0, vloss_sum = 0.0,
         ent_sum = 0.0;
  long long kl_count = 0, sample_count = 0;
  const int mb_size = std::max(1, batch / cfg.mini_batches);

  for (int epoch = 0; epoch < cfg.learning_epochs; ++epoch) {
    // Fisher-Yates with the update stream
    for (int i = batch - 1; i > 0; --i) {
      int j = rng.uniform_int(0, i);
      std::swap(order[i], order[j]);
    }
    double epoch_kl = 0.0;
    int epoch_mbs = 0;

    for (int start = 0; start < batch; start += mb_size) {
      int count = std::min(mb_size, batch - start);
      // standardize advantages within the minibatch
      double mean = 0.0;
      for (int i = 0; i < count; ++i) mean += adv[order[start + i]];
      mean /= count;
      double var = 0.0;
      for (int i = 0; i < count; ++i) {
        double d = adv[order[start + i]] - mean;
        var += d * d;
      }
      var /= count;
      double inv_std = 1.0 / (std::sqrt(var) + 1e-8);

      std::fill(grad.begin(), grad.end(), 0.0);
      double mb_kl = 0.0, mb_ploss = 0.0, mb_vloss = 0.0, mb_ent = 0.0;
      int mb_clipped = 0;
      bool bad = false;

      for (int i = 0; i < count && !bad; ++i) {
        int idx = order[start + i];
        int t = idx / buffer.envs;
        int e = idx % buffer.envs;
        PolicyOutput out = agent.forward_std_cached(buffer.obs_at(t, e), ws);
        for (int a = 0; a < action_dim; ++a)
          action[a] = buffer.action_at(t, e)[a];
        double logp_new =
            PolicyNet::gaussian_logprob(action, out.mean, out.log_std);
        double logp_old = buffer.logprobs[buffer.flat(t, e)];
        double log_ratio = logp_new - logp_old;
        double ratio = std::exp(log_ratio);
        double a_hat = (adv[idx] - mean) * inv_std;

        double s1 = ratio * a_hat;
        double s2 = std::clamp(ratio, 1.0 - cfg.clip_epsilon,
                               1.0 + cfg.clip_epsilon) *
                    a_hat;
        bool use_unclipped = s1 <= s2;
        mb_ploss += -std::min(s1, s2);
        if (std::abs(ratio - 1.0) > cfg.clip_epsilon) ++mb_clipped;
        mb_kl += (ratio - 1.0) - log_ratio;

        double verr = out.value - vtarget[idx];
        mb_vloss += verr * verr;

        double entropy = 0.0;
        for (int a = 0; a < action_dim; ++a)
          entropy += out.log_std[a] + 0.5 * std::log(2.0 * M_PI * M_E);
        mb_ent += entropy;

        if (!std::isfinite(ratio) || !std::isfinite(verr)) {
          bad = true;
          break;
        }

        // d(total loss)/d(outputs), averaged over the minibatch
        double dlogp = use_unclipped ? -a_hat * ratio / count : 0.0;
        for (int a = 0; a < action_dim; ++a) {
          double sigma = std::exp(out.log_std[a]);
          double z = (action[a] - out.mean[a]) / sigma;
          dmean[a] = dlogp * z / sigma;
          dlog_std[a] = dlogp * (z * z - 1.0) - cfg.entropy_coef / count;
        }
        double dvalue = cfg.value_coef * 2.0 * verr / count;
        agent.net().backward(ws, dmean.data(), dlog_std.data(), dvalue, grad);
      }

      double mb_loss = mb_ploss / count + cfg.value_coef * mb_vloss / count -
                       cfg.entropy_coef * mb_ent / count;
      if (bad || !std::isfinite(mb_loss)) {
        agent.net().params() = params_backup;
        stats.aborted = true;
        stats.message = "non-finite loss in epoch " + std::to_string(epoch) +
                        ", update aborted";
        stats.lr_after = lr;
        return stats;
      }

      if (cfg.max_grad_norm > 0.0) {
        double norm_sq = 0.0;
        for (double g : grad) norm_sq += g * g;
        double norm = std::sqrt(norm_sq);
        if (norm > cfg.max_grad_norm) {
          double scale = cfg.max_grad_norm / norm;
          for (double& g : grad) g *= scale;
        }
      }
      adam.step(agent.net().params(), grad, lr);

      kl_sum += mb_kl / count;
      epoch_kl += mb_kl / count;
      clip_sum += mb_clipped;
      ploss_sum += mb_ploss;
      vloss_sum += mb_vloss;
      ent_sum += mb_ent;
      sample_count += count;
      ++kl_count;
      ++epoch_mbs;
    }

    lr = kl_adaptive_lr(lr, epoch_kl / std::max(1, epoch_mbs),
                        cfg.kl_threshold, cfg.lr_min, cfg.lr_max);
  }

  stats.policy_loss = ploss_sum / sample_count;
  stats.value_loss = vloss_sum / sample_count;
  stats.entropy = ent_sum / sample_count;
  stats.mean_kl = kl_sum / kl_count;
  stats.clip_fraction = clip_sum / sample_count;
  stats.lr_after = lr;
  return stats;
}

EpisodeOutcome run_episode(Env& env, const Agent& agent, std::uint64_t seed,
                           bool zeroed_mask, Rng* action_rng) {
  EpisodeOutcome out;
  auto [obs, setup] = env.reset(seed);
  out.setup = setup;
  while (!env.done()) {
    std::array<double, kArmJoints> action{};
    if (action_rng) {
      Observation o = zeroed_mask ? zero_mask(obs) : obs;
      std::vector<float> std_obs;
      agent.standardize(o, std_obs);
      PolicyOutput po = agent.forward_std(std_obs.data());
      ActionSample s = sample_action(po.mean, po.log_std, *action_rng);
      for (int i = 0; i < kArmJoints; ++i) action[i] = s.action[i];
    } else {
      action = agent.act_mean(obs, zeroed_mask);
    }
    StepResult r = env.step(action);
    out.total_reward += r.reward.total;
    out.final_intersection = env.last_intersection();
    obs = r.obs;
    if (r.done) {
      out.reason = r.info.reason;
      out.success = r.info.reason == DoneReason::success;
      if (out.success) out.steps_to_success = env.steps();
    }
  }
  out.steps = env.steps();
  return out;
}

namespace {

struct EpisodeTracker {
  double reward_acc = 0.0;
  int steps = 0;
};

}  // namespace

TrainResult train(const EnvConfig& env_cfg, const TrainOptions& opt) {
  opt.ppo.validate();
  TrainResult result;
  std::filesystem::create_directories(opt.out_dir);
  result.metrics_path = opt.out_dir + "/metrics.csv";
  result.checkpoint_path = opt.out_dir + "/checkpoint.bin";

  std::ofstream metrics(result.metrics_path);
  if (!metrics)
    throw std::runtime_error("train: cannot write " + result.metrics_path);
  metrics << "step,return,success_rate,kl,lr,clip_fraction\n";

  Rng master(Rng::mix(opt.seed ^ 0x747261696eull));
  Agent agent(opt.arch);
  {
    Rng init_rng = master.split(1);
    agent.net().init_params(init_rng, opt.initial_log_std);
  }
  Adam adam(agent.net().param_count());
  Rng update_rng = master.split(2);
  Rng action_rng = master.split(3);

  const int n_envs = opt.num_envs;
  std::vector<Env> envs;
  envs.reserve(n_envs);
  for (int e = 0; e < n_envs; ++e) envs.emplace_back(env_cfg);
  Env eval_env(env_cfg);

  // each environment consumes its own deterministic episode-seed sequence
  std::vector<std::uint64_t> episode_counter(n_envs, 0);
  auto next_episode_seed = [&](int e) {
    return Rng::mix(opt.seed ^ Rng::mix(0x456e76ull + e) ^
                    (episode_counter[e]++ * 0x9e3779b97f4a7c15ull));
  };

  std::vector<Observation> obs(n_envs);
  std::vector<EpisodeTracker> trackers(n_envs);
  for (int e = 0; e < n_envs; ++e) {
    obs[e] = envs[e].reset(next_episode_seed(e)).first;
    agent.update_obs_stats(obs[e]);
  }

  RolloutBuffer buffer;
  buffer.resize(opt.ppo.rollouts, n_envs, agent.obs_dim(), opt.arch.action_dim);

  std::vector<double> recent_returns;
  std::vector<int> recent_success;
  auto window_mean = [](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.end() - std::min<size_t>(v.size(), 50), v.end(),
                           0.0) /
           std::min<size_t>(v.size(), 50);
  };

  double lr = opt.ppo.learning_rate;
  long long global_step = 0;
  int update = 0;
  std::vector<float> std_obs;
  PolicyNet::Workspace ws;

  while (global_step < opt.max_env_steps) {
    // ---- rollout ----
    for (int t = 0; t < opt.ppo.rollouts; ++t) {
      for (int e = 0; e < n_envs; ++e) {
        agent.standardize(obs[e], std_obs);
        std::copy(std_obs.begin(), std_obs.end(), buffer.obs_at(t, e));
        PolicyOutput po = agent.forward_std_cached(buffer.obs_at(t, e), ws);
        ActionSample s = sample_action(po.mean, po.log_std, action_rng);

        std::array<double, kArmJoints> act{};
        for (int i = 0; i < kArmJoints && i < opt.arch.action_dim; ++i)
          act[i] = s.action[i];
        StepResult r = envs[e].step(act);
        ++global_step;

        std::copy(s.raw.begin(), s.raw.end(), buffer.action_at(t, e));
        buffer.logprobs[buffer.flat(t, e)] = s.logprob;
        buffer.values[buffer.flat(t, e)] = agent.value_to_natural(po.value);
        buffer.rewards[buffer.flat(t, e)] = r.reward.total;
        buffer.dones[buffer.flat(t, e)] = r.done ? 1 : 0;

        trackers[e].reward_acc += r.reward.total;
        trackers[e].steps += 1;

        if (r.done) {
          recent_returns.push_back(trackers[e].reward_acc);
          recent_success.push_back(
              r.info.reason == DoneReason::success ? 1 : 0);
          if (recent_returns.size() > 200) {
            recent_returns.erase(recent_returns.begin());
            recent_success.erase(recent_success.begin());
          }
          trackers[e] = EpisodeTracker{};
          obs[e] = envs[e].reset(next_episode_seed(e)).first;
        } else {
          obs[e] = std::move(r.obs);
        }
        agent.update_obs_stats(obs[e]);
      }
    }
    // bootstrap values
    for (int e = 0; e < n_envs; ++e) {
      agent.standardize(obs[e], std_obs);
      PolicyOutput po = agent.forward_std_cached(std_obs.data(), ws);
      buffer.bootstrap[e] = agent.value_to_natural(po.value);
    }

    // ---- update ----
    UpdateStats st = ppo_update(buffer, agent, adam, lr, opt.ppo, update_rng);
    ++update;
    if (st.aborted) {
      agent.save(result.checkpoint_path);
      result.aborted = true;
      if (!opt.quiet)
        std::fprintf(stderr, "train: %s (checkpoint retained)\n",
                     st.message.c_str());
      break;
    }

    double succ_rate =
        recent_success.empty()
            ? 0.0
            : std::accumulate(
                  recent_success.end() -
                      std::min<size_t>(recent_success.size(), 50),
                  recent_success.end(), 0.0) /
                  std::min<size_t>(recent_success.size(), 50);
    metrics << global_step << "," << window_mean(recent_returns) << ","
            << succ_rate << "," << st.mean_kl << "," << lr << ","
            << st.clip_fraction << "\n";
    metrics.flush();
    if (!opt.quiet && update % 5 == 0)
      std::fprintf(stderr,
                   "update %d step %lld return %.2f succ %.2f kl %.4f lr %.2e\n",
                   update, global_step, window_mean(recent_returns), succ_rate,
                   st.mean_kl, lr);

    if (opt.checkpoint_every_updates > 0 &&
        update % opt.checkpoint_every_updates == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "/checkpoint_%06d.bin", update);
      agent.save(opt.out_dir + name);
    }

    // ---- periodic deterministic evaluation + early stop ----
    if (opt.eval_every_updates > 0 && update % opt.eval_every_updates == 0) {
      int wins = 0;
      for (int ep = 0; ep < opt.eval_episodes; ++ep) {
        EpisodeOutcome oc =
            run_episode(eval_env, agent, Rng::mix(0xe7a1ull + ep),
                        opt.eval_zero_mask);
        wins += oc.success ? 1 : 0;
      }
      double rate = static_cast<double>(wins) / opt.eval_episodes;
      result.final_eval_success = rate;
      if (!opt.quiet)
        std::fprintf(stderr, "eval @ update %d: success %.3f\n", update, rate);
      if (opt.stop_success > 0.0 && rate >= opt.stop_success) break;
    }
  }

  result.env_steps = global_step;
  result.updates = update;
  agent.save(result.checkpoint_path);
  return result;
}

}  // namespace canopy
