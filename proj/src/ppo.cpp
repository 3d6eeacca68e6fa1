#include "pickbench/ppo.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace pickbench {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

void PPOConfig::validate() const {
  if (total_timesteps < 0 || num_envs < 1 || rollout_steps < 1) {
    throw std::invalid_argument("ppo config: sizes must be positive");
  }
  if (minibatches < 1 || update_epochs < 1) {
    throw std::invalid_argument("ppo config: update sizes must be positive");
  }
  if (gamma < 0 || gamma > 1 || gae_lambda < 0 || gae_lambda > 1) {
    throw std::invalid_argument("ppo config: gamma and lambda must be in [0,1]");
  }
  if (clip_coef <= 0 || learning_rate <= 0) {
    throw std::invalid_argument("ppo config: clip and learning rate must be positive");
  }
  if ((num_envs * rollout_steps) % minibatches != 0) {
    throw std::invalid_argument("ppo config: batch not divisible into minibatches");
  }
}

ActorCritic ActorCritic::make(int obs_dim, int hidden, uint64_t seed,
                              double log_std_init) {
  ActorCritic ac;
  ac.policy = Mlp({obs_dim, hidden, hidden, kActionDim}, mix64(seed));
  ac.value = Mlp({obs_dim, hidden, hidden, 1}, mix64(seed + 1));
  ac.log_std = VectorXd::Constant(kActionDim, log_std_init);
  return ac;
}

double ActorCritic::entropy() const {
  const VectorXd clamped = log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  return clamped.sum() + 0.5 * kActionDim * (kLog2Pi + 1.0);
}

int ActorCritic::num_params() const {
  return policy.num_params() + static_cast<int>(log_std.size()) + value.num_params();
}

VectorXd ActorCritic::flatten() const {
  VectorXd v(num_params());
  v << policy.flatten(), log_std, value.flatten();
  return v;
}

void ActorCritic::unflatten(const VectorXd& v) {
  if (v.size() != num_params()) throw std::invalid_argument("flat size mismatch");
  int k = 0;
  policy.unflatten(v.segment(k, policy.num_params()));
  k += policy.num_params();
  log_std = v.segment(k, log_std.size());
  k += static_cast<int>(log_std.size());
  value.unflatten(v.segment(k, value.num_params()));
}

ActorCritic ActorCritic::zeros_like() const {
  ActorCritic z = *this;
  z.policy.set_zero();
  z.value.set_zero();
  z.log_std.setZero();
  return z;
}

std::pair<std::vector<double>, std::vector<double>> compute_gae(
    const std::vector<double>& rewards, const std::vector<double>& values,
    double bootstrap, const std::vector<uint8_t>& dones, double gamma,
    double lambda) {
  const size_t T = rewards.size();
  if (values.size() != T || dones.size() != T) {
    throw std::invalid_argument("compute_gae: length mismatch");
  }
  if (gamma < 0 || gamma > 1 || lambda < 0 || lambda > 1) {
    throw std::invalid_argument("compute_gae: gamma and lambda must be in [0,1]");
  }
  std::vector<double> advantages(T), returns(T);
  double next_advantage = 0.0;
  for (int t = static_cast<int>(T) - 1; t >= 0; --t) {
    const double not_done = dones[t] ? 0.0 : 1.0;
    const double next_value = (t + 1 < static_cast<int>(T)) ? values[t + 1] : bootstrap;
    const double delta = rewards[t] + gamma * next_value * not_done - values[t];
    next_advantage = delta + gamma * lambda * not_done * next_advantage;
    advantages[t] = next_advantage;
    returns[t] = advantages[t] + values[t];
  }
  return {std::move(advantages), std::move(returns)};
}

VectorXd normalize_advantages(const VectorXd& advantages) {
  const double mean = advantages.mean();
  const double std =
      std::sqrt((advantages.array() - mean).square().sum() / advantages.size());
  return (advantages.array() - mean) / (std + 1e-8);
}

double ppo_loss(const ActorCritic& net, const MatrixXd& obs, const MatrixXd& actions,
                const VectorXd& old_log_probs, const VectorXd& advantages,
                const VectorXd& returns, const PPOConfig& cfg, ActorCritic* grads,
                PPOStats* stats) {
  const int n = static_cast<int>(obs.rows());
  const int d = kActionDim;

  Mlp::Cache policy_cache, value_cache;
  const MatrixXd mean = net.policy.forward(obs, policy_cache);
  const VectorXd value = net.value.forward(obs, value_cache).col(0);

  const VectorXd log_std_clamped =
      net.log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  const VectorXd sigma = log_std_clamped.array().exp();
  const VectorXd inv_var = sigma.array().square().inverse();

  // z = (a - mu) / sigma, per sample per dim
  MatrixXd diff = actions - mean;
  MatrixXd z2 = diff.array().square().rowwise() *
                inv_var.transpose().array();  // ((a-mu)/sigma)^2
  VectorXd log_prob =
      -0.5 * z2.rowwise().sum().array() - log_std_clamped.sum() - 0.5 * d * kLog2Pi;

  VectorXd ratio = (log_prob - old_log_probs).array().exp();
  const double entropy = net.entropy();

  double surrogate = 0.0;
  double clip_count = 0.0;
  double approx_kl = 0.0;
  // dsurr/dratio per sample (gradient through the chosen min branch)
  VectorXd dsurr_dratio = VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    const double r = ratio[i];
    const double a = advantages[i];
    const double clipped = std::clamp(r, 1.0 - cfg.clip_coef, 1.0 + cfg.clip_coef);
    const double s1 = r * a;
    const double s2 = clipped * a;
    if (s1 <= s2) {
      surrogate += s1;
      dsurr_dratio[i] = a;
    } else {
      surrogate += s2;
      dsurr_dratio[i] = (r > 1.0 - cfg.clip_coef && r < 1.0 + cfg.clip_coef) ? a : 0.0;
    }
    if (std::abs(r - 1.0) > cfg.clip_coef) clip_count += 1.0;
    approx_kl += (r - 1.0) - std::log(std::max(r, 1e-12));
  }
  surrogate /= n;

  const double value_mse = (value - returns).array().square().mean();
  const double loss =
      -surrogate - cfg.entropy_coef * entropy + cfg.value_coef * value_mse;

  if (stats) {
    stats->loss = loss;
    stats->policy_loss = -surrogate;
    stats->value_loss = value_mse;
    stats->entropy = entropy;
    stats->clip_fraction = clip_count / n;
    stats->approx_kl = approx_kl / n;
  }
  if (!grads) return loss;

  // d loss / d log_prob_i = -(1/n) * dsurr_dratio_i * ratio_i
  const VectorXd dlogp =
      (-1.0 / n) * dsurr_dratio.cwiseProduct(ratio);

  // mean gradient: d log_prob / d mu = (a - mu) / sigma^2
  MatrixXd dmean = diff.array().rowwise() * inv_var.transpose().array();
  dmean.array().colwise() *= dlogp.array();
  net.policy.backward(policy_cache, dmean, grads->policy);

  // log-std gradient: d log_prob / d log_sigma_d = z2 - 1 (zero outside clamp)
  VectorXd dlogstd =
      ((z2.array().colwise() * dlogp.array()).matrix().colwise().sum() -
       dlogp.sum() * Eigen::RowVectorXd::Ones(d))
          .transpose();
  // entropy term: d entropy / d log_sigma_d = 1 inside the clamp
  for (int k = 0; k < d; ++k) {
    const bool inside = net.log_std[k] > kLogStdMin && net.log_std[k] < kLogStdMax;
    if (!inside) {
      dlogstd[k] = 0.0;
    } else {
      dlogstd[k] -= cfg.entropy_coef;
    }
  }
  grads->log_std += dlogstd;

  // value gradient
  MatrixXd dvalue = (cfg.value_coef * 2.0 / n) * (value - returns);
  net.value.backward(value_cache, dvalue, grads->value);
  return loss;
}

PPOStats ppo_update(const RolloutBuffer& buffer, ActorCritic& net, AdamW& opt,
                    const PPOConfig& cfg, Rng& rng) {
  const int n = buffer.size();
  if (n != cfg.num_envs * cfg.rollout_steps) {
    throw std::invalid_argument("ppo_update: buffer not full");
  }
  // normalize advantages once per update
  const VectorXd adv = normalize_advantages(buffer.advantages);

  std::vector<int> indices(n);
  std::iota(indices.begin(), indices.end(), 0);
  const int mb_size = n / cfg.minibatches;

  PPOStats total;
  int stat_count = 0;
  for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
    rng.shuffle(indices);
    for (int mb = 0; mb < cfg.minibatches; ++mb) {
      MatrixXd obs(mb_size, buffer.obs.cols());
      MatrixXd actions(mb_size, buffer.actions.cols());
      VectorXd old_logp(mb_size), advantages(mb_size), returns(mb_size);
      for (int i = 0; i < mb_size; ++i) {
        const int src = indices[mb * mb_size + i];
        obs.row(i) = buffer.obs.row(src);
        actions.row(i) = buffer.actions.row(src);
        old_logp[i] = buffer.log_probs[src];
        advantages[i] = adv[src];
        returns[i] = buffer.returns[src];
      }
      ActorCritic grads = net.zeros_like();
      PPOStats stats;
      const double loss = ppo_loss(net, obs, actions, old_logp, advantages, returns,
                                   cfg, &grads, &stats);
      if (!std::isfinite(loss)) {
        throw std::runtime_error(
            "ppo_update: non-finite loss (policy_loss=" +
            std::to_string(stats.policy_loss) +
            ", value_loss=" + std::to_string(stats.value_loss) + ")");
      }
      VectorXd params = net.flatten();
      opt.step(params, grads.flatten());
      net.unflatten(params);

      total.loss += stats.loss;
      total.policy_loss += stats.policy_loss;
      total.value_loss += stats.value_loss;
      total.entropy += stats.entropy;
      total.clip_fraction += stats.clip_fraction;
      total.approx_kl += stats.approx_kl;
      stat_count += 1;
    }
  }
  total.loss /= stat_count;
  total.policy_loss /= stat_count;
  total.value_loss /= stat_count;
  total.entropy /= stat_count;
  total.clip_fraction /= stat_count;
  total.approx_kl /= stat_count;
  return total;
}

double reward_fn(const EnvState& prev, const Action7& action, const EnvState& next) {
  (void)action;
  const int target = next.instruction.target_id;
  double r = -0.1 * next.planar_dist_to_instructed();
  for (int id = 0; id < next.config->object_count(); ++id) {
    const bool attach_event = !prev.objects[id].attached && next.objects[id].attached;
    if (!attach_event) continue;
    if (id == target) {
      // first attachment of the episode being the instructed object
      if (!prev.grasp_any_latch) r += 2.0;
    } else {
      r -= 1.0;
    }
  }
  if (next.terminal() && next.attached_object() == target) r += 5.0;
  return r;
}

Action7 PPOPolicy::act(const EnvState& state) {
  const VectorXd obs = flatten_obs(observe_privileged(state));
  const VectorXd mean = net_.policy.forward(obs.transpose()).row(0);
  Action7 a;
  a.d_pos = Eigen::Vector3d(mean[0], mean[1], mean[2]);
  a.d_rot = Eigen::Vector3d(mean[3], mean[4], mean[5]);
  a.grip = mean[6];
  return a;
}

PPOTrainResult ppo_train(EnvConfigPtr cfg, const ScenarioConfig& scenario,
                         const PPOConfig& pcfg, bool verbose) {
  pcfg.validate();
  if (pcfg.rollout_steps != cfg->workspace.horizon ||
      pcfg.max_episode_steps != cfg->workspace.horizon) {
    throw std::invalid_argument("ppo rollout/max steps must equal the env horizon");
  }
  const int obs_dim = flat_obs_dim(cfg->object_count());

  PPOTrainResult result;
  result.net =
      ActorCritic::make(obs_dim, pcfg.hidden_size, pcfg.seed, pcfg.log_std_init);
  ActorCritic& net = result.net;
  AdamW opt(net.num_params(), pcfg.learning_rate, pcfg.weight_decay);
  Rng rng(mix64(pcfg.seed + 0x51E));

  const long long steps_per_update =
      static_cast<long long>(pcfg.num_envs) * pcfg.rollout_steps;
  const long long num_updates = pcfg.total_timesteps / steps_per_update;

  // vectorized env pool, counter-based episode seeds
  std::vector<EnvState> envs;
  uint64_t episode_counter = 0;
  auto reset_env = [&](int e) {
    const uint64_t seed = derive_seed(pcfg.seed, episode_counter++);
    const EpisodeSetup setup = sample_episode(*cfg, scenario, seed);
    envs[e] = env_reset(cfg, setup.placement, setup.instruction, seed);
  };
  envs.resize(pcfg.num_envs);
  for (int e = 0; e < pcfg.num_envs; ++e) reset_env(e);

  RolloutBuffer buf;
  const int N = pcfg.num_envs * pcfg.rollout_steps;
  buf.obs.resize(N, obs_dim);
  buf.actions.resize(N, kActionDim);
  buf.log_probs.resize(N);
  buf.values.resize(N);
  buf.advantages.resize(N);
  buf.returns.resize(N);
  MatrixXd rewards(pcfg.rollout_steps, pcfg.num_envs);
  Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic> dones(pcfg.rollout_steps,
                                                               pcfg.num_envs);

  const uint64_t eval_seed = mix64(pcfg.seed + 0xE7A1);
  auto run_eval = [&]() {
    PPOPolicy policy(net);
    const auto outcomes =
        evaluate_policy(cfg, scenario, policy, pcfg.eval_episodes, eval_seed);
    return success_rate(outcomes);
  };

  bool warned_divergence = false;
  for (int update = 0; update < num_updates; ++update) {
    double episode_reward_sum = 0.0;
    MatrixXd X(pcfg.num_envs, obs_dim);
    for (int t = 0; t < pcfg.rollout_steps; ++t) {
      for (int e = 0; e < pcfg.num_envs; ++e) {
        X.row(e) = flatten_obs(observe_privileged(envs[e]));
      }
      const MatrixXd mean = net.policy.forward(X);
      const VectorXd values = net.value.forward(X).col(0);
      const VectorXd sigma = net.sigma();
      const VectorXd log_std_clamped =
          net.log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);

      for (int e = 0; e < pcfg.num_envs; ++e) {
        const int row = t * pcfg.num_envs + e;
        Eigen::Matrix<double, kActionDim, 1> a;
        double logp = -log_std_clamped.sum() - 0.5 * kActionDim * kLog2Pi;
        for (int k = 0; k < kActionDim; ++k) {
          const double z = rng.normal();
          a[k] = mean(e, k) + sigma[k] * z;
          logp -= 0.5 * z * z;
        }
        buf.obs.row(row) = X.row(e);
        buf.actions.row(row) = a.transpose();
        buf.log_probs[row] = logp;
        buf.values[row] = values[e];

        Action7 action;
        action.d_pos = Eigen::Vector3d(a[0], a[1], a[2]);
        action.d_rot = Eigen::Vector3d(a[3], a[4], a[5]);
        action.grip = a[6];
        auto [next, info] = env_step(envs[e], action);
        rewards(t, e) = reward_fn(envs[e], action, next);
        const bool done = next.terminal();
        dones(t, e) = done ? 1 : 0;
        envs[e] = std::move(next);
        if (done) {
          reset_env(e);
        }
      }
      episode_reward_sum += rewards.row(t).sum();
    }

    // GAE per env; episodes align with rollouts so bootstrap is masked,
    // computed anyway for generality.
    for (int e = 0; e < pcfg.num_envs; ++e) {
      std::vector<double> r(pcfg.rollout_steps), v(pcfg.rollout_steps);
      std::vector<uint8_t> d(pcfg.rollout_steps);
      for (int t = 0; t < pcfg.rollout_steps; ++t) {
        r[t] = rewards(t, e);
        v[t] = buf.values[t * pcfg.num_envs + e];
        d[t] = dones(t, e);
      }
      const VectorXd obs_next = flatten_obs(observe_privileged(envs[e]));
      const double bootstrap = net.value.forward(obs_next.transpose())(0, 0);
      auto [adv, ret] = compute_gae(r, v, bootstrap, d, pcfg.gamma, pcfg.gae_lambda);
      for (int t = 0; t < pcfg.rollout_steps; ++t) {
        buf.advantages[t * pcfg.num_envs + e] = adv[t];
        buf.returns[t * pcfg.num_envs + e] = ret[t];
      }
    }

    const PPOStats stats = ppo_update(buf, net, opt, pcfg, rng);
    result.env_steps += steps_per_update;

    PPOCurvePoint point;
    point.update = update + 1;
    point.env_steps = result.env_steps;
    point.mean_episode_reward =
        episode_reward_sum / pcfg.num_envs;  // one episode per env per rollout

    const bool eval_now = ((update + 1) % pcfg.eval_every_updates == 0) ||
                          (update + 1 == num_updates);
    if (eval_now) {
      point.eval_success = run_eval();
      result.final_eval_success = point.eval_success;
      if (verbose) {
        std::fprintf(stderr,
                     "[ppo] update %d/%lld steps %lld reward %.3f eval %.3f "
                     "entropy %.2f kl %.4f\n",
                     update + 1, num_updates, result.env_steps,
                     point.mean_episode_reward, point.eval_success, stats.entropy,
                     stats.approx_kl);
      }
      if (!warned_divergence && update + 1 >= num_updates / 2 &&
          point.eval_success < 0.05) {
        std::fprintf(stderr,
                     "[ppo] warning: success %.3f below the random floor after "
                     "half the budget; continuing\n",
                     point.eval_success);
        warned_divergence = true;
      }
    }
    result.curve.push_back(point);
    if (pcfg.early_stop_success > 0 && point.eval_success >= pcfg.early_stop_success) {
      break;
    }
  }

  if (result.curve.empty() || result.curve.back().eval_success < 0) {
    result.final_eval_success = run_eval();
    PPOCurvePoint point;
    point.update = static_cast<int>(result.curve.size());
    point.env_steps = result.env_steps;
    point.mean_episode_reward =
        result.curve.empty() ? 0.0 : result.curve.back().mean_episode_reward;
    point.eval_success = result.final_eval_success;
    result.curve.push_back(point);
  }
  return result;
}

void save_actor_critic(const std::string& dir, const ActorCritic& net,
                       const nlohmann::json& extra_config) {
  std::map<std::string, MatrixXd> tensors;
  for (size_t l = 0; l < net.policy.layers.size(); ++l) {
    tensors["policy.layer" + std::to_string(l) + ".W"] = net.policy.layers[l].W;
    tensors["policy.layer" + std::to_string(l) + ".b"] = net.policy.layers[l].b;
  }
  for (size_t l = 0; l < net.value.layers.size(); ++l) {
    tensors["value.layer" + std::to_string(l) + ".W"] = net.value.layers[l].W;
    tensors["value.layer" + std::to_string(l) + ".b"] = net.value.layers[l].b;
  }
  tensors["log_std"] = net.log_std;
  nlohmann::json config = extra_config;
  config["kind"] = "actor_critic";
  config["obs_dim"] = net.policy.input_dim();
  config["hidden"] = net.policy.layers[0].W.cols();
  save_checkpoint(dir, tensors, config);
}

std::pair<ActorCritic, nlohmann::json> load_actor_critic(const std::string& dir) {
  auto [tensors, config] = load_checkpoint(dir);
  if (config.at("kind") != "actor_critic") {
    throw std::runtime_error("checkpoint at " + dir + " is not an actor-critic");
  }
  const int obs_dim = config.at("obs_dim").get<int>();
  const int hidden = config.at("hidden").get<int>();
  ActorCritic net = ActorCritic::make(obs_dim, hidden, 0, 0.0);
  for (size_t l = 0; l < net.policy.layers.size(); ++l) {
    net.policy.layers[l].W = tensors.at("policy.layer" + std::to_string(l) + ".W");
    net.policy.layers[l].b = tensors.at("policy.layer" + std::to_string(l) + ".b").col(0);
  }
  for (size_t l = 0; l < net.value.layers.size(); ++l) {
    net.value.layers[l].W = tensors.at("value.layer" + std::to_string(l) + ".W");
    net.value.layers[l].b = tensors.at("value.layer" + std::to_string(l) + ".b").col(0);
  }
  net.log_std = tensors.at("log_std").col(0);
  return {std::move(net), config};
}

std::string write_ppo_curve_csv(const std::string& path,
                                const std::vector<PPOCurvePoint>& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write curve csv: " + path);
  out << "update,env_steps,mean_episode_reward,eval_success\n";
  char buf[128];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%lld,%.6f,%.6f\n", p.update, p.env_steps,
                  p.mean_episode_reward, p.eval_success);
    out << buf;
  }
  return path;
}

}  // namespace pickbench
