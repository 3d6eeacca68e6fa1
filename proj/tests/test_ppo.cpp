#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "pickbench/ppo.hpp"

using namespace pickbench;

namespace {

// O(T^2) discounted-sum oracle for GAE:
// A_t = sum_l (gamma*lambda)^l delta_{t+l} prod_{m<l} (1 - done_{t+m})
std::vector<double> gae_brute_force(const std::vector<double>& r,
                                    const std::vector<double>& v, double bootstrap,
                                    const std::vector<uint8_t>& dones, double gamma,
                                    double lambda) {
  const int T = static_cast<int>(r.size());
  std::vector<double> delta(T);
  for (int t = 0; t < T; ++t) {
    const double next_v = (t + 1 < T) ? v[t + 1] : bootstrap;
    delta[t] = r[t] + gamma * next_v * (dones[t] ? 0.0 : 1.0) - v[t];
  }
  std::vector<double> adv(T, 0.0);
  for (int t = 0; t < T; ++t) {
    double weight = 1.0;
    for (int l = 0; t + l < T; ++l) {
      adv[t] += weight * delta[t + l];
      if (dones[t + l]) break;
      weight *= gamma * lambda;
    }
  }
  return adv;
}

struct ToyBatch {
  MatrixXd obs, actions;
  VectorXd old_logp, advantages, returns;
};

ToyBatch toy_batch(const ActorCritic& net, int n, uint64_t seed) {
  Rng rng(seed);
  const int obs_dim = net.policy.input_dim();
  ToyBatch b;
  b.obs.resize(n, obs_dim);
  b.actions.resize(n, kActionDim);
  b.old_logp.resize(n);
  b.advantages.resize(n);
  b.returns.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < obs_dim; ++k) b.obs(i, k) = rng.uniform(-1, 1);
    for (int k = 0; k < kActionDim; ++k) b.actions(i, k) = rng.uniform(-0.5, 0.5);
    b.advantages[i] = rng.uniform(-1, 1);
    b.returns[i] = rng.uniform(-1, 1);
  }
  // old log probs from a nearby parameter vector so ratios sit away from
  // the clip kinks (generic position for the finite-difference check)
  ActorCritic old_net = net;
  VectorXd p = old_net.flatten();
  for (int i = 0; i < p.size(); ++i) p[i] += rng.uniform(-0.01, 0.01);
  old_net.unflatten(p);
  const MatrixXd mean = old_net.policy.forward(b.obs);
  const VectorXd sigma = old_net.sigma();
  for (int i = 0; i < n; ++i) {
    double logp = -old_net.log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax).sum() -
                  0.5 * kActionDim * std::log(2 * M_PI);
    for (int k = 0; k < kActionDim; ++k) {
      const double z = (b.actions(i, k) - mean(i, k)) / sigma[k];
      logp -= 0.5 * z * z;
    }
    b.old_logp[i] = logp;
  }
  return b;
}

}  // namespace

TEST_CASE("gae worked example") {
  const auto [adv, ret] =
      compute_gae({1, 0, 1}, {0.5, 0.5, 0.5}, 0.0, {0, 0, 0}, 0.8, 0.9);
  REQUIRE(adv.size() == 3);
  CHECK(adv[0] == doctest::Approx(1.0872).epsilon(1e-12));
  CHECK(adv[1] == doctest::Approx(0.26).epsilon(1e-12));
  CHECK(adv[2] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ret[0] == doctest::Approx(1.5872).epsilon(1e-12));
}

TEST_CASE("lambda zero collapses to one-step deltas") {
  Rng rng(3);
  std::vector<double> r(10), v(10);
  std::vector<uint8_t> d(10, 0);
  for (int i = 0; i < 10; ++i) {
    r[i] = rng.uniform(-1, 1);
    v[i] = rng.uniform(-1, 1);
  }
  const double bootstrap = 0.3;
  const auto [adv, ret] = compute_gae(r, v, bootstrap, d, 0.8, 0.0);
  for (int t = 0; t < 10; ++t) {
    const double next_v = (t + 1 < 10) ? v[t + 1] : bootstrap;
    CHECK(adv[t] == doctest::Approx(r[t] + 0.8 * next_v - v[t]).epsilon(1e-12));
  }
}

TEST_CASE("done masking stops bootstrap across boundaries") {
  std::vector<double> r = {1, 1, 1};
  std::vector<double> v = {0.2, 0.4, 0.6};
  std::vector<uint8_t> d = {0, 1, 0};
  const auto [adv, ret] = compute_gae(r, v, 9.9, d, 0.8, 0.9);
  // at t=1 the episode ends: A_1 = r_1 - V_1, no bootstrap leaks in
  CHECK(adv[1] == doctest::Approx(1.0 - 0.4).epsilon(1e-12));
  // and t=0 chains only into t=1
  const double delta0 = 1.0 + 0.8 * 0.4 - 0.2;
  CHECK(adv[0] == doctest::Approx(delta0 + 0.72 * adv[1]).epsilon(1e-12));
}

TEST_CASE("gae matches the brute-force oracle on 1000 random sequences") {
  Rng rng(2025);
  for (int trial = 0; trial < 1000; ++trial) {
    const int T = 1 + rng.uniform_int(20);
    std::vector<double> r(T), v(T);
    std::vector<uint8_t> d(T);
    for (int t = 0; t < T; ++t) {
      r[t] = rng.uniform(-2, 2);
      v[t] = rng.uniform(-2, 2);
      d[t] = rng.uniform() < 0.15 ? 1 : 0;
    }
    const double bootstrap = rng.uniform(-2, 2);
    const double gamma = rng.uniform(0, 1);
    const double lambda = rng.uniform(0, 1);
    const auto [adv, ret] = compute_gae(r, v, bootstrap, d, gamma, lambda);
    const auto oracle = gae_brute_force(r, v, bootstrap, d, gamma, lambda);
    for (int t = 0; t < T; ++t) {
      CHECK(std::abs(adv[t] - oracle[t]) < 1e-10);
      CHECK(std::abs(ret[t] - (oracle[t] + v[t])) < 1e-10);
    }
  }
}

TEST_CASE("gae rejects mismatched lengths") {
  CHECK_THROWS_AS(compute_gae({1, 2}, {0.5}, 0, {0, 0}, 0.8, 0.9),
                  std::invalid_argument);
}

TEST_CASE("advantage normalization") {
  Rng rng(8);
  VectorXd adv(512);
  for (int i = 0; i < adv.size(); ++i) adv[i] = rng.uniform(-3, 7);
  const VectorXd n = normalize_advantages(adv);
  CHECK(std::abs(n.mean()) < 1e-6);
  const double std = std::sqrt(n.array().square().sum() / n.size() -
                               n.mean() * n.mean());
  CHECK(std > 1.0 - 1e-6);
  CHECK(std < 1.0 + 1e-6);
}

TEST_CASE("entropy matches the Gaussian closed form") {
  ActorCritic net = ActorCritic::make(3, 8, 5, -0.7);
  double expected = 0.0;
  for (int k = 0; k < kActionDim; ++k) {
    expected += -0.7 + 0.5 * std::log(2 * M_PI * std::exp(1.0));
  }
  CHECK(net.entropy() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("identity ratio makes the surrogate the mean advantage") {
  ActorCritic net = ActorCritic::make(4, 8, 17, -0.5);
  PPOConfig cfg;
  ToyBatch b = toy_batch(net, 16, 55);
  // recompute old log probs from the *same* net so every ratio is 1
  const MatrixXd mean = net.policy.forward(b.obs);
  const VectorXd sigma = net.sigma();
  for (int i = 0; i < 16; ++i) {
    double logp = -net.log_std.sum() - 0.5 * kActionDim * std::log(2 * M_PI);
    for (int k = 0; k < kActionDim; ++k) {
      const double z = (b.actions(i, k) - mean(i, k)) / sigma[k];
      logp -= 0.5 * z * z;
    }
    b.old_logp[i] = logp;
  }
  PPOStats stats;
  ppo_loss(net, b.obs, b.actions, b.old_logp, b.advantages, b.returns, cfg, nullptr,
           &stats);
  CHECK(stats.policy_loss == doctest::Approx(-b.advantages.mean()).epsilon(1e-9));
  CHECK(stats.clip_fraction == 0.0);
}

TEST_CASE("zero advantages zero the policy-mean gradient") {
  ActorCritic net = ActorCritic::make(4, 8, 19, -0.5);
  PPOConfig cfg;
  ToyBatch b = toy_batch(net, 12, 77);
  b.advantages.setZero();
  ActorCritic grads = net.zeros_like();
  ppo_loss(net, b.obs, b.actions, b.old_logp, b.advantages, b.returns, cfg, &grads,
           nullptr);
  CHECK(grads.policy.flatten().norm() == 0.0);
  // entropy still pushes log-std
  CHECK(grads.log_std.norm() > 0.0);
}

TEST_CASE("ppo gradients match central finite differences") {
  // includes a 4-unit-wide toy net and a larger one
  for (const int hidden : {4, 16}) {
    ActorCritic net = ActorCritic::make(3, hidden, 23 + hidden, -0.4);
    PPOConfig cfg;
    const ToyBatch b = toy_batch(net, 8, 91 + hidden);

    ActorCritic grads = net.zeros_like();
    ppo_loss(net, b.obs, b.actions, b.old_logp, b.advantages, b.returns, cfg, &grads,
             nullptr);

    auto loss_at = [&](const VectorXd& params) {
      ActorCritic probe = net;
      probe.unflatten(params);
      return ppo_loss(probe, b.obs, b.actions, b.old_logp, b.advantages, b.returns,
                      cfg, nullptr, nullptr);
    };
    const VectorXd numeric =
        finite_difference_gradient(loss_at, net.flatten(), 1e-4);
    const double err = max_relative_error(grads.flatten(), numeric);
    INFO("hidden ", hidden, " max rel err ", err);
    CHECK(err < 1e-3);
  }
}

TEST_CASE("reward function examples") {
  auto cfg = std::make_shared<const EnvConfig>(EnvConfig::defaults(5));
  PlacementSample p;
  p.regime = Regime::full_random();
  p.positions = {{0.10, 0.18}, {-0.10, 0.18}, {0.0, 0.21}, {-0.10, -0.18}, {0.10, -0.18}};
  EnvState s = env_reset(cfg, p, Instruction::for_target(*cfg, 0), 1);

  // gripper exactly on the instructed object, no events
  EnvState on_target = s;
  on_target.gripper.position = Eigen::Vector3d(0.10, 0.18, 0.05);
  EnvState next = on_target;
  next.step = 1;
  CHECK(reward_fn(on_target, Action7{}, next) == doctest::Approx(0.0));

  // wrong-object attachment costs 1.0
  EnvState wrong = next;
  wrong.objects[1].attached = true;
  wrong.grasp_any_latch = true;
  wrong.step = 2;
  CHECK(reward_fn(next, Action7{}, wrong) ==
        doctest::Approx(-1.0 - 0.1 * wrong.planar_dist_to_instructed()));

  // terminal success at distance zero, first attachment this step
  EnvState before_final = s;
  before_final.step = cfg->workspace.horizon - 1;
  before_final.gripper.position = Eigen::Vector3d(0.10, 0.18, 0.01);
  EnvState final_state = before_final;
  final_state.step = cfg->workspace.horizon;
  final_state.objects[0].attached = true;
  final_state.objects[0].position = final_state.gripper.position;
  final_state.grasp_any_latch = true;
  CHECK(reward_fn(before_final, Action7{}, final_state) ==
        doctest::Approx(5.0 + 2.0));
}

TEST_CASE("zero timesteps returns the initialized net") {
  auto cfg = std::make_shared<const EnvConfig>(EnvConfig::defaults(1));
  ScenarioConfig scenario;
  scenario.regime = RegimeKind::SmallJitter;
  scenario.object_count = 1;
  PPOConfig pcfg;
  pcfg.total_timesteps = 0;
  pcfg.num_envs = 4;
  pcfg.seed = 5;
  const PPOTrainResult result = ppo_train(cfg, scenario, pcfg);
  const ActorCritic fresh = ActorCritic::make(flat_obs_dim(1), pcfg.hidden_size,
                                              pcfg.seed, pcfg.log_std_init);
  CHECK(result.net.flatten() == fresh.flatten());
  CHECK(result.env_steps == 0);
}

TEST_CASE("short training runs are bitwise deterministic") {
  auto cfg = std::make_shared<const EnvConfig>(EnvConfig::defaults(1));
  ScenarioConfig scenario;
  scenario.regime = RegimeKind::SmallJitter;
  scenario.object_count = 1;
  PPOConfig pcfg;
  pcfg.num_envs = 4;
  pcfg.total_timesteps = 600;  // 3 updates
  pcfg.eval_every_updates = 2;
  pcfg.eval_episodes = 5;
  pcfg.seed = 11;
  const PPOTrainResult a = ppo_train(cfg, scenario, pcfg);
  const PPOTrainResult b = ppo_train(cfg, scenario, pcfg);
  CHECK(a.net.flatten() == b.net.flatten());
  REQUIRE(a.curve.size() == b.curve.size());
  for (size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].mean_episode_reward == b.curve[i].mean_episode_reward);
    CHECK(a.curve[i].eval_success == b.curve[i].eval_success);
  }
}

TEST_CASE("actor-critic checkpoints round trip") {
  ActorCritic net = ActorCritic::make(7, 16, 3, -0.9);
  const auto dir =
      (std::filesystem::temp_directory_path() / "pickbench_ac_ckpt").string();
  std::filesystem::remove_all(dir);
  save_actor_critic(dir, net, {{"note", "test"}});
  auto [loaded, config] = load_actor_critic(dir);
  CHECK(loaded.flatten() == net.flatten());
  CHECK(config.at("note") == "test");
  std::filesystem::remove_all(dir);
}
