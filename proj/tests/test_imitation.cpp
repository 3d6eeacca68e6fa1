#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pickbench/imitation.hpp"
#include "pickbench/policy.hpp"

using namespace pickbench;

namespace {

EnvConfigPtr cfg5 = std::make_shared<const EnvConfig>(EnvConfig::defaults(5));

ScenarioConfig small_jitter_scenario() {
  ScenarioConfig s;
  s.regime = RegimeKind::SmallJitter;
  return s;
}

Dataset oracle_dataset(const ScenarioConfig& scenario, int count, uint64_t base) {
  Dataset ds;
  ds.meta.env_config_hash = config_hash(*cfg5);
  ds.meta.object_set = canonical_object_names();
  ds.meta.scenario = scenario;
  ds.meta.policy_name = "oracle";
  ds.meta.base_seed = base;
  OraclePolicy oracle;
  long long stored = 0;
  for (uint64_t i = 0; stored < count; ++i) {
    const uint64_t seed = derive_seed(base, i);
    const EpisodeResult r = run_episode(cfg5, scenario, oracle, seed, true, true);
    if (!r.outcome.success) continue;
    ds.episodes.push_back(make_trajectory(stored, r.outcome.task, scenario.name(),
                                          seed, true, r.states, r.actions, 20.0));
    stored += 1;
  }
  ds.meta.total_episodes = stored;
  return ds;
}

// Episodes that always command the same action, for the convergence test.
Dataset constant_action_dataset(int count, uint64_t base) {
  const ScenarioConfig scenario = small_jitter_scenario();
  Dataset ds;
  ds.meta.env_config_hash = config_hash(*cfg5);
  ds.meta.object_set = canonical_object_names();
  ds.meta.scenario = scenario;
  ds.meta.policy_name = "constant";
  ds.meta.base_seed = base;
  for (int e = 0; e < count; ++e) {
    const uint64_t seed = derive_seed(base, e);
    const EpisodeSetup setup = sample_episode(*cfg5, scenario, seed);
    Action7 a;
    a.d_pos = Eigen::Vector3d(0.004, -0.002, 0.0);
    a.grip = 0.5;
    std::vector<std::array<float, 15>> states;
    std::vector<std::array<float, 7>> actions;
    EnvState state = env_reset(cfg5, setup.placement, setup.instruction, seed);
    for (int t = 0; t < cfg5->workspace.horizon; ++t) {
      states.push_back(encode_state15(state));
      actions.push_back(a.to_f32());
      state = env_step(state, a.quantized()).first;
    }
    ds.episodes.push_back(make_trajectory(e, setup.instruction.text, scenario.name(),
                                          seed, true, states, actions, 20.0));
  }
  ds.meta.total_episodes = count;
  return ds;
}

}  // namespace

TEST_CASE("bc config invariants") {
  BCConfig c;
  c.chunk_size = 8;
  c.execution_horizon = 16;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.execution_horizon = 8;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("chunk extraction: counts, padding, masks") {
  const Dataset ds = oracle_dataset(small_jitter_scenario(), 1, 42);
  BCConfig bc;
  bc.chunk_size = 16;
  const ChunkDataset data = build_training_set(cfg5, ds, bc);
  // one sample per (episode, t) with stride 1
  CHECK(data.size() == 50);

  // sample at t=40 with chunk 16 has 6 padded steps
  const ChunkSample s40 = data.sample(40);
  CHECK(s40.mask.sum() == doctest::Approx(10.0));
  for (int c = 0; c < 10; ++c) CHECK(s40.mask[c] == 1.0);
  for (int c = 10; c < 16; ++c) CHECK(s40.mask[c] == 0.0);
  // padding repeats the final action
  const auto& last_action = ds.episodes[0].frames[49].action;
  for (int c = 10; c < 16; ++c) {
    for (int k = 0; k < 7; ++k) {
      CHECK(s40.target_chunk(c, k) == doctest::Approx(last_action[k]));
    }
  }

  // chunk 8 at t=0: targets a_0..a_7, no padding
  BCConfig bc8 = bc;
  bc8.chunk_size = 8;
  bc8.execution_horizon = 8;
  const ChunkDataset data8 = build_training_set(cfg5, ds, bc8);
  const ChunkSample s0 = data8.sample(0);
  CHECK(s0.mask.sum() == doctest::Approx(8.0));
  for (int c = 0; c < 8; ++c) {
    for (int k = 0; k < 7; ++k) {
      CHECK(s0.target_chunk(c, k) ==
            doctest::Approx(ds.episodes[0].frames[c].action[k]));
    }
  }
}

TEST_CASE("grounded and identity-blind share targets, differ in observations") {
  const Dataset ds = oracle_dataset(small_jitter_scenario(), 2, 43);
  BCConfig blind;
  blind.obs_mode = ObsMode::IdentityBlind;
  BCConfig grounded;
  grounded.obs_mode = ObsMode::Grounded;
  const ChunkDataset a = build_training_set(cfg5, ds, blind);
  const ChunkDataset b = build_training_set(cfg5, ds, grounded);
  CHECK(a.targets == b.targets);
  CHECK(a.mask == b.mask);
  CHECK(a.obs != b.obs);
  // blind slots hold the same multiset of values per row
  CHECK(a.obs.rowwise().sum().isApprox(b.obs.rowwise().sum(), 1e-12));
}

TEST_CASE("empty dataset is an error") {
  Dataset empty;
  empty.meta.scenario = small_jitter_scenario();
  BCConfig bc;
  CHECK_THROWS_AS(build_training_set(cfg5, empty, bc), std::invalid_argument);
}

TEST_CASE("masked loss ignores padded positions") {
  Mlp net({5, 8, 14}, 3);
  Rng rng(4);
  MatrixXd obs = MatrixXd::Random(6, 5);
  MatrixXd targets = MatrixXd::Random(6, 14);
  MatrixXd mask(6, 2);
  for (int i = 0; i < 6; ++i) {
    mask(i, 0) = 1.0;
    mask(i, 1) = i % 2 ? 1.0 : 0.0;
  }
  const double base = bc_loss(net, obs, targets, mask, nullptr);
  // scribble over the padded targets; the loss must not move
  MatrixXd scribbled = targets;
  for (int i = 0; i < 6; ++i) {
    if (mask(i, 1) == 0.0) {
      for (int k = 7; k < 14; ++k) scribbled(i, k) = rng.uniform(-100, 100);
    }
  }
  CHECK(bc_loss(net, obs, scribbled, mask, nullptr) == base);
}

TEST_CASE("bc gradients match central finite differences") {
  Mlp net({4, 6, 14}, 9);
  MatrixXd obs = MatrixXd::Random(5, 4);
  MatrixXd targets = MatrixXd::Random(5, 14);
  MatrixXd mask = MatrixXd::Ones(5, 2);
  mask(2, 1) = 0.0;

  Mlp grads = net.zeros_like();
  bc_loss(net, obs, targets, mask, &grads);
  auto loss_at = [&](const VectorXd& p) {
    Mlp probe = net;
    probe.unflatten(p);
    return bc_loss(probe, obs, targets, mask, nullptr);
  };
  const VectorXd numeric = finite_difference_gradient(loss_at, net.flatten(), 1e-4);
  CHECK(max_relative_error(grads.flatten(), numeric) < 1e-3);
}

TEST_CASE("constant-action demonstrations are learned to near-zero loss") {
  const Dataset ds = constant_action_dataset(4, 77);
  BCConfig bc;
  bc.chunk_size = 8;
  bc.execution_horizon = 8;
  bc.epochs = 60;
  bc.learning_rate = 3e-3;
  bc.batch_size = 64;
  const ChunkDataset data = build_training_set(cfg5, ds, bc);
  const BCTrainResult result = bc_train(bc, data, 5);
  CHECK(result.epoch_losses.back() < 1e-4);
}

TEST_CASE("zero epochs returns the initialized net") {
  const Dataset ds = oracle_dataset(small_jitter_scenario(), 1, 44);
  BCConfig bc;
  bc.epochs = 0;
  const ChunkDataset data = build_training_set(cfg5, ds, bc);
  const BCTrainResult result = bc_train(bc, data, 5);
  const Mlp fresh = Mlp({data.obs_dim(), bc.hidden_size, bc.hidden_size,
                         bc.chunk_size * 7},
                        mix64(bc.seed));
  CHECK(result.net.net.flatten() == fresh.flatten());
}

TEST_CASE("chunked execution: prediction counts over a 50-step episode") {
  const ScenarioConfig scenario = small_jitter_scenario();
  struct Case {
    int chunk, horizon, expected;
  };
  // horizon = chunk: one prediction per chunk_size steps; horizon 1:
  // re-predict every step; horizon 4 and chunk 16: ceil(50/4) = 13
  for (const Case c : {Case{16, 16, 4}, Case{16, 1, 50}, Case{16, 4, 13},
                       Case{8, 8, 7}}) {
    BCConfig bc;
    bc.chunk_size = c.chunk;
    bc.execution_horizon = c.horizon;
    BCNet net;
    net.config = bc;
    net.object_count = 5;
    net.net = Mlp({flat_obs_dim(5), 8, c.chunk * 7}, 5);
    BCPolicy policy(net);
    run_episode(cfg5, scenario, policy, derive_seed(9, 1));
    INFO("chunk ", c.chunk, " horizon ", c.horizon);
    CHECK(policy.prediction_count() == c.expected);
  }
}

TEST_CASE("grid search returns the argmax with deterministic tie-breaks") {
  const Dataset ds = oracle_dataset(small_jitter_scenario(), 1, 45);
  auto make = [](int chunk, int horizon) {
    BCConfig c;
    c.chunk_size = chunk;
    c.execution_horizon = horizon;
    c.epochs = 0;  // scoring is stubbed; keep training free
    return c;
  };

  // single config: returned as-is
  auto score_fixed = [](const BCNet&) { return 0.5; };
  const auto single = grid_search({make(16, 8)}, cfg5, ds, score_fixed);
  CHECK(single.best.chunk_size == 16);

  // argmax wins
  int call = 0;
  auto score_seq = [&](const BCNet&) { return call++ == 0 ? 0.40 : 0.10; };
  const auto argmax = grid_search({make(8, 4), make(16, 8)}, cfg5, ds, score_seq);
  CHECK(argmax.best.chunk_size == 8);
  CHECK(argmax.rows.size() == 2);

  // ties break toward the smaller chunk, then the smaller horizon
  auto score_tie = [](const BCNet&) { return 0.40; };
  const auto tie =
      grid_search({make(16, 8), make(8, 8), make(8, 4)}, cfg5, ds, score_tie);
  CHECK(tie.best.chunk_size == 8);
  CHECK(tie.best.execution_horizon == 4);

  CHECK_THROWS_AS(grid_search({}, cfg5, ds, score_fixed), std::invalid_argument);

  const std::string csv = grid_search_csv(tie);
  CHECK(csv.find("8,4,64,identity_blind,0.400000,1") != std::string::npos);
}

TEST_CASE("bc checkpoints round trip") {
  const Dataset ds = oracle_dataset(small_jitter_scenario(), 1, 46);
  BCConfig bc;
  bc.epochs = 0;
  const ChunkDataset data = build_training_set(cfg5, ds, bc);
  const BCTrainResult result = bc_train(bc, data, 5);
  const auto dir =
      (std::filesystem::temp_directory_path() / "pickbench_bc_ckpt").string();
  std::filesystem::remove_all(dir);
  save_bc_net(dir, result.net, {});
  const BCNet loaded = load_bc_net(dir);
  CHECK(loaded.net.flatten() == result.net.net.flatten());
  CHECK(loaded.config.chunk_size == bc.chunk_size);
  CHECK(loaded.object_count == 5);
  std::filesystem::remove_all(dir);
}
