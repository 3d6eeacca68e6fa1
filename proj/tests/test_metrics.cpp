#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "pickbench/metrics.hpp"
#include "pickbench/rng.hpp"

using namespace pickbench;

namespace {

EnvConfigPtr cfg5 = std::make_shared<const EnvConfig>(EnvConfig::defaults(5));

EnvState terminal_state(int target, Eigen::Vector2d gripper_xy,
                        Eigen::Vector2d target_xy, bool attached, bool latch) {
  PlacementSample p;
  p.regime = Regime::full_random();
  p.positions = {{0.10, 0.18}, {-0.10, 0.18}, {0.0, 0.21}, {-0.10, -0.18}, {0.10, -0.18}};
  p.positions[target] = target_xy;
  EnvState s = env_reset(cfg5, p, Instruction::for_target(*cfg5, target), 1);
  s.step = cfg5->workspace.horizon;
  s.gripper.position = Eigen::Vector3d(gripper_xy.x(), gripper_xy.y(), 0.01);
  s.objects[target].attached = attached;
  if (attached) {
    s.objects[target].position.head<2>() = gripper_xy;
    s.grasp_any_latch = true;
  }
  if (latch) s.grasp_any_latch = true;
  return s;
}

OutcomeRecord rec(bool s, bool g, bool r, const std::string& regime,
                  const std::string& policy) {
  OutcomeRecord o;
  o.outcome.success = s;
  o.outcome.grasp_any = g;
  o.outcome.reach = r;
  o.outcome.regime = regime;
  o.outcome.task = "grasp the apple";
  o.policy = policy;
  return o;
}

}  // namespace

TEST_CASE("instructed object held at the end yields (1,1,1)") {
  const EnvState s = terminal_state(0, {0.1, 0.1}, {0.0, 0.0}, true, true);
  const EpisodeOutcome o = episode_outcome(s);
  CHECK(o.success);
  CHECK(o.grasp_any);
  CHECK(o.reach);
}

TEST_CASE("wrong grasp mid-episode then far finish yields (0,1,0)") {
  const EnvState s = terminal_state(0, {0.15, 0.2}, {0.0, 0.0}, false, true);
  const EpisodeOutcome o = episode_outcome(s);
  CHECK_FALSE(o.success);
  CHECK(o.grasp_any);
  CHECK_FALSE(o.reach);
}

TEST_CASE("reach is inclusive at exactly 5 cm") {
  const EnvState s = terminal_state(0, {0.0, 0.0}, {0.03, 0.04}, false, false);
  const EpisodeOutcome o = episode_outcome(s);
  CHECK(o.reach);
  CHECK_FALSE(o.success);
}

TEST_CASE("truncated trajectories are rejected") {
  EnvState s = terminal_state(0, {0.0, 0.0}, {0.03, 0.04}, false, false);
  s.step = 10;
  CHECK_THROWS_AS(episode_outcome(s), std::invalid_argument);
}

TEST_CASE("aggregate computes exact rates") {
  std::vector<OutcomeRecord> records;
  for (int i = 0; i < 100; ++i) {
    records.push_back(rec(i < 90, i < 95, true, "small_jitter", "oracle"));
  }
  const auto rows = aggregate(records, {"regime", "policy"});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n == 100);
  CHECK(rows[0].success.rate == doctest::Approx(0.90));
  CHECK(rows[0].success.count == 90);
  // rate * N recovers the integer count
  CHECK(static_cast<int>(std::lround(rows[0].success.rate * rows[0].n)) == 90);
  // Wilson interval frozen against an independent computation
  CHECK(rows[0].success.ci_low == doctest::Approx(0.8256343384950865).epsilon(1e-9));
  CHECK(rows[0].success.ci_high == doctest::Approx(0.9447708629393249).epsilon(1e-9));
}

TEST_CASE("all-false outcomes aggregate to zero") {
  std::vector<OutcomeRecord> records(10, rec(false, false, false, "full_random", "random"));
  const auto rows = aggregate(records, {"policy"});
  CHECK(rows[0].success.rate == 0.0);
  CHECK(rows[0].grasp_any.rate == 0.0);
  CHECK(rows[0].reach.rate == 0.0);
}

TEST_CASE("single positive outcome has a wide interval") {
  std::vector<OutcomeRecord> records{rec(true, true, true, "small_jitter", "oracle")};
  const auto rows = aggregate(records, {"policy"});
  CHECK(rows[0].success.rate == 1.0);
  CHECK(rows[0].success.ci_low < 0.25);
  CHECK(rows[0].success.ci_high == 1.0);
}

TEST_CASE("rows come back in ladder order, then policy name") {
  std::vector<OutcomeRecord> records;
  for (const char* regime : {"full_random", "large_jitter", "small_jitter"}) {
    for (const char* policy : {"shortcut", "oracle"}) {
      records.push_back(rec(true, true, true, regime, policy));
    }
  }
  const auto rows = aggregate(records, {"regime", "policy"});
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].group.at("regime") == "small_jitter");
  CHECK(rows[0].group.at("policy") == "oracle");
  CHECK(rows[1].group.at("policy") == "shortcut");
  CHECK(rows[2].group.at("regime") == "large_jitter");
  CHECK(rows[4].group.at("regime") == "full_random");
  // a regime with no records is simply absent
  for (const auto& row : rows) CHECK(row.group.at("regime") != "medium_jitter");
}

TEST_CASE("aggregation is permutation invariant") {
  std::vector<OutcomeRecord> records;
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    records.push_back(rec(rng.uniform() < 0.4, rng.uniform() < 0.6,
                          rng.uniform() < 0.8, "medium_jitter", "bc"));
  }
  auto shuffled = records;
  rng.shuffle(shuffled);
  const auto a = aggregate(records, {"regime"});
  const auto b = aggregate(shuffled, {"regime"});
  CHECK(a[0].success.count == b[0].success.count);
  CHECK(a[0].grasp_any.count == b[0].grasp_any.count);
  CHECK(a[0].reach.count == b[0].reach.count);
}

TEST_CASE("empty input is an error") {
  CHECK_THROWS_AS(aggregate({}, {"regime"}), std::invalid_argument);
}

TEST_CASE("outcome log round trip reproduces rates exactly") {
  std::vector<OutcomeRecord> records;
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    OutcomeRecord r = rec(rng.uniform() < 0.5, rng.uniform() < 0.7,
                          rng.uniform() < 0.9, "large_jitter", "nearest");
    r.outcome.episode_seed = derive_seed(9, i);
    r.object_count = 5;
    r.dataset_size = 1000;
    records.push_back(r);
  }
  const auto path = std::filesystem::temp_directory_path() / "pickbench_outcomes.ndjson";
  write_outcome_log(path.string(), records);
  const auto loaded = read_outcome_log(path.string());
  REQUIRE(loaded.size() == records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].outcome.success == records[i].outcome.success);
    CHECK(loaded[i].outcome.episode_seed == records[i].outcome.episode_seed);
    CHECK(loaded[i].dataset_size == records[i].dataset_size);
  }
  const auto a = aggregate(records, {"regime", "policy"});
  const auto b = aggregate(loaded, {"regime", "policy"});
  CHECK(a[0].success.rate == b[0].success.rate);
  std::filesystem::remove(path);
}

TEST_CASE("csv and text reports render every row") {
  std::vector<OutcomeRecord> records;
  for (const char* regime : {"small_jitter", "full_random"}) {
    for (int i = 0; i < 10; ++i) records.push_back(rec(i < 5, true, true, regime, "oracle"));
  }
  const auto rows = aggregate(records, {"regime", "policy"});
  const std::string text = report_text(rows);
  const std::string csv = report_csv(rows);
  CHECK(text.find("small_jitter") != std::string::npos);
  CHECK(csv.find("full_random") != std::string::npos);
  CHECK(csv.find("0.500000") != std::string::npos);
}
