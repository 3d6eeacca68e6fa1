#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "pickbench/env.hpp"
#include "pickbench/placement.hpp"
#include "pickbench/rng.hpp"

using namespace pickbench;

namespace {

EnvConfigPtr make_cfg(int k = 5) {
  return std::make_shared<const EnvConfig>(EnvConfig::defaults(k));
}

// A hand-placed full-random sample with generous gaps.
PlacementSample spread_placement(const EnvConfig& cfg) {
  PlacementSample p;
  p.regime = Regime::full_random();
  const std::vector<Eigen::Vector2d> spots = {
      {0.10, 0.15}, {-0.10, 0.15}, {0.0, 0.0}, {-0.10, -0.15}, {0.10, -0.15}};
  for (int i = 0; i < cfg.object_count(); ++i) p.positions.push_back(spots[i]);
  return p;
}

EnvState fresh_state(EnvConfigPtr cfg, int target = 0, uint64_t seed = 1) {
  return env_reset(cfg, spread_placement(*cfg), Instruction::for_target(*cfg, target),
                   seed);
}

bool states_equal(const EnvState& a, const EnvState& b) {
  if (a.step != b.step || a.grasp_any_latch != b.grasp_any_latch) return false;
  if (a.gripper.position != b.gripper.position) return false;
  if (a.gripper.width != b.gripper.width) return false;
  if (a.gripper.velocity != b.gripper.velocity) return false;
  for (size_t i = 0; i < a.objects.size(); ++i) {
    if (a.objects[i].position != b.objects[i].position) return false;
    if (a.objects[i].attached != b.objects[i].attached) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("reset puts the gripper home, open, unattached") {
  auto cfg = make_cfg();
  const EnvState s = fresh_state(cfg);
  CHECK(s.gripper.position == Eigen::Vector3d(0.0, -0.30, 0.10));
  CHECK(s.gripper.width == doctest::Approx(0.08));
  CHECK(s.step == 0);
  CHECK_FALSE(s.grasp_any_latch);
  CHECK(s.attached_object() == -1);
}

TEST_CASE("reset rejects a target that is not in the scene") {
  auto cfg = make_cfg();
  CHECK_THROWS_AS(Instruction::for_target(*cfg, 7), std::invalid_argument);
  Instruction bad{3, "grasp the apple"};  // text does not match target
  CHECK_THROWS_AS(env_reset(cfg, spread_placement(*cfg), bad, 1),
                  std::invalid_argument);
}

TEST_CASE("reset is bit-deterministic") {
  auto cfg = make_cfg();
  const EnvState a = fresh_state(cfg, 2, 77);
  const EnvState b = fresh_state(cfg, 2, 77);
  CHECK(states_equal(a, b));
}

TEST_CASE("translation clamp: oversized action advances exactly 0.02") {
  auto cfg = make_cfg();
  EnvState s = fresh_state(cfg);
  Action7 a;
  a.d_pos = Eigen::Vector3d(0.5, 0.0, 0.0);
  auto [next, info] = env_step(s, a);
  CHECK(next.gripper.position.x() == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(next.gripper.position.y() == doctest::Approx(-0.30));
  // velocity = displacement * control rate
  CHECK(next.gripper.velocity.x() == doctest::Approx(0.02 * 20.0));
}

TEST_CASE("closing far from every object attaches nothing") {
  auto cfg = make_cfg();
  EnvState s = fresh_state(cfg);
  // gripper 0.10 m planar from the nearest object, at table height
  s.gripper.position = Eigen::Vector3d(0.10, -0.05, 0.01);
  Action7 a;
  a.grip = -1.0;
  auto [next, info] = env_step(s, a);
  CHECK(next.attached_object() == -1);
  CHECK_FALSE(next.grasp_any_latch);
}

TEST_CASE("apple attaches at planar distance 0.050") {
  // capture predicate: 0.050 <= radius 0.040 + margin 0.015
  auto cfg = make_cfg();
  EnvState s = fresh_state(cfg, 0);
  const Eigen::Vector2d apple = s.objects[0].position.head<2>();
  s.gripper.position = Eigen::Vector3d(apple.x() + 0.050, apple.y(), 0.01);
  Action7 close;
  close.grip = -1.0;
  auto [next, info] = env_step(s, close);
  CHECK(info.attached == 0);
  CHECK(next.objects[0].attached);
  CHECK(next.grasp_any_latch);
  // collocation after the attaching step
  CHECK((next.objects[0].position.head<2>() - next.gripper.position.head<2>()).norm() ==
        doctest::Approx(0.0));
}

TEST_CASE("attachment requires the gripper near the table") {
  auto cfg = make_cfg();
  EnvState s = fresh_state(cfg, 0);
  const Eigen::Vector2d apple = s.objects[0].position.head<2>();
  s.gripper.position = Eigen::Vector3d(apple.x(), apple.y(), 0.08);  // too high
  Action7 close;
  close.grip = -1.0;
  auto [next, info] = env_step(s, close);
  CHECK(next.attached_object() == -1);
}

TEST_CASE("opening past the release width drops the object") {
  auto cfg = make_cfg();
  EnvState s = fresh_state(cfg, 0);
  const Eigen::Vector2d apple = s.objects[0].position.head<2>();
  s.gripper.position = Eigen::Vector3d(apple.x(), apple.y(), 0.01);
  Action7 close;
  close.grip = -1.0;
  auto [h1, i1] = env_step(s, close);
  REQUIRE(h1.attached_object() == 0);
  auto [held, i1b] = env_step(h1, close);  // width settles at 0
  REQUIRE(held.gripper.width == doctest::Approx(0.0));
  Action7 open;
  open.grip = 1.0;
  auto [s2, i2] = env_step(held, open);   // width 0 -> 0.04, not yet released
  CHECK(s2.attached_object() == 0);
  auto [s3, i3] = env_step(s2, open);     // width 0.04 -> 0.08, released
  CHECK(s3.attached_object() == -1);
  CHECK(i3.released == 0);
  CHECK(s3.objects[0].position.z() == doctest::Approx(0.0));
  // latch is monotone: stays set after release
  CHECK(s3.grasp_any_latch);
}

TEST_CASE("stepping a terminal state is an error") {
  auto cfg = make_cfg();
  EnvState s = fresh_state(cfg);
  Action7 a;
  for (int t = 0; t < cfg->workspace.horizon; ++t) s = env_step(s, a).first;
  CHECK(s.terminal());
  CHECK_THROWS_AS(env_step(s, a), std::logic_error);
}

TEST_CASE("non-finite actions are rejected") {
  auto cfg = make_cfg();
  EnvState s = fresh_state(cfg);
  Action7 a;
  a.d_pos.x() = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(env_step(s, a), std::invalid_argument);
}

TEST_CASE("state15 layout") {
  auto cfg = make_cfg();
  EnvState s = fresh_state(cfg);
  s.gripper.position = Eigen::Vector3d(0.1, -0.2, 0.05);
  s.gripper.velocity = Eigen::Vector3d::Zero();
  s.gripper.width = 0.08;
  const auto v = encode_state15(s);
  const std::array<float, 15> expected = {0.1f, -0.2f, 0.05f, 1.f, 0.f, 0.f, 0.f,
                                          0.f,  0.f,   0.f,   0.f, 0.f, 0.f, 0.f,
                                          0.08f};
  CHECK(v == expected);

  // two states differing only in width differ only at index 14
  EnvState s2 = s;
  s2.gripper.width = 0.03;
  const auto v2 = encode_state15(s2);
  for (int i = 0; i < 14; ++i) CHECK(v[i] == v2[i]);
  CHECK(v[14] != v2[14]);
}

TEST_CASE("privileged observation: identity order and one-hot") {
  auto cfg = make_cfg();
  EnvState s = fresh_state(cfg, 2);
  const PrivilegedObs obs = observe_privileged(s);
  CHECK(obs.instruction_onehot == std::vector<double>{0, 0, 1, 0, 0});
  CHECK(obs.object_xy[0] == s.objects[0].position.head<2>());
  CHECK(obs.target_id() == 2);

  auto cfg1 = make_cfg(1);
  const EnvState s1 = fresh_state(cfg1, 0);
  const PrivilegedObs obs1 = observe_privileged(s1);
  CHECK(obs1.object_xy.size() == 1);
  CHECK(obs1.instruction_onehot.size() == 1);
}

TEST_CASE("identity-blind observation permutes slots") {
  auto cfg = make_cfg();
  EnvState s = fresh_state(cfg, 1);
  const BlindObs ident = observe_identity_blind(s, {0, 1, 2, 3, 4});
  const PrivilegedObs priv = observe_privileged(s);
  for (int i = 0; i < 5; ++i) CHECK(ident.slot_xy[i] == priv.object_xy[i]);

  const BlindObs rev = observe_identity_blind(s, {4, 3, 2, 1, 0});
  CHECK(rev.slot_xy[0] == priv.object_xy[4]);
  CHECK(rev.instruction_onehot == priv.instruction_onehot);

  // any permutation preserves the multiset of positions
  const auto perm = blind_permutation(5, 99);
  const BlindObs blind = observe_identity_blind(s, perm);
  std::multiset<std::pair<double, double>> a, b;
  for (int i = 0; i < 5; ++i) {
    a.insert({blind.slot_xy[i].x(), blind.slot_xy[i].y()});
    b.insert({priv.object_xy[i].x(), priv.object_xy[i].y()});
  }
  CHECK(a == b);

  CHECK_THROWS_AS(observe_identity_blind(s, {0, 1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(observe_identity_blind(s, {0, 0, 2, 3, 4}), std::invalid_argument);
}

TEST_CASE("random-action fuzz: clamp, latch monotonicity, single attachment") {
  auto cfg = make_cfg();
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    EnvState s = fresh_state(cfg, trial % 5, 1000 + trial);
    bool latch_seen = false;
    for (int t = 0; t < cfg->workspace.horizon; ++t) {
      Action7 a;
      a.d_pos = Eigen::Vector3d(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1),
                                rng.uniform(-0.1, 0.1));
      a.grip = rng.uniform(-1.0, 1.0);
      const Eigen::Vector3d before = s.gripper.position;
      s = env_step(s, a).first;
      CHECK((s.gripper.position - before).norm() <=
            cfg->workspace.translation_clamp + 1e-12);
      int attached = 0;
      for (const auto& o : s.objects) attached += o.attached ? 1 : 0;
      CHECK(attached <= 1);
      if (latch_seen) CHECK(s.grasp_any_latch);
      latch_seen = s.grasp_any_latch;
    }
  }
}

TEST_CASE("trajectories are bit-deterministic under equal inputs") {
  auto cfg = make_cfg();
  for (uint64_t seed : {3ULL, 14ULL}) {
    EnvState a = fresh_state(cfg, 1, seed);
    EnvState b = fresh_state(cfg, 1, seed);
    Rng ra(seed), rb(seed);
    for (int t = 0; t < cfg->workspace.horizon; ++t) {
      Action7 act1, act2;
      act1.d_pos = Eigen::Vector3d(ra.uniform(-0.05, 0.05), ra.uniform(-0.05, 0.05),
                                   ra.uniform(-0.05, 0.05));
      act1.grip = ra.uniform(-1, 1);
      act2.d_pos = Eigen::Vector3d(rb.uniform(-0.05, 0.05), rb.uniform(-0.05, 0.05),
                                   rb.uniform(-0.05, 0.05));
      act2.grip = rb.uniform(-1, 1);
      a = env_step(a, act1).first;
      b = env_step(b, act2).first;
      CHECK(states_equal(a, b));
    }
  }
}

TEST_CASE("instruction text round trip") {
  auto cfg = make_cfg();
  for (int i = 0; i < 5; ++i) {
    const Instruction ins = Instruction::for_target(*cfg, i);
    const Instruction parsed = Instruction::parse(*cfg, ins.text);
    CHECK(parsed.target_id == i);
  }
  CHECK(Instruction::for_target(*cfg, 2).text == "grasp the rubiks_cube");
  CHECK_THROWS_AS(Instruction::parse(*cfg, "pick up the apple"),
                  std::invalid_argument);
}
