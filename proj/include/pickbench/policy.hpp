// Policy interface plus the four scripted reference policies. Their
// expected metrics are analytically checkable, which makes them harness
// regression tests as much as baselines.
#pragma once

#include <memory>
#include <vector>

#include "pickbench/env.hpp"
#include "pickbench/rng.hpp"

namespace pickbench {

class Policy {
 public:
  virtual ~Policy() = default;
  // Called once per episode with the episode seed; derives any per-episode
  // randomness (noise streams, identity-blind slot permutation).
  virtual void reset(uint64_t episode_seed) { (void)episode_seed; }
  virtual Action7 act(const EnvState& state) = 0;
};

// Shared proportional controller: travel toward a planar target at clamp
// speed, descend to grasp height once within kDescendRadius, close the grip
// within kCloseRadius. Closing that near the target center guarantees the
// intended object is the nearest capture candidate for every radius pair.
constexpr double kDescendRadius = 0.03;
constexpr double kCloseRadius = 0.01;
constexpr double kGraspHeight = 0.01;

Action7 approach_and_grasp(const Eigen::Vector2d& target_xy,
                           const Eigen::Vector3d& gripper_pos, double clamp);

// Privileged expert: drives to the instructed object's exact position.
class OraclePolicy : public Policy {
 public:
  Action7 act(const EnvState& state) override;
};

// Region-shortcut baseline: memorizes one region centroid per instruction
// and grasps whichever slot lies nearest that centroid. Consumes only the
// identity-blind observation.
class ShortcutPolicy : public Policy {
 public:
  explicit ShortcutPolicy(std::vector<Eigen::Vector2d> centroid_by_object)
      : centroids_(std::move(centroid_by_object)) {}
  void reset(uint64_t episode_seed) override;
  Action7 act(const EnvState& state) override;

 private:
  std::vector<Eigen::Vector2d> centroids_;
  uint64_t episode_seed_ = 0;
  std::vector<int> perm_;
};

// Grasps the slot nearest the gripper, ignoring the instruction target.
class NearestPolicy : public Policy {
 public:
  void reset(uint64_t episode_seed) override;
  Action7 act(const EnvState& state) override;

 private:
  uint64_t episode_seed_ = 0;
  std::vector<int> perm_;
};

// Floor baseline: uniform motion in the clamp ball, uniform grip.
class RandomPolicy : public Policy {
 public:
  RandomPolicy() : rng_(0) {}
  void reset(uint64_t episode_seed) override;
  Action7 act(const EnvState& state) override;

 private:
  Rng rng_;
};

}  // namespace pickbench
