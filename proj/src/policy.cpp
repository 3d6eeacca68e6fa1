#include "pickbench/policy.hpp"

#include <cmath>
#include <limits>

namespace pickbench {

Action7 approach_and_grasp(const Eigen::Vector2d& target_xy,
                           const Eigen::Vector3d& gripper_pos, double clamp) {
  Action7 a;
  const Eigen::Vector2d diff = target_xy - gripper_pos.head<2>();
  const double dist = diff.norm();

  Eigen::Vector3d goal(target_xy.x(), target_xy.y(), gripper_pos.z());
  if (dist <= kDescendRadius) goal.z() = kGraspHeight;

  Eigen::Vector3d step = goal - gripper_pos;
  const double norm = step.norm();
  if (norm > clamp) step *= clamp / norm;
  a.d_pos = step;
  a.grip = dist <= kCloseRadius ? -1.0 : 1.0;
  return a;
}

Action7 OraclePolicy::act(const EnvState& state) {
  const PrivilegedObs obs = observe_privileged(state);
  const Eigen::Vector2d& target = obs.object_xy[obs.target_id()];
  return approach_and_grasp(target, obs.gripper_pos,
                            state.config->workspace.translation_clamp);
}

void ShortcutPolicy::reset(uint64_t episode_seed) {
  episode_seed_ = episode_seed;
  perm_.clear();
}

Action7 ShortcutPolicy::act(const EnvState& state) {
  const int n = state.config->object_count();
  if (perm_.empty()) {
    perm_ = blind_permutation(n, substream(episode_seed_, kStreamBlindPerm));
  }
  const BlindObs obs = observe_identity_blind(state, perm_);
  const Eigen::Vector2d& centroid = centroids_.at(obs.target_id());

  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n; ++s) {
    const double d = (obs.slot_xy[s] - centroid).norm();
    if (d < best_dist) {
      best = s;
      best_dist = d;
    }
  }
  return approach_and_grasp(obs.slot_xy[best], obs.gripper_pos,
                            state.config->workspace.translation_clamp);
}

void NearestPolicy::reset(uint64_t episode_seed) {
  episode_seed_ = episode_seed;
  perm_.clear();
}

Action7 NearestPolicy::act(const EnvState& state) {
  const int n = state.config->object_count();
  if (perm_.empty()) {
    perm_ = blind_permutation(n, substream(episode_seed_, kStreamBlindPerm));
  }
  const BlindObs obs = observe_identity_blind(state, perm_);
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n; ++s) {
    const double d = (obs.slot_xy[s] - obs.gripper_pos.head<2>()).norm();
    if (d < best_dist) {
      best = s;
      best_dist = d;
    }
  }
  return approach_and_grasp(obs.slot_xy[best], obs.gripper_pos,
                            state.config->workspace.translation_clamp);
}

void RandomPolicy::reset(uint64_t episode_seed) {
  rng_ = Rng(substream(episode_seed, kStreamPolicy));
}

Action7 RandomPolicy::act(const EnvState& state) {
  const double clamp = state.config->workspace.translation_clamp;
  Action7 a;
  // volume-uniform point in the clamp ball
  Eigen::Vector3d dir(rng_.normal(), rng_.normal(), rng_.normal());
  const double norm = dir.norm();
  if (norm > 1e-12) dir /= norm;
  const double radius = clamp * std::cbrt(rng_.uniform());
  a.d_pos = dir * radius;
  a.grip = rng_.uniform(-1.0, 1.0);
  return a;
}

}  // namespace pickbench
