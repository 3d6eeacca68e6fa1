// Deterministic kinematic tabletop environment: disc objects on a plane, a
// point gripper with width, attachment-based grasping. 20 Hz control over
// 100 Hz substeps, 50-step episodes.
#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pickbench/config.hpp"
#include "pickbench/placement.hpp"

namespace pickbench {

// Cartesian delta action. Rotation components are accepted and recorded but
// inert in the kinematic dynamics.
struct Action7 {
  Eigen::Vector3d d_pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d d_rot = Eigen::Vector3d::Zero();
  double grip = 1.0;  // [-1, 1], -1 fully closed

  std::array<float, 7> to_f32() const;
  static Action7 from_f32(const std::array<float, 7>& v);
  // Round-trips through float32, the precision stored in datasets and
  // streamed over the wire.
  Action7 quantized() const { return from_f32(to_f32()); }
};

struct Instruction {
  int target_id = 0;
  std::string text;

  static Instruction for_target(const EnvConfig& cfg, int target_id);
  // Parses "grasp the <name>" back to a target id.
  static Instruction parse(const EnvConfig& cfg, const std::string& text);
};

struct ObjectState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  bool attached = false;
};

struct GripperState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double width = 0.0;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
};

struct EnvState {
  EnvConfigPtr config;
  std::vector<ObjectState> objects;
  GripperState gripper;
  Instruction instruction;
  int step = 0;
  bool grasp_any_latch = false;
  uint64_t rng_seed = 0;

  int attached_object() const;  // -1 when none
  bool terminal() const { return step >= config->workspace.horizon; }
  double planar_dist_to_instructed() const;
};

struct StepInfo {
  int attached = -1;   // object attached this step, -1 if none
  int released = -1;   // object released this step, -1 if none
  double instructed_planar_dist = 0.0;
};

EnvState env_reset(EnvConfigPtr cfg, const PlacementSample& placement,
                   const Instruction& instruction, uint64_t seed);

std::pair<EnvState, StepInfo> env_step(const EnvState& state, const Action7& action);

// 15-dim proprioceptive vector: [xyz, identity quaternion wxyz, linear
// velocity xyz, three zeros, zero pad, width].
std::array<float, 15> encode_state15(const EnvState& state);

struct PrivilegedObs {
  std::vector<Eigen::Vector2d> object_xy;  // indexed by object_id
  std::vector<double> instruction_onehot;
  Eigen::Vector3d gripper_pos = Eigen::Vector3d::Zero();
  double gripper_width = 0.0;

  int target_id() const;
};

// Same content with object positions in permuted slot order and no identity
// labels; the permutation is fixed per episode.
struct BlindObs {
  std::vector<Eigen::Vector2d> slot_xy;
  std::vector<double> instruction_onehot;
  Eigen::Vector3d gripper_pos = Eigen::Vector3d::Zero();
  double gripper_width = 0.0;

  int target_id() const;
};

PrivilegedObs observe_privileged(const EnvState& state);
BlindObs observe_identity_blind(const EnvState& state, const std::vector<int>& permutation);

// Flat encodings consumed by learners: [slots xy..., onehot..., gripper xyz, width].
Eigen::VectorXd flatten_obs(const PrivilegedObs& obs);
Eigen::VectorXd flatten_obs(const BlindObs& obs);
inline int flat_obs_dim(int object_count) { return 3 * object_count + 4; }

}  // namespace pickbench
