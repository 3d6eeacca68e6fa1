#include "pickbench/env.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace pickbench {

namespace {

bool all_finite(const Action7& a) {
  return a.d_pos.allFinite() && a.d_rot.allFinite() && std::isfinite(a.grip);
}

}  // namespace

std::array<float, 7> Action7::to_f32() const {
  return {static_cast<float>(d_pos.x()), static_cast<float>(d_pos.y()),
          static_cast<float>(d_pos.z()), static_cast<float>(d_rot.x()),
          static_cast<float>(d_rot.y()), static_cast<float>(d_rot.z()),
          static_cast<float>(grip)};
}

Action7 Action7::from_f32(const std::array<float, 7>& v) {
  Action7 a;
  a.d_pos = Eigen::Vector3d(v[0], v[1], v[2]);
  a.d_rot = Eigen::Vector3d(v[3], v[4], v[5]);
  a.grip = v[6];
  return a;
}

Instruction Instruction::for_target(const EnvConfig& cfg, int target_id) {
  if (target_id < 0 || target_id >= cfg.object_count()) {
    throw std::invalid_argument("invalid instruction: target " +
                                std::to_string(target_id) + " not in scene");
  }
  return {target_id, "grasp the " + cfg.object(target_id).name};
}

Instruction Instruction::parse(const EnvConfig& cfg, const std::string& text) {
  const std::string prefix = "grasp the ";
  if (text.rfind(prefix, 0) != 0) {
    throw std::invalid_argument("invalid instruction text: " + text);
  }
  const int id = object_id_by_name(cfg, text.substr(prefix.size()));
  return {id, text};
}

int EnvState::attached_object() const {
  for (size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].attached) return static_cast<int>(i);
  }
  return -1;
}

double EnvState::planar_dist_to_instructed() const {
  const Eigen::Vector3d& g = gripper.position;
  const Eigen::Vector3d& o = objects.at(instruction.target_id).position;
  return (g.head<2>() - o.head<2>()).norm();
}

EnvState env_reset(EnvConfigPtr cfg, const PlacementSample& placement,
                   const Instruction& instruction, uint64_t seed) {
  if (!cfg) throw std::invalid_argument("null env config");
  if (instruction.target_id < 0 || instruction.target_id >= cfg->object_count()) {
    throw std::invalid_argument("invalid instruction: target " +
                                std::to_string(instruction.target_id) +
                                " not in scene");
  }
  const Instruction canonical = Instruction::for_target(*cfg, instruction.target_id);
  if (instruction.text != canonical.text) {
    throw std::invalid_argument("invalid instruction text: " + instruction.text);
  }
  placement.validate(*cfg);

  EnvState s;
  s.config = std::move(cfg);
  s.instruction = instruction;
  s.rng_seed = seed;
  s.objects.resize(s.config->object_count());
  for (int i = 0; i < s.config->object_count(); ++i) {
    s.objects[i].position = Eigen::Vector3d(placement.positions[i].x(),
                                            placement.positions[i].y(),
                                            s.config->workspace.table_z);
    s.objects[i].attached = false;
  }
  const auto& home = s.config->workspace.gripper_home;
  s.gripper.position = Eigen::Vector3d(home[0], home[1], home[2]);
  s.gripper.width = s.config->grasp.max_width;
  s.gripper.velocity = Eigen::Vector3d::Zero();
  s.step = 0;
  s.grasp_any_latch = false;
  return s;
}

std::pair<EnvState, StepInfo> env_step(const EnvState& state, const Action7& action) {
  const EnvConfig& cfg = *state.config;
  if (state.terminal()) {
    throw std::logic_error("episode over: cannot step a terminal state");
  }
  if (!all_finite(action)) {
    throw std::invalid_argument("action components must be finite");
  }

  EnvState next = state;
  StepInfo info;

  // Translation clamp on the full 3D delta norm.
  Eigen::Vector3d delta = action.d_pos;
  const double norm = delta.norm();
  if (norm > cfg.workspace.translation_clamp) {
    delta *= cfg.workspace.translation_clamp / norm;
  }

  const double grip = std::clamp(action.grip, -1.0, 1.0);
  const double commanded_width = 0.5 * (grip + 1.0) * cfg.grasp.max_width;
  const double width_start = state.gripper.width;
  const double width_end =
      width_start + std::clamp(commanded_width - width_start, -cfg.grasp.width_rate,
                               cfg.grasp.width_rate);

  const Eigen::Vector3d start = state.gripper.position;
  const int substeps = cfg.workspace.physics_substeps;
  Eigen::Vector3d pos = start;

  for (int i = 1; i <= substeps; ++i) {
    const double frac = static_cast<double>(i) / substeps;
    pos = start + delta * frac;
    pos.z() = std::max(pos.z(), cfg.workspace.table_z);
    const double width = width_start + (width_end - width_start) * frac;

    int held = next.attached_object();
    if (held >= 0) {
      next.objects[held].position = pos;
      if (width > cfg.grasp.release_width) {
        next.objects[held].attached = false;
        next.objects[held].position.z() = cfg.workspace.table_z;
        info.released = held;
        held = -1;
      }
    }
    if (held < 0 && commanded_width < cfg.grasp.close_width_threshold &&
        std::abs(pos.z() - cfg.workspace.table_z) <= cfg.grasp.z_tolerance) {
      int best = -1;
      double best_dist = 0.0;
      for (int id = 0; id < cfg.object_count(); ++id) {
        const double d =
            (pos.head<2>() - next.objects[id].position.head<2>()).norm();
        if (d <= cfg.capture_radius(id) && (best < 0 || d < best_dist)) {
          best = id;
          best_dist = d;
        }
      }
      if (best >= 0) {
        next.objects[best].attached = true;
        next.objects[best].position = pos;
        next.grasp_any_latch = true;
        info.attached = best;
      }
    }
  }

  next.gripper.position = pos;
  next.gripper.width = width_end;
  next.gripper.velocity = (pos - start) * cfg.workspace.control_hz;
  next.step = state.step + 1;
  info.instructed_planar_dist = next.planar_dist_to_instructed();
  return {std::move(next), info};
}

std::array<float, 15> encode_state15(const EnvState& state) {
  std::array<float, 15> v{};
  const auto& g = state.gripper;
  v[0] = static_cast<float>(g.position.x());
  v[1] = static_cast<float>(g.position.y());
  v[2] = static_cast<float>(g.position.z());
  v[3] = 1.0f;  // identity quaternion wxyz
  v[4] = 0.0f;
  v[5] = 0.0f;
  v[6] = 0.0f;
  v[7] = static_cast<float>(g.velocity.x());
  v[8] = static_cast<float>(g.velocity.y());
  v[9] = static_cast<float>(g.velocity.z());
  // indices 10..13 stay zero
  v[14] = static_cast<float>(g.width);
  return v;
}

int PrivilegedObs::target_id() const {
  for (size_t i = 0; i < instruction_onehot.size(); ++i) {
    if (instruction_onehot[i] > 0.5) return static_cast<int>(i);
  }
  throw std::logic_error("observation has no instruction bit set");
}

int BlindObs::target_id() const {
  for (size_t i = 0; i < instruction_onehot.size(); ++i) {
    if (instruction_onehot[i] > 0.5) return static_cast<int>(i);
  }
  throw std::logic_error("observation has no instruction bit set");
}

PrivilegedObs observe_privileged(const EnvState& state) {
  PrivilegedObs obs;
  const int n = state.config->object_count();
  obs.object_xy.reserve(n);
  for (int i = 0; i < n; ++i) {
    obs.object_xy.push_back(state.objects[i].position.head<2>());
  }
  obs.instruction_onehot.assign(n, 0.0);
  obs.instruction_onehot[state.instruction.target_id] = 1.0;
  obs.gripper_pos = state.gripper.position;
  obs.gripper_width = state.gripper.width;
  return obs;
}

BlindObs observe_identity_blind(const EnvState& state,
                                const std::vector<int>& permutation) {
  const int n = state.config->object_count();
  if (static_cast<int>(permutation.size()) != n) {
    throw std::invalid_argument("permutation length mismatch");
  }
  std::set<int> seen(permutation.begin(), permutation.end());
  if (static_cast<int>(seen.size()) != n || *seen.begin() != 0 ||
      *seen.rbegin() != n - 1) {
    throw std::invalid_argument("permutation is not a bijection on objects");
  }
  BlindObs obs;
  obs.slot_xy.reserve(n);
  for (int slot = 0; slot < n; ++slot) {
    obs.slot_xy.push_back(state.objects[permutation[slot]].position.head<2>());
  }
  obs.instruction_onehot.assign(n, 0.0);
  obs.instruction_onehot[state.instruction.target_id] = 1.0;
  obs.gripper_pos = state.gripper.position;
  obs.gripper_width = state.gripper.width;
  return obs;
}

namespace {

template <typename Obs>
Eigen::VectorXd flatten_impl(const std::vector<Eigen::Vector2d>& xy, const Obs& obs) {
  const int n = static_cast<int>(xy.size());
  Eigen::VectorXd v(flat_obs_dim(n));
  int k = 0;
  for (const auto& p : xy) {
    v[k++] = p.x();
    v[k++] = p.y();
  }
  for (double b : obs.instruction_onehot) v[k++] = b;
  v[k++] = obs.gripper_pos.x();
  v[k++] = obs.gripper_pos.y();
  v[k++] = obs.gripper_pos.z();
  v[k++] = obs.gripper_width;
  return v;
}

}  // namespace

Eigen::VectorXd flatten_obs(const PrivilegedObs& obs) {
  return flatten_impl(obs.object_xy, obs);
}

Eigen::VectorXd flatten_obs(const BlindObs& obs) {
  return flatten_impl(obs.slot_xy, obs);
}

}  // namespace pickbench
