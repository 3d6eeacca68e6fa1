// Task-ladder placement distributions: jitter regimes around canonical
// region centers, full-workspace rejection sampling, and compositional
// object-region splits with held-out pairings.
#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "pickbench/config.hpp"

namespace pickbench {

struct PlacementError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class RegimeKind { SmallJitter, MediumJitter, LargeJitter, FullRandom };

struct Regime {
  RegimeKind kind = RegimeKind::SmallJitter;
  Eigen::Vector2d region_dims = Eigen::Vector2d::Zero();  // full box side lengths

  bool is_jitter() const { return kind != RegimeKind::FullRandom; }
  Eigen::Vector2d half_extents() const { return 0.5 * region_dims; }
  std::string name() const;

  static Regime small_jitter() { return {RegimeKind::SmallJitter, {0.04, 0.06}}; }
  static Regime medium_jitter() { return {RegimeKind::MediumJitter, {0.08, 0.12}}; }
  static Regime large_jitter() { return {RegimeKind::LargeJitter, {0.12, 0.16}}; }
  static Regime full_random() { return {RegimeKind::FullRandom, {0.0, 0.0}}; }
  static Regime from_kind(RegimeKind k);
  static Regime from_name(const std::string& name);
};

struct Region {
  int region_id = 0;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Vector2d half_extents = Eigen::Vector2d::Zero();
};

// Five regions at fixed canonical centers; half extents taken from the
// regime (largest ladder regime by default, which is the footprint whose
// workspace containment matters).
std::vector<Region> canonical_layout(const Regime& regime = Regime::large_jitter());

// Default object -> region map: rubiks_cube at the center region, the rest
// at the four corners. Restricted to the first `object_count` objects.
std::vector<int> default_region_assignment(int object_count);

struct PlacementSample {
  std::vector<Eigen::Vector2d> positions;  // indexed by object_id
  Regime regime;
  std::optional<std::vector<int>> region_assignment;  // object -> region
  uint64_t seed = 0;

  // Checks collision gaps and containment; throws std::invalid_argument.
  void validate(const EnvConfig& cfg) const;
};

// Uniform placement inside each object's assigned region box. Under
// SmallJitter the object assigned to the center region sits exactly at the
// origin. Collisions are resolved by per-object re-draws (up to 1000).
PlacementSample sample_jitter(const EnvConfig& cfg, const Regime& regime,
                              const std::vector<int>& assignment, uint64_t seed);

// Whole-sample rejection: all positions uniform in per-object shrunk
// workspaces, accepted only when every pairwise gap clears the collision
// margin. Up to 10000 attempts.
PlacementSample sample_full_random(const EnvConfig& cfg, uint64_t seed);

struct PairingSplit {
  std::vector<std::array<int, 3>> train_regions;  // per object
  std::vector<std::array<int, 2>> eval_regions;
  uint64_t seed = 0;

  void validate() const;
};

// Circulant construction: object i trains on regions {i, i+1, i+2 mod 5}
// and evaluates on the remaining two. A nonzero seed permutes which object
// gets which row; seed 0 is the canonical identity split.
PairingSplit make_pairing_split(uint64_t seed);

enum class SplitPhase { Train, Eval };

// Region assignment is a permutation: every region holds exactly one
// object. Train draws the canonical pairing (each object at its first
// train region) with probability `canonical_bias`, otherwise a random
// perfect matching within train regions; Eval places the instructed object
// in one of its held-out regions and the rest anywhere. Positions then
// jitter inside the assigned regions.
PlacementSample sample_compositional(const EnvConfig& cfg, const PairingSplit& split,
                                     SplitPhase phase, const Regime& regime,
                                     int instructed_id, double canonical_bias,
                                     uint64_t seed);

void to_json(nlohmann::json& j, const Regime& r);
void from_json(const nlohmann::json& j, Regime& r);

}  // namespace pickbench
