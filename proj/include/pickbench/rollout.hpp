// Episode harness shared by evaluation, data generation and the recorder:
// one code path from (scenario, episode seed) to frames and outcomes, so
// in-process and networked recordings are bit-identical.
#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "pickbench/env.hpp"
#include "pickbench/metrics.hpp"
#include "pickbench/placement.hpp"
#include "pickbench/policy.hpp"

namespace pickbench {

enum class ScenarioMode { Ladder, Compositional };

// Serializable description of an episode distribution.
struct ScenarioConfig {
  ScenarioMode mode = ScenarioMode::Ladder;
  RegimeKind regime = RegimeKind::SmallJitter;
  int object_count = 5;
  // compositional settings
  uint64_t split_seed = 0;
  SplitPhase phase = SplitPhase::Train;
  double canonical_bias = 0.7;

  std::string name() const;
  Regime regime_config() const { return Regime::from_kind(regime); }
};

void to_json(nlohmann::json& j, const ScenarioConfig& s);
void from_json(const nlohmann::json& j, ScenarioConfig& s);

struct EpisodeSetup {
  PlacementSample placement;
  Instruction instruction;
  uint64_t episode_seed = 0;
};

// Instruction uniform over present objects; placement from the scenario
// distribution. Pure function of (cfg, scenario, episode_seed).
EpisodeSetup sample_episode(const EnvConfig& cfg, const ScenarioConfig& scenario,
                            uint64_t episode_seed);

struct EpisodeResult {
  EnvState final_state;
  EpisodeOutcome outcome;
  // only filled when record_frames is set
  std::vector<std::array<float, 15>> states;
  std::vector<std::array<float, 7>> actions;
};

// Runs one full episode. When `quantize_actions` is set, actions are passed
// through float32 before stepping, so recorded files replay bit-exactly.
EpisodeResult run_episode(EnvConfigPtr cfg, const ScenarioConfig& scenario,
                          Policy& policy, uint64_t episode_seed,
                          bool record_frames = false, bool quantize_actions = false);

// N episodes with counter-based seeds derive_seed(base_seed, i).
std::vector<EpisodeOutcome> evaluate_policy(EnvConfigPtr cfg,
                                            const ScenarioConfig& scenario,
                                            Policy& policy, int episodes,
                                            uint64_t base_seed);

double success_rate(const std::vector<EpisodeOutcome>& outcomes);
double grasp_any_rate(const std::vector<EpisodeOutcome>& outcomes);
double reach_rate(const std::vector<EpisodeOutcome>& outcomes);

// Region centroids memorized by the shortcut policy under this scenario:
// the canonical map for ladder scenarios, each object's first train region
// for compositional ones.
std::vector<Eigen::Vector2d> shortcut_centroids(const EnvConfig& cfg,
                                                const ScenarioConfig& scenario);

}  // namespace pickbench
