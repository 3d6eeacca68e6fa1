#include "pickbench/rollout.hpp"

#include <stdexcept>

namespace pickbench {

std::string ScenarioConfig::name() const {
  if (mode == ScenarioMode::Ladder) {
    std::string n = regime_config().name();
    if (object_count != 5) n += "_k" + std::to_string(object_count);
    return n;
  }
  const std::string phase_name = phase == SplitPhase::Train ? "id" : "ood";
  return "compositional_" + regime_config().name() + "_" + phase_name;
}

void to_json(nlohmann::json& j, const ScenarioConfig& s) {
  j = nlohmann::json{
      {"mode", s.mode == ScenarioMode::Ladder ? "ladder" : "compositional"},
      {"regime", s.regime_config().name()},
      {"object_count", s.object_count},
  };
  if (s.mode == ScenarioMode::Compositional) {
    j["split_seed"] = s.split_seed;
    j["phase"] = s.phase == SplitPhase::Train ? "train" : "eval";
    j["canonical_bias"] = s.canonical_bias;
  }
}

void from_json(const nlohmann::json& j, ScenarioConfig& s) {
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "ladder") {
    s.mode = ScenarioMode::Ladder;
  } else if (mode == "compositional") {
    s.mode = ScenarioMode::Compositional;
  } else {
    throw std::invalid_argument("unknown scenario mode: " + mode);
  }
  s.regime = Regime::from_name(j.at("regime").get<std::string>()).kind;
  s.object_count = j.at("object_count").get<int>();
  if (s.mode == ScenarioMode::Compositional) {
    s.split_seed = j.at("split_seed").get<uint64_t>();
    s.phase = j.at("phase").get<std::string>() == "train" ? SplitPhase::Train
                                                          : SplitPhase::Eval;
    s.canonical_bias = j.at("canonical_bias").get<double>();
  }
}

EpisodeSetup sample_episode(const EnvConfig& cfg, const ScenarioConfig& scenario,
                            uint64_t episode_seed) {
  if (cfg.object_count() != scenario.object_count) {
    throw std::invalid_argument("scenario object count does not match env config");
  }
  Rng inst_rng(substream(episode_seed, kStreamInstruction));
  const int target = inst_rng.uniform_int(cfg.object_count());
  EpisodeSetup setup;
  setup.episode_seed = episode_seed;
  setup.instruction = Instruction::for_target(cfg, target);

  const uint64_t placement_seed = substream(episode_seed, kStreamPlacement);
  if (scenario.mode == ScenarioMode::Ladder) {
    const Regime regime = scenario.regime_config();
    if (regime.is_jitter()) {
      setup.placement = sample_jitter(
          cfg, regime, default_region_assignment(cfg.object_count()), placement_seed);
    } else {
      setup.placement = sample_full_random(cfg, placement_seed);
    }
  } else {
    const PairingSplit split = make_pairing_split(scenario.split_seed);
    setup.placement =
        sample_compositional(cfg, split, scenario.phase, scenario.regime_config(),
                             target, scenario.canonical_bias, placement_seed);
  }
  return setup;
}

EpisodeResult run_episode(EnvConfigPtr cfg, const ScenarioConfig& scenario,
                          Policy& policy, uint64_t episode_seed, bool record_frames,
                          bool quantize_actions) {
  const EpisodeSetup setup = sample_episode(*cfg, scenario, episode_seed);
  EnvState state = env_reset(cfg, setup.placement, setup.instruction, episode_seed);
  policy.reset(episode_seed);

  EpisodeResult result;
  const int horizon = cfg->workspace.horizon;
  if (record_frames) {
    result.states.reserve(horizon);
    result.actions.reserve(horizon);
  }
  for (int t = 0; t < horizon; ++t) {
    Action7 action = policy.act(state);
    if (quantize_actions) action = action.quantized();
    if (record_frames) {
      result.states.push_back(encode_state15(state));
      result.actions.push_back(action.to_f32());
    }
    auto [next, info] = env_step(state, action);
    state = std::move(next);
  }
  result.outcome = episode_outcome(state);
  result.outcome.regime = scenario.name();
  result.final_state = std::move(state);
  return result;
}

std::vector<EpisodeOutcome> evaluate_policy(EnvConfigPtr cfg,
                                            const ScenarioConfig& scenario,
                                            Policy& policy, int episodes,
                                            uint64_t base_seed) {
  std::vector<EpisodeOutcome> outcomes;
  outcomes.reserve(episodes);
  for (int i = 0; i < episodes; ++i) {
    const uint64_t seed = derive_seed(base_seed, i);
    outcomes.push_back(run_episode(cfg, scenario, policy, seed).outcome);
  }
  return outcomes;
}

namespace {

double rate_of(const std::vector<EpisodeOutcome>& outcomes,
               bool EpisodeOutcome::*field) {
  if (outcomes.empty()) return 0.0;
  int count = 0;
  for (const auto& o : outcomes) count += (o.*field) ? 1 : 0;
  return static_cast<double>(count) / outcomes.size();
}

}  // namespace

double success_rate(const std::vector<EpisodeOutcome>& outcomes) {
  return rate_of(outcomes, &EpisodeOutcome::success);
}
double grasp_any_rate(const std::vector<EpisodeOutcome>& outcomes) {
  return rate_of(outcomes, &EpisodeOutcome::grasp_any);
}
double reach_rate(const std::vector<EpisodeOutcome>& outcomes) {
  return rate_of(outcomes, &EpisodeOutcome::reach);
}

std::vector<Eigen::Vector2d> shortcut_centroids(const EnvConfig& cfg,
                                                const ScenarioConfig& scenario) {
  const auto regions = canonical_layout(scenario.regime_config());
  std::vector<Eigen::Vector2d> centroids(cfg.object_count());
  if (scenario.mode == ScenarioMode::Ladder) {
    const auto assignment = default_region_assignment(cfg.object_count());
    for (int i = 0; i < cfg.object_count(); ++i) {
      centroids[i] = regions[assignment[i]].center;
    }
  } else {
    const PairingSplit split = make_pairing_split(scenario.split_seed);
    for (int i = 0; i < cfg.object_count(); ++i) {
      centroids[i] = regions[split.train_regions[i][0]].center;
    }
  }
  return centroids;
}

}  // namespace pickbench
