// Behavior cloning with action chunking and execution horizons, trained on
// recorded datasets. Observations are regenerated by replaying episodes
// through the environment; the identity-blind encoder is the proxy that
// reproduces the grounding collapse.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pickbench/dataset.hpp"
#include "pickbench/env.hpp"
#include "pickbench/net.hpp"
#include "pickbench/policy.hpp"
#include "pickbench/rollout.hpp"

namespace pickbench {

enum class ObsMode { IdentityBlind, Grounded };

std::string obs_mode_name(ObsMode m);
ObsMode obs_mode_from_name(const std::string& name);

struct BCConfig {
  int chunk_size = 16;        // swept over {8, 16, 32}
  int execution_horizon = 8;  // swept over {1, 4, 8, 16}
  int batch_size = 64;        // swept over {64, 128}
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  int epochs = 10;
  ObsMode obs_mode = ObsMode::IdentityBlind;
  int hidden_size = 256;
  uint64_t seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const BCConfig& c);
void from_json(const nlohmann::json& j, BCConfig& c);

// One supervised sample: observation at time t, the action chunk
// a_t..a_{t+C-1} padded by repeating the final action, and the padding mask.
struct ChunkSample {
  VectorXd observation;
  MatrixXd target_chunk;  // chunk_size x 7
  VectorXd mask;          // 1 = real step, 0 = padding
};

struct ChunkDataset {
  MatrixXd obs;      // N x obs_dim
  MatrixXd targets;  // N x (chunk_size * 7)
  MatrixXd mask;     // N x chunk_size
  int chunk_size = 0;

  int size() const { return static_cast<int>(obs.rows()); }
  int obs_dim() const { return static_cast<int>(obs.cols()); }
  ChunkSample sample(int i) const;
};

// Replays every episode to regenerate per-step observations (stride 1, one
// sample per timestep) under the configured encoder. Identity-blind slot
// permutations are the per-episode ones derived from the episode seed.
ChunkDataset build_training_set(EnvConfigPtr cfg, const Dataset& dataset,
                                const BCConfig& bc);

// Flat encoding of the observation under an obs mode, with the blind
// permutation supplied for IdentityBlind.
VectorXd encode_bc_obs(const EnvState& state, ObsMode mode,
                       const std::vector<int>& blind_perm);

struct BCNet {
  Mlp net;
  BCConfig config;
  int object_count = 5;
};

// Masked mean squared error over chunks plus analytic gradients; checked
// against central finite differences.
double bc_loss(const Mlp& net, const MatrixXd& obs, const MatrixXd& targets,
               const MatrixXd& mask, Mlp* grads);

struct BCTrainResult {
  BCNet net;
  std::vector<double> epoch_losses;
};

BCTrainResult bc_train(const BCConfig& cfg, const ChunkDataset& data,
                       int object_count, bool verbose = false);

// Chunked execution: predict chunk_size actions when the buffer is empty,
// play them back one per step, discard the tail after execution_horizon
// actions and re-predict.
class BCPolicy : public Policy {
 public:
  explicit BCPolicy(BCNet net);
  void reset(uint64_t episode_seed) override;
  Action7 act(const EnvState& state) override;
  int prediction_count() const { return prediction_count_; }

 private:
  BCNet net_;
  MatrixXd chunk_;  // chunk_size x 7
  int consumed_ = 0;
  int prediction_count_ = 0;
  uint64_t episode_seed_ = 0;
  std::vector<int> perm_;
};

struct GridSearchRow {
  BCConfig config;
  double success = 0.0;
};

struct GridSearchResult {
  BCConfig best;
  std::vector<GridSearchRow> rows;
};

// Trains each configuration on the dataset and scores it with `evaluate`;
// returns the argmax, ties broken by smaller chunk then smaller horizon.
GridSearchResult grid_search(const std::vector<BCConfig>& configs, EnvConfigPtr cfg,
                             const Dataset& data,
                             const std::function<double(const BCNet&)>& evaluate,
                             bool verbose = false);

std::string grid_search_csv(const GridSearchResult& result);

void save_bc_net(const std::string& dir, const BCNet& net,
                 const nlohmann::json& extra_config);
BCNet load_bc_net(const std::string& dir);

}  // namespace pickbench
