#include "pickbench/imitation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace pickbench {

std::string obs_mode_name(ObsMode m) {
  return m == ObsMode::IdentityBlind ? "identity_blind" : "grounded";
}

ObsMode obs_mode_from_name(const std::string& name) {
  if (name == "identity_blind") return ObsMode::IdentityBlind;
  if (name == "grounded") return ObsMode::Grounded;
  throw std::invalid_argument("unknown obs mode: " + name);
}

void BCConfig::validate() const {
  if (chunk_size < 1 || execution_horizon < 1 || batch_size < 1) {
    throw std::invalid_argument("bc config: sizes must be positive");
  }
  if (execution_horizon > chunk_size) {
    throw std::invalid_argument("bc config: execution_horizon must be <= chunk_size");
  }
  if (learning_rate <= 0 || epochs < 0 || hidden_size < 1) {
    throw std::invalid_argument("bc config: bad training settings");
  }
}

void to_json(nlohmann::json& j, const BCConfig& c) {
  j = nlohmann::json{{"chunk_size", c.chunk_size},
                     {"execution_horizon", c.execution_horizon},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"weight_decay", c.weight_decay},
                     {"epochs", c.epochs},
                     {"obs_mode", obs_mode_name(c.obs_mode)},
                     {"hidden_size", c.hidden_size},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, BCConfig& c) {
  j.at("chunk_size").get_to(c.chunk_size);
  j.at("execution_horizon").get_to(c.execution_horizon);
  j.at("batch_size").get_to(c.batch_size);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("weight_decay").get_to(c.weight_decay);
  j.at("epochs").get_to(c.epochs);
  c.obs_mode = obs_mode_from_name(j.at("obs_mode").get<std::string>());
  j.at("hidden_size").get_to(c.hidden_size);
  j.at("seed").get_to(c.seed);
  c.validate();
}

ChunkSample ChunkDataset::sample(int i) const {
  ChunkSample s;
  s.observation = obs.row(i);
  s.target_chunk.resize(chunk_size, kActionDimFrames);
  for (int c = 0; c < chunk_size; ++c) {
    s.target_chunk.row(c) = targets.row(i).segment(c * kActionDimFrames,
                                                   kActionDimFrames);
  }
  s.mask = mask.row(i);
  return s;
}

VectorXd encode_bc_obs(const EnvState& state, ObsMode mode,
                       const std::vector<int>& blind_perm) {
  if (mode == ObsMode::Grounded) return flatten_obs(observe_privileged(state));
  return flatten_obs(observe_identity_blind(state, blind_perm));
}

ChunkDataset build_training_set(EnvConfigPtr cfg, const Dataset& dataset,
                                const BCConfig& bc) {
  bc.validate();
  if (dataset.episodes.empty()) {
    throw std::invalid_argument("empty dataset");
  }
  ScenarioConfig scenario;
  from_json(dataset.meta.scenario, scenario);

  long long total = 0;
  for (const auto& e : dataset.episodes) total += e.episode.frame_count;

  const int obs_dim = flat_obs_dim(cfg->object_count());
  const int C = bc.chunk_size;
  ChunkDataset out;
  out.chunk_size = C;
  out.obs.resize(total, obs_dim);
  out.targets.resize(total, C * kActionDimFrames);
  out.mask.resize(total, C);

  long long row = 0;
  for (const auto& record : dataset.episodes) {
    const uint64_t seed = record.episode.placement_seed;
    const EpisodeSetup setup = sample_episode(*cfg, scenario, seed);
    if (setup.instruction.text != record.episode.task) {
      throw std::runtime_error("dataset episode does not replay: task mismatch");
    }
    const auto perm = blind_permutation(cfg->object_count(),
                                        substream(seed, kStreamBlindPerm));
    EnvState state = env_reset(cfg, setup.placement, setup.instruction, seed);

    const int T = record.episode.frame_count;
    for (int t = 0; t < T; ++t) {
      out.obs.row(row) = encode_bc_obs(state, bc.obs_mode, perm);
      for (int c = 0; c < C; ++c) {
        const int src = std::min(t + c, T - 1);  // pad by repeating the last action
        const auto& a = record.frames[src].action;
        for (int k = 0; k < kActionDimFrames; ++k) {
          out.targets(row, c * kActionDimFrames + k) = a[k];
        }
        out.mask(row, c) = (t + c < T) ? 1.0 : 0.0;
      }
      std::array<float, 7> af;
      std::copy(record.frames[t].action.begin(), record.frames[t].action.end(),
                af.begin());
      state = env_step(state, Action7::from_f32(af)).first;
      row += 1;
    }
  }
  return out;
}

double bc_loss(const Mlp& net, const MatrixXd& obs, const MatrixXd& targets,
               const MatrixXd& mask, Mlp* grads) {
  const int n = static_cast<int>(obs.rows());
  const int C = static_cast<int>(mask.cols());
  Mlp::Cache cache;
  const MatrixXd pred = net.forward(obs, cache);

  // expand the per-chunk-step mask over the 7 action dims
  MatrixXd diff = pred - targets;
  for (int c = 0; c < C; ++c) {
    for (int k = 0; k < kActionDimFrames; ++k) {
      diff.col(c * kActionDimFrames + k) =
          diff.col(c * kActionDimFrames + k).cwiseProduct(mask.col(c));
    }
  }
  const double mask_total = mask.sum() * kActionDimFrames;
  if (mask_total <= 0) throw std::invalid_argument("bc_loss: empty mask");
  const double loss = diff.array().square().sum() / mask_total;

  if (grads) {
    const MatrixXd d_out = (2.0 / mask_total) * diff;
    net.backward(cache, d_out, *grads);
  }
  (void)n;
  return loss;
}

BCTrainResult bc_train(const BCConfig& cfg, const ChunkDataset& data,
                       int object_count, bool verbose) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("empty training set");
  if (data.chunk_size != cfg.chunk_size) {
    throw std::invalid_argument("chunk dataset built for a different chunk size");
  }

  BCTrainResult result;
  result.net.config = cfg;
  result.net.object_count = object_count;
  result.net.net = Mlp({data.obs_dim(), cfg.hidden_size, cfg.hidden_size,
                        cfg.chunk_size * kActionDimFrames},
                       mix64(cfg.seed));
  Mlp& net = result.net.net;

  AdamW opt(net.num_params(), cfg.learning_rate, cfg.weight_decay);
  Rng rng(mix64(cfg.seed + 0xBC));
  std::vector<int> indices(data.size());
  std::iota(indices.begin(), indices.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(indices);
    double epoch_loss = 0.0;
    long long batches = 0;
    for (int start = 0; start < data.size(); start += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, data.size() - start);
      MatrixXd obs(b, data.obs_dim());
      MatrixXd targets(b, data.targets.cols());
      MatrixXd mask(b, data.chunk_size);
      for (int i = 0; i < b; ++i) {
        const int src = indices[start + i];
        obs.row(i) = data.obs.row(src);
        targets.row(i) = data.targets.row(src);
        mask.row(i) = data.mask.row(src);
      }
      Mlp grads = net.zeros_like();
      const double loss = bc_loss(net, obs, targets, mask, &grads);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("bc_train: non-finite loss at epoch " +
                                 std::to_string(epoch));
      }
      VectorXd params = net.flatten();
      opt.step(params, grads.flatten());
      net.unflatten(params);
      epoch_loss += loss;
      batches += 1;
    }
    result.epoch_losses.push_back(epoch_loss / std::max<long long>(1, batches));
    if (verbose) {
      std::fprintf(stderr, "[bc] epoch %d/%d loss %.6f\n", epoch + 1, cfg.epochs,
                   result.epoch_losses.back());
    }
  }
  return result;
}

BCPolicy::BCPolicy(BCNet net) : net_(std::move(net)) {
  net_.config.validate();
}

void BCPolicy::reset(uint64_t episode_seed) {
  episode_seed_ = episode_seed;
  perm_.clear();
  chunk_.resize(0, 0);
  consumed_ = 0;
  prediction_count_ = 0;
}

Action7 BCPolicy::act(const EnvState& state) {
  if (perm_.empty()) {
    perm_ = blind_permutation(state.config->object_count(),
                              substream(episode_seed_, kStreamBlindPerm));
  }
  const BCConfig& cfg = net_.config;
  if (chunk_.rows() == 0 || consumed_ >= cfg.execution_horizon) {
    const VectorXd obs = encode_bc_obs(state, cfg.obs_mode, perm_);
    const VectorXd flat = net_.net.forward(obs.transpose()).row(0);
    chunk_.resize(cfg.chunk_size, kActionDimFrames);
    for (int c = 0; c < cfg.chunk_size; ++c) {
      chunk_.row(c) = flat.segment(c * kActionDimFrames, kActionDimFrames);
    }
    consumed_ = 0;
    prediction_count_ += 1;
  }
  const Eigen::RowVectorXd a = chunk_.row(consumed_);
  consumed_ += 1;
  Action7 action;
  action.d_pos = Eigen::Vector3d(a[0], a[1], a[2]);
  action.d_rot = Eigen::Vector3d(a[3], a[4], a[5]);
  action.grip = std::clamp(a[6], -1.0, 1.0);
  return action;
}

GridSearchResult grid_search(const std::vector<BCConfig>& configs, EnvConfigPtr cfg,
                             const Dataset& data,
                             const std::function<double(const BCNet&)>& evaluate,
                             bool verbose) {
  if (configs.empty()) throw std::invalid_argument("grid search needs >= 1 config");
  GridSearchResult result;
  for (const auto& c : configs) {
    const ChunkDataset training_set = build_training_set(cfg, data, c);
    const BCTrainResult trained =
        bc_train(c, training_set, cfg->object_count(), verbose);
    GridSearchRow row;
    row.config = c;
    row.success = evaluate(trained.net);
    if (verbose) {
      std::fprintf(stderr, "[grid] chunk %d horizon %d batch %d -> success %.3f\n",
                   c.chunk_size, c.execution_horizon, c.batch_size, row.success);
    }
    result.rows.push_back(row);
  }
  const auto better = [](const GridSearchRow& a, const GridSearchRow& b) {
    if (a.success != b.success) return a.success > b.success;
    if (a.config.chunk_size != b.config.chunk_size) {
      return a.config.chunk_size < b.config.chunk_size;
    }
    return a.config.execution_horizon < b.config.execution_horizon;
  };
  result.best =
      std::min_element(result.rows.begin(), result.rows.end(),
                       [&](const GridSearchRow& a, const GridSearchRow& b) {
                         return better(a, b);
                       })
          ->config;
  return result;
}

std::string grid_search_csv(const GridSearchResult& result) {
  std::ostringstream out;
  out << "chunk_size,execution_horizon,batch_size,obs_mode,success,best\n";
  for (const auto& row : result.rows) {
    const bool is_best =
        row.config.chunk_size == result.best.chunk_size &&
        row.config.execution_horizon == result.best.execution_horizon &&
        row.config.batch_size == result.best.batch_size &&
        row.config.obs_mode == result.best.obs_mode;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%s,%.6f,%d\n", row.config.chunk_size,
                  row.config.execution_horizon, row.config.batch_size,
                  obs_mode_name(row.config.obs_mode).c_str(), row.success,
                  is_best ? 1 : 0);
    out << buf;
  }
  return out.str();
}

void save_bc_net(const std::string& dir, const BCNet& net,
                 const nlohmann::json& extra_config) {
  std::map<std::string, MatrixXd> tensors;
  for (size_t l = 0; l < net.net.layers.size(); ++l) {
    tensors["net.layer" + std::to_string(l) + ".W"] = net.net.layers[l].W;
    tensors["net.layer" + std::to_string(l) + ".b"] = net.net.layers[l].b;
  }
  nlohmann::json config = extra_config;
  config["kind"] = "bc";
  config["bc_config"] = net.config;
  config["object_count"] = net.object_count;
  config["obs_dim"] = net.net.input_dim();
  save_checkpoint(dir, tensors, config);
}

BCNet load_bc_net(const std::string& dir) {
  auto [tensors, config] = load_checkpoint(dir);
  if (config.at("kind") != "bc") {
    throw std::runtime_error("checkpoint at " + dir + " is not a bc policy");
  }
  BCNet net;
  net.config = config.at("bc_config").get<BCConfig>();
  net.object_count = config.at("object_count").get<int>();
  const int obs_dim = config.at("obs_dim").get<int>();
  net.net = Mlp({obs_dim, net.config.hidden_size, net.config.hidden_size,
                 net.config.chunk_size * kActionDimFrames},
                0);
  for (size_t l = 0; l < net.net.layers.size(); ++l) {
    net.net.layers[l].W = tensors.at("net.layer" + std::to_string(l) + ".W");
    net.net.layers[l].b = tensors.at("net.layer" + std::to_string(l) + ".b").col(0);
  }
  return net;
}

}  // namespace pickbench
