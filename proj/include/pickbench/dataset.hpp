// Persistent trajectory datasets: success-filtered episodes of
// (state15, action7) frames with a task string, sharded JSONL files plus a
// JSON meta document. Single writer, atomic meta updates, resumable.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pickbench/config.hpp"
#include "pickbench/rollout.hpp"

namespace pickbench {

struct FrameRecord {
  long long episode_index = 0;
  int frame_index = 0;
  std::vector<float> state;   // dim 15
  std::vector<float> action;  // dim 7
  double timestamp = 0.0;     // frame_index / fps
};

struct EpisodeRecord {
  long long episode_index = 0;
  std::string task;
  std::string regime;           // scenario name
  uint64_t placement_seed = 0;  // episode seed; placement derives from it
  bool success = false;
  int frame_count = 0;
};

struct TrajectoryRecord {
  EpisodeRecord episode;
  std::vector<FrameRecord> frames;
};

struct DatasetMeta {
  double fps = 20.0;
  std::string robot_type = "panda";
  std::string env_config_hash;
  std::vector<std::string> object_set;
  nlohmann::json scenario;  // ScenarioConfig
  std::string policy_name;
  uint64_t base_seed = 0;
  long long total_episodes = 0;
  int episodes_per_shard = 1000;
};

void to_json(nlohmann::json& j, const DatasetMeta& m);
void from_json(const nlohmann::json& j, DatasetMeta& m);

constexpr int kStateDim = 15;
constexpr int kActionDimFrames = 7;
constexpr int kMaxFrameCount = 50;

class DatasetWriter {
 public:
  // Creates <dir>/meta/info.json + <dir>/data/, or resumes an existing
  // dataset whose meta matches the template (totals aside). A torn final
  // episode from an interrupted run is discarded on resume.
  DatasetWriter(const std::string& dir, const DatasetMeta& meta_template);

  // Validates and appends one successful episode; returns its index.
  long long write_episode(const EpisodeRecord& episode,
                          const std::vector<FrameRecord>& frames);

  const DatasetMeta& meta() const { return meta_; }
  const std::string& dir() const { return dir_; }

 private:
  std::string shard_path(int shard_index) const;
  void repair_last_shard();

  std::string dir_;
  DatasetMeta meta_;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<TrajectoryRecord> episodes;
};

// Deterministic episode order; `subset` keeps exactly the first k episodes.
// A non-empty `expected_hash` must match the stored env config hash.
Dataset read_dataset(const std::string& dir,
                     std::optional<long long> subset = std::nullopt,
                     const std::string& expected_hash = "");
DatasetMeta read_dataset_meta(const std::string& dir);

// Parses one shard file on its own (shard-independence checks).
std::vector<TrajectoryRecord> read_shard_file(const std::string& path);

// Serialization of single records, exposed for the recorder client so both
// recording paths produce identical bytes.
std::string episode_header_line(const EpisodeRecord& e);
std::string frame_line(const FrameRecord& f);

// Builds the frame records for a recorded episode result.
TrajectoryRecord make_trajectory(long long episode_index, const std::string& task,
                                 const std::string& regime, uint64_t placement_seed,
                                 bool success,
                                 const std::vector<std::array<float, 15>>& states,
                                 const std::vector<std::array<float, 7>>& actions,
                                 double fps);

// Re-runs a stored episode through the environment (same scenario and seed,
// recorded actions) and returns the regenerated result. Stored episodes
// replay to success = true; the regenerated state frames match bit-exactly.
EpisodeResult replay_episode(EnvConfigPtr cfg, const ScenarioConfig& scenario,
                             const TrajectoryRecord& record);

}  // namespace pickbench
