#include "pickbench/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pickbench/util.hpp"

namespace fs = std::filesystem;

namespace pickbench {

void to_json(nlohmann::json& j, const DatasetMeta& m) {
  j = nlohmann::json{{"fps", m.fps},
                     {"robot_type", m.robot_type},
                     {"env_config_hash", m.env_config_hash},
                     {"object_set", m.object_set},
                     {"scenario", m.scenario},
                     {"policy_name", m.policy_name},
                     {"base_seed", m.base_seed},
                     {"total_episodes", m.total_episodes},
                     {"episodes_per_shard", m.episodes_per_shard}};
}

void from_json(const nlohmann::json& j, DatasetMeta& m) {
  j.at("fps").get_to(m.fps);
  j.at("robot_type").get_to(m.robot_type);
  j.at("env_config_hash").get_to(m.env_config_hash);
  j.at("object_set").get_to(m.object_set);
  m.scenario = j.at("scenario");
  j.at("policy_name").get_to(m.policy_name);
  j.at("base_seed").get_to(m.base_seed);
  j.at("total_episodes").get_to(m.total_episodes);
  j.at("episodes_per_shard").get_to(m.episodes_per_shard);
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string float_array_json(const std::vector<float>& values) {
  std::string out = "[";
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += fmt_f32(values[i]);
  }
  out += "]";
  return out;
}

void write_meta(const std::string& dir, const DatasetMeta& meta) {
  nlohmann::json j = meta;
  write_file_atomic(dir + "/meta/info.json", j.dump(2) + "\n");
}

bool metas_compatible(const DatasetMeta& a, const DatasetMeta& b) {
  return a.fps == b.fps && a.robot_type == b.robot_type &&
         a.env_config_hash == b.env_config_hash && a.object_set == b.object_set &&
         a.scenario == b.scenario && a.policy_name == b.policy_name &&
         a.base_seed == b.base_seed && a.episodes_per_shard == b.episodes_per_shard;
}

void validate_episode(const EpisodeRecord& episode,
                      const std::vector<FrameRecord>& frames, double fps) {
  if (!episode.success) {
    throw std::invalid_argument("rejected by filter: episode not successful");
  }
  if (episode.frame_count != static_cast<int>(frames.size()) ||
      frames.empty() || episode.frame_count > kMaxFrameCount) {
    throw std::invalid_argument("schema error: bad frame count");
  }
  double prev_ts = -1.0;
  for (size_t i = 0; i < frames.size(); ++i) {
    const FrameRecord& f = frames[i];
    if (f.state.size() != kStateDim) {
      throw std::invalid_argument("schema error: observation.state must have dim 15");
    }
    if (f.action.size() != kActionDimFrames) {
      throw std::invalid_argument("schema error: action must have dim 7");
    }
    if (f.episode_index != episode.episode_index ||
        f.frame_index != static_cast<int>(i)) {
      throw std::invalid_argument("schema error: frame indexing mismatch");
    }
    if (f.timestamp <= prev_ts) {
      throw std::invalid_argument("schema error: timestamps must be monotone");
    }
    if (std::abs(f.timestamp - f.frame_index / fps) > 1e-9) {
      throw std::invalid_argument("schema error: timestamp does not match fps");
    }
    prev_ts = f.timestamp;
  }
}

}  // namespace

std::string episode_header_line(const EpisodeRecord& e) {
  nlohmann::json j{{"episode_index", e.episode_index},
                   {"frame_count", e.frame_count},
                   {"placement_seed", e.placement_seed},
                   {"regime", e.regime},
                   {"success", e.success},
                   {"task", e.task}};
  return j.dump();
}

std::string frame_line(const FrameRecord& f) {
  std::string out = "{\"action\":";
  out += float_array_json(f.action);
  out += ",\"episode_index\":" + std::to_string(f.episode_index);
  out += ",\"frame_index\":" + std::to_string(f.frame_index);
  out += ",\"observation.state\":" + float_array_json(f.state);
  out += ",\"timestamp\":" + fmt_double(f.timestamp);
  out += "}";
  return out;
}

DatasetWriter::DatasetWriter(const std::string& dir, const DatasetMeta& meta_template)
    : dir_(dir), meta_(meta_template) {
  if (fs::exists(dir_ + "/meta/info.json")) {
    DatasetMeta stored;
    from_json(nlohmann::json::parse(read_file(dir_ + "/meta/info.json")), stored);
    if (!metas_compatible(stored, meta_)) {
      throw std::runtime_error("dataset at " + dir_ +
                               " was created with a different configuration");
    }
    meta_ = stored;
    repair_last_shard();
  } else {
    fs::create_directories(dir_ + "/meta");
    fs::create_directories(dir_ + "/data");
    meta_.total_episodes = 0;
    write_meta(dir_, meta_);
  }
}

std::string DatasetWriter::shard_path(int shard_index) const {
  char name[32];
  std::snprintf(name, sizeof(name), "shard-%05d.jsonl", shard_index);
  return dir_ + "/data/" + name;
}

void DatasetWriter::repair_last_shard() {
  if (meta_.total_episodes == 0) {
    // nothing acknowledged yet; drop any torn first shard
    if (fs::exists(shard_path(0))) fs::remove(shard_path(0));
    return;
  }
  const int last_shard = static_cast<int>((meta_.total_episodes - 1) /
                                          meta_.episodes_per_shard);
  const long long expected =
      meta_.total_episodes - static_cast<long long>(last_shard) * meta_.episodes_per_shard;
  const std::string path = shard_path(last_shard);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("dataset corrupt: missing shard " + path);
  std::ostringstream kept;
  std::string line;
  long long episodes_kept = 0;
  while (episodes_kept < expected && std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (!j.contains("task")) {
      throw std::runtime_error("dataset corrupt: expected episode header in " + path);
    }
    const int frame_count = j.at("frame_count").get<int>();
    std::vector<std::string> block = {line};
    for (int i = 0; i < frame_count; ++i) {
      if (!std::getline(in, line)) {
        throw std::runtime_error("dataset corrupt: truncated episode in " + path);
      }
      block.push_back(line);
    }
    for (const auto& l : block) kept << l << "\n";
    episodes_kept += 1;
  }
  if (episodes_kept != expected) {
    throw std::runtime_error("dataset corrupt: shard " + path +
                             " is missing acknowledged episodes");
  }
  const bool had_extra = static_cast<bool>(std::getline(in, line));
  in.close();
  if (had_extra) {
    // a torn write from an interrupted run; keep only acknowledged episodes
    write_file_atomic(path, kept.str());
  }
  // shards past the acknowledged range are torn in full
  int extra_shard = last_shard + 1;
  while (fs::exists(shard_path(extra_shard))) {
    fs::remove(shard_path(extra_shard));
    extra_shard += 1;
  }
}

long long DatasetWriter::write_episode(const EpisodeRecord& episode,
                                       const std::vector<FrameRecord>& frames) {
  if (episode.episode_index != meta_.total_episodes) {
    throw std::invalid_argument("episode index must equal the current total (" +
                                std::to_string(meta_.total_episodes) + ")");
  }
  validate_episode(episode, frames, meta_.fps);

  const int shard_index =
      static_cast<int>(meta_.total_episodes / meta_.episodes_per_shard);
  std::ofstream out(shard_path(shard_index), std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to shard " + shard_path(shard_index));
  out << episode_header_line(episode) << "\n";
  for (const auto& f : frames) out << frame_line(f) << "\n";
  out.flush();
  if (!out) throw std::runtime_error("shard write failed");
  out.close();

  meta_.total_episodes += 1;
  write_meta(dir_, meta_);
  return meta_.total_episodes - 1;
}

namespace {

TrajectoryRecord parse_episode_block(const nlohmann::json& header,
                                     std::istream& in, const std::string& origin) {
  TrajectoryRecord rec;
  rec.episode.episode_index = header.at("episode_index").get<long long>();
  rec.episode.frame_count = header.at("frame_count").get<int>();
  rec.episode.placement_seed = header.at("placement_seed").get<uint64_t>();
  rec.episode.regime = header.at("regime").get<std::string>();
  rec.episode.success = header.at("success").get<bool>();
  rec.episode.task = header.at("task").get<std::string>();

  std::string line;
  for (int i = 0; i < rec.episode.frame_count; ++i) {
    if (!std::getline(in, line)) {
      throw std::runtime_error("truncated episode in " + origin);
    }
    const auto j = nlohmann::json::parse(line);
    FrameRecord f;
    f.episode_index = j.at("episode_index").get<long long>();
    f.frame_index = j.at("frame_index").get<int>();
    f.timestamp = j.at("timestamp").get<double>();
    for (const auto& v : j.at("observation.state")) f.state.push_back(v.get<float>());
    for (const auto& v : j.at("action")) f.action.push_back(v.get<float>());
    rec.frames.push_back(std::move(f));
  }
  return rec;
}

}  // namespace

std::vector<TrajectoryRecord> read_shard_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open shard " + path);
  std::vector<TrajectoryRecord> episodes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (!j.contains("task")) {
      throw std::runtime_error("expected an episode header in " + path);
    }
    episodes.push_back(parse_episode_block(j, in, path));
  }
  return episodes;
}

DatasetMeta read_dataset_meta(const std::string& dir) {
  DatasetMeta meta;
  from_json(nlohmann::json::parse(read_file(dir + "/meta/info.json")), meta);
  return meta;
}

Dataset read_dataset(const std::string& dir, std::optional<long long> subset,
                     const std::string& expected_hash) {
  Dataset ds;
  ds.meta = read_dataset_meta(dir);
  if (!expected_hash.empty() && expected_hash != ds.meta.env_config_hash) {
    throw std::runtime_error(
        "env config hash mismatch: dataset " + dir + " was recorded under " +
        ds.meta.env_config_hash + ", current config is " + expected_hash);
  }
  long long want = ds.meta.total_episodes;
  if (subset) {
    if (*subset < 0 || *subset > ds.meta.total_episodes) {
      throw std::invalid_argument("subset size out of range");
    }
    want = *subset;
  }
  const int num_shards =
      static_cast<int>((ds.meta.total_episodes + ds.meta.episodes_per_shard - 1) /
                       ds.meta.episodes_per_shard);
  for (int s = 0; s < num_shards && static_cast<long long>(ds.episodes.size()) < want;
       ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "shard-%05d.jsonl", s);
    for (auto& rec : read_shard_file(dir + "/data/" + name)) {
      if (static_cast<long long>(ds.episodes.size()) >= want) break;
      validate_episode(rec.episode, rec.frames, ds.meta.fps);
      if (rec.episode.episode_index != static_cast<long long>(ds.episodes.size())) {
        throw std::runtime_error("dataset episodes out of order in " + dir);
      }
      ds.episodes.push_back(std::move(rec));
    }
  }
  if (static_cast<long long>(ds.episodes.size()) != want) {
    throw std::runtime_error("dataset at " + dir + " is missing episodes");
  }
  return ds;
}

TrajectoryRecord make_trajectory(long long episode_index, const std::string& task,
                                 const std::string& regime, uint64_t placement_seed,
                                 bool success,
                                 const std::vector<std::array<float, 15>>& states,
                                 const std::vector<std::array<float, 7>>& actions,
                                 double fps) {
  if (states.size() != actions.size()) {
    throw std::invalid_argument("states and actions must have equal length");
  }
  TrajectoryRecord rec;
  rec.episode.episode_index = episode_index;
  rec.episode.task = task;
  rec.episode.regime = regime;
  rec.episode.placement_seed = placement_seed;
  rec.episode.success = success;
  rec.episode.frame_count = static_cast<int>(states.size());
  for (size_t t = 0; t < states.size(); ++t) {
    FrameRecord f;
    f.episode_index = episode_index;
    f.frame_index = static_cast<int>(t);
    f.state.assign(states[t].begin(), states[t].end());
    f.action.assign(actions[t].begin(), actions[t].end());
    f.timestamp = static_cast<double>(t) / fps;
    rec.frames.push_back(std::move(f));
  }
  return rec;
}

EpisodeResult replay_episode(EnvConfigPtr cfg, const ScenarioConfig& scenario,
                             const TrajectoryRecord& record) {
  const uint64_t seed = record.episode.placement_seed;
  const EpisodeSetup setup = sample_episode(*cfg, scenario, seed);
  if (setup.instruction.text != record.episode.task) {
    throw std::runtime_error("replay mismatch: stored task '" + record.episode.task +
                             "' but seed reproduces '" + setup.instruction.text + "'");
  }
  EnvState state = env_reset(cfg, setup.placement, setup.instruction, seed);

  EpisodeResult result;
  for (const auto& f : record.frames) {
    std::array<float, 7> a;
    std::copy(f.action.begin(), f.action.end(), a.begin());
    const Action7 action = Action7::from_f32(a);
    result.states.push_back(encode_state15(state));
    result.actions.push_back(a);
    state = env_step(state, action).first;
  }
  result.outcome = episode_outcome(state);
  result.outcome.regime = record.episode.regime;
  result.final_state = std::move(state);
  return result;
}

}  // namespace pickbench
