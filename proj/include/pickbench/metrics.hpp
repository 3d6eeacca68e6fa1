// Decomposed per-episode metrics (success / grasp-anything / reach) and
// aggregate reports with Wilson intervals.
#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pickbench/env.hpp"

namespace pickbench {

struct EpisodeOutcome {
  bool success = false;    // instructed object attached at the final step
  bool grasp_any = false;  // any object attached at any point
  bool reach = false;      // final planar gripper-target distance <= 5 cm
  uint64_t episode_seed = 0;
  std::string regime;
  std::string task;
};

// Derives the outcome triple from a completed episode's final state.
// Throws std::invalid_argument on a truncated trajectory.
EpisodeOutcome episode_outcome(const EnvState& final_state);

constexpr double kReachThreshold = 0.05;  // meters, inclusive

// One line of an outcome log; grouping metadata alongside the outcome.
struct OutcomeRecord {
  EpisodeOutcome outcome;
  std::string policy;
  std::string phase;       // compositional ID/OOD, empty otherwise
  int object_count = -1;   // -1 when not a grouping dimension
  long long dataset_size = -1;
};

struct MetricStat {
  int count = 0;
  double rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct MetricsRow {
  std::map<std::string, std::string> group;  // key -> value, e.g. regime, policy
  int n = 0;
  MetricStat success, grasp_any, reach;
};

// Wilson 95% interval for k successes out of n.
std::pair<double, double> wilson95(int k, int n);

// Groups records by the listed keys (subset of: regime, policy, phase,
// object_count, dataset_size) and computes per-group rates. Rows come back
// in ladder order (small -> medium -> large -> full random), then by the
// remaining keys.
std::vector<MetricsRow> aggregate(const std::vector<OutcomeRecord>& records,
                                  const std::vector<std::string>& group_by);

// Aligned text table, regime-ordered, columns Success / Grasp-any / Reach.
std::string report_text(const std::vector<MetricsRow>& rows);
std::string report_csv(const std::vector<MetricsRow>& rows);

// Newline-delimited JSON round trip for outcome logs.
std::string outcome_to_ndjson_line(const OutcomeRecord& r);
OutcomeRecord outcome_from_ndjson_line(const std::string& line);
void write_outcome_log(const std::string& path, const std::vector<OutcomeRecord>& records);
std::vector<OutcomeRecord> read_outcome_log(const std::string& path);

int regime_rank(const std::string& regime_name);

}  // namespace pickbench
