#include "pickbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pickbench {

EpisodeOutcome episode_outcome(const EnvState& final_state) {
  if (!final_state.terminal()) {
    throw std::invalid_argument("truncated trajectory: episode not at horizon");
  }
  EpisodeOutcome o;
  o.success = final_state.attached_object() == final_state.instruction.target_id;
  o.grasp_any = final_state.grasp_any_latch;
  o.reach = final_state.planar_dist_to_instructed() <= kReachThreshold;
  o.episode_seed = final_state.rng_seed;
  o.task = final_state.instruction.text;
  return o;
}

std::pair<double, double> wilson95(int k, int n) {
  if (n <= 0) return {0.0, 1.0};
  const double z = 1.959963984540054;
  const double p = static_cast<double>(k) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

int regime_rank(const std::string& regime_name) {
  if (regime_name == "small_jitter") return 0;
  if (regime_name == "medium_jitter") return 1;
  if (regime_name == "large_jitter") return 2;
  if (regime_name == "full_random") return 3;
  return 4;
}

namespace {

std::string group_value(const OutcomeRecord& r, const std::string& key) {
  if (key == "regime") return r.outcome.regime;
  if (key == "policy") return r.policy;
  if (key == "phase") return r.phase;
  if (key == "object_count") return std::to_string(r.object_count);
  if (key == "dataset_size") return std::to_string(r.dataset_size);
  throw std::invalid_argument("unknown grouping key: " + key);
}

MetricStat make_stat(int count, int n) {
  MetricStat s;
  s.count = count;
  s.rate = n > 0 ? static_cast<double>(count) / n : 0.0;
  auto ci = wilson95(count, n);
  s.ci_low = ci.first;
  s.ci_high = ci.second;
  return s;
}

}  // namespace

std::vector<MetricsRow> aggregate(const std::vector<OutcomeRecord>& records,
                                  const std::vector<std::string>& group_by) {
  if (records.empty()) {
    throw std::invalid_argument("aggregate requires at least one outcome");
  }
  struct Counts {
    int n = 0, success = 0, grasp_any = 0, reach = 0;
  };
  std::map<std::vector<std::string>, Counts> groups;
  for (const auto& r : records) {
    std::vector<std::string> key;
    for (const auto& k : group_by) key.push_back(group_value(r, k));
    auto& c = groups[key];
    c.n += 1;
    c.success += r.outcome.success ? 1 : 0;
    c.grasp_any += r.outcome.grasp_any ? 1 : 0;
    c.reach += r.outcome.reach ? 1 : 0;
  }

  std::vector<MetricsRow> rows;
  for (const auto& [key, c] : groups) {
    MetricsRow row;
    for (size_t i = 0; i < group_by.size(); ++i) row.group[group_by[i]] = key[i];
    row.n = c.n;
    row.success = make_stat(c.success, c.n);
    row.grasp_any = make_stat(c.grasp_any, c.n);
    row.reach = make_stat(c.reach, c.n);
    rows.push_back(std::move(row));
  }

  std::sort(rows.begin(), rows.end(), [&](const MetricsRow& a, const MetricsRow& b) {
    for (const auto& k : group_by) {
      const std::string& va = a.group.at(k);
      const std::string& vb = b.group.at(k);
      if (k == "regime") {
        if (regime_rank(va) != regime_rank(vb)) return regime_rank(va) < regime_rank(vb);
      } else if (k == "object_count" || k == "dataset_size") {
        const long long na = std::stoll(va), nb = std::stoll(vb);
        if (na != nb) return na < nb;
      } else if (va != vb) {
        return va < vb;
      }
    }
    return false;
  });
  return rows;
}

std::string report_text(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  std::vector<std::string> keys;
  if (!rows.empty()) {
    for (const auto& [k, v] : rows.front().group) keys.push_back(k);
  }
  out << std::left;
  for (const auto& k : keys) {
    out.width(16);
    out << k;
  }
  out.width(8);
  out << "n";
  for (const char* m : {"success", "grasp_any", "reach"}) {
    out.width(22);
    out << m;
  }
  out << "\n";
  char buf[64];
  for (const auto& row : rows) {
    for (const auto& k : keys) {
      out.width(16);
      out << row.group.at(k);
    }
    out.width(8);
    out << row.n;
    for (const MetricStat* s : {&row.success, &row.grasp_any, &row.reach}) {
      std::snprintf(buf, sizeof(buf), "%.3f [%.3f, %.3f]", s->rate, s->ci_low,
                    s->ci_high);
      out.width(22);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

std::string report_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  std::vector<std::string> keys;
  if (!rows.empty()) {
    for (const auto& [k, v] : rows.front().group) keys.push_back(k);
  }
  for (const auto& k : keys) out << k << ",";
  out << "n,success,success_ci_low,success_ci_high,grasp_any,grasp_any_ci_low,"
         "grasp_any_ci_high,reach,reach_ci_low,reach_ci_high\n";
  char buf[160];
  for (const auto& row : rows) {
    for (const auto& k : keys) out << row.group.at(k) << ",";
    std::snprintf(buf, sizeof(buf),
                  "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", row.n,
                  row.success.rate, row.success.ci_low, row.success.ci_high,
                  row.grasp_any.rate, row.grasp_any.ci_low, row.grasp_any.ci_high,
                  row.reach.rate, row.reach.ci_low, row.reach.ci_high);
    out << buf << "\n";
  }
  return out.str();
}

std::string outcome_to_ndjson_line(const OutcomeRecord& r) {
  nlohmann::json j{
      {"success", r.outcome.success},
      {"grasp_any", r.outcome.grasp_any},
      {"reach", r.outcome.reach},
      {"episode_seed", r.outcome.episode_seed},
      {"regime", r.outcome.regime},
      {"task", r.outcome.task},
      {"policy", r.policy},
      {"phase", r.phase},
      {"object_count", r.object_count},
      {"dataset_size", r.dataset_size},
  };
  return j.dump();
}

OutcomeRecord outcome_from_ndjson_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  OutcomeRecord r;
  j.at("success").get_to(r.outcome.success);
  j.at("grasp_any").get_to(r.outcome.grasp_any);
  j.at("reach").get_to(r.outcome.reach);
  j.at("episode_seed").get_to(r.outcome.episode_seed);
  j.at("regime").get_to(r.outcome.regime);
  j.at("task").get_to(r.outcome.task);
  j.at("policy").get_to(r.policy);
  j.at("phase").get_to(r.phase);
  j.at("object_count").get_to(r.object_count);
  j.at("dataset_size").get_to(r.dataset_size);
  return r;
}

void write_outcome_log(const std::string& path,
                       const std::vector<OutcomeRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write outcome log: " + path);
  for (const auto& r : records) out << outcome_to_ndjson_line(r) << "\n";
}

std::vector<OutcomeRecord> read_outcome_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read outcome log: " + path);
  std::vector<OutcomeRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) records.push_back(outcome_from_ndjson_line(line));
  }
  return records;
}

}  // namespace pickbench
