// Placement scatter exports: CSV rows plus a small self-contained SVG per
// regime, colored by object.
#pragma once

#include <string>

#include "pickbench/placement.hpp"
#include "pickbench/rollout.hpp"

namespace pickbench {

struct ScatterExport {
  std::string csv_path;
  std::string svg_path;
  std::vector<std::vector<Eigen::Vector2d>> points_by_object;
};

// Samples `n` placements from the regime (default region assignment),
// re-validates each, and writes <out_dir>/scatter_<regime>.{csv,svg}.
ScatterExport scatter_export(const EnvConfig& cfg, const Regime& regime, int n,
                             uint64_t seed, const std::string& out_dir);

}  // namespace pickbench
