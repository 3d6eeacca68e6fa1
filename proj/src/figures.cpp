#include "pickbench/figures.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "pickbench/rng.hpp"
#include "pickbench/util.hpp"

namespace pickbench {

namespace {

const char* kPalette[5] = {"#d62728", "#ff7f0e", "#1f77b4", "#2ca02c", "#9467bd"};

}  // namespace

ScatterExport scatter_export(const EnvConfig& cfg, const Regime& regime, int n,
                             uint64_t seed, const std::string& out_dir) {
  if (n < 1) throw std::invalid_argument("scatter export needs n >= 1");
  std::filesystem::create_directories(out_dir);

  ScatterExport result;
  result.points_by_object.resize(cfg.object_count());

  const auto assignment = default_region_assignment(cfg.object_count());
  std::ostringstream csv;
  csv << "sample,object_id,name,x,y\n";
  char buf[128];
  for (int i = 0; i < n; ++i) {
    const uint64_t s = derive_seed(seed, i);
    const PlacementSample sample =
        regime.is_jitter() ? sample_jitter(cfg, regime, assignment, s)
                           : sample_full_random(cfg, s);
    sample.validate(cfg);
    for (int id = 0; id < cfg.object_count(); ++id) {
      result.points_by_object[id].push_back(sample.positions[id]);
      std::snprintf(buf, sizeof(buf), "%d,%d,%s,%.6f,%.6f\n", i, id,
                    cfg.object(id).name.c_str(), sample.positions[id].x(),
                    sample.positions[id].y());
      csv << buf;
    }
  }

  const double X = cfg.workspace.x_half_extent;
  const double Y = cfg.workspace.y_half_extent;
  const double scale = 2000.0;  // px per meter
  const int width = static_cast<int>(2 * X * scale);
  const int height = static_cast<int>(2 * Y * scale);
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
      << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"#fafafa\" stroke=\"#333\"/>\n";
  for (int id = 0; id < cfg.object_count(); ++id) {
    svg << "<g class=\"obj-" << id << "\" fill=\"" << kPalette[id % 5]
        << "\" fill-opacity=\"0.55\">\n";
    for (const auto& p : result.points_by_object[id]) {
      const double px = (p.x() + X) * scale;
      const double py = (Y - p.y()) * scale;
      std::snprintf(buf, sizeof(buf), "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"4\"/>\n",
                    px, py);
      svg << buf;
    }
    svg << "</g>\n";
  }
  svg << "</svg>\n";

  result.csv_path = out_dir + "/scatter_" + regime.name() + ".csv";
  result.svg_path = out_dir + "/scatter_" + regime.name() + ".svg";
  write_file(result.csv_path, csv.str());
  write_file(result.svg_path, svg.str());
  return result;
}

}  // namespace pickbench
