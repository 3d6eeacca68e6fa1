#include "pickbench/placement.hpp"

#include <algorithm>
#include <set>

#include "pickbench/rng.hpp"

namespace pickbench {

namespace {

constexpr int kJitterMaxAttempts = 1000;
constexpr int kFullRandomMaxAttempts = 10000;
constexpr int kMatchingMaxAttempts = 1000;

const std::array<Eigen::Vector2d, 5> kRegionCenters = {
    Eigen::Vector2d(0.0, 0.0),
    Eigen::Vector2d(-0.10, 0.15),
    Eigen::Vector2d(0.10, 0.15),
    Eigen::Vector2d(-0.10, -0.15),
    Eigen::Vector2d(0.10, -0.15),
};

bool collides(const EnvConfig& cfg, const std::vector<Eigen::Vector2d>& placed,
              const std::vector<int>& placed_ids, int id, const Eigen::Vector2d& p) {
  for (size_t k = 0; k < placed.size(); ++k) {
    const double min_gap = cfg.object(id).radius + cfg.object(placed_ids[k]).radius +
                           cfg.placement.collision_margin;
    if ((placed[k] - p).norm() < min_gap) return true;
  }
  return false;
}

PlacementSample jitter_within(const EnvConfig& cfg, const Regime& regime,
                              const std::vector<int>& assignment, Rng& rng,
                              uint64_t seed) {
  const auto regions = canonical_layout(regime);
  const int n = cfg.object_count();
  if (static_cast<int>(assignment.size()) != n) {
    throw std::invalid_argument("region assignment size mismatch");
  }
  PlacementSample sample;
  sample.regime = regime;
  sample.region_assignment = assignment;
  sample.seed = seed;
  sample.positions.resize(n);

  std::vector<Eigen::Vector2d> placed;
  std::vector<int> placed_ids;
  for (int id = 0; id < n; ++id) {
    const Region& reg = regions.at(assignment[id]);
    const Eigen::Vector2d he = regime.half_extents();
    // The center-region object is pinned to the workspace center in the
    // smallest regime.
    if (regime.kind == RegimeKind::SmallJitter && reg.region_id == 0) {
      sample.positions[id] = Eigen::Vector2d::Zero();
      placed.push_back(sample.positions[id]);
      placed_ids.push_back(id);
      continue;
    }
    bool ok = false;
    for (int attempt = 0; attempt < kJitterMaxAttempts; ++attempt) {
      Eigen::Vector2d p(rng.uniform(reg.center.x() - he.x(), reg.center.x() + he.x()),
                        rng.uniform(reg.center.y() - he.y(), reg.center.y() + he.y()));
      if (!collides(cfg, placed, placed_ids, id, p)) {
        sample.positions[id] = p;
        placed.push_back(p);
        placed_ids.push_back(id);
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw PlacementError("jitter placement failed for object " +
                           cfg.object(id).name + " after 1000 attempts, seed " +
                           std::to_string(seed));
    }
  }
  return sample;
}

}  // namespace

std::string Regime::name() const {
  switch (kind) {
    case RegimeKind::SmallJitter: return "small_jitter";
    case RegimeKind::MediumJitter: return "medium_jitter";
    case RegimeKind::LargeJitter: return "large_jitter";
    case RegimeKind::FullRandom: return "full_random";
  }
  return "unknown";
}

Regime Regime::from_kind(RegimeKind k) {
  switch (k) {
    case RegimeKind::SmallJitter: return small_jitter();
    case RegimeKind::MediumJitter: return medium_jitter();
    case RegimeKind::LargeJitter: return large_jitter();
    case RegimeKind::FullRandom: return full_random();
  }
  throw std::invalid_argument("bad regime kind");
}

Regime Regime::from_name(const std::string& name) {
  for (RegimeKind k : {RegimeKind::SmallJitter, RegimeKind::MediumJitter,
                       RegimeKind::LargeJitter, RegimeKind::FullRandom}) {
    if (from_kind(k).name() == name) return from_kind(k);
  }
  throw std::invalid_argument("unknown regime: " + name);
}

std::vector<Region> canonical_layout(const Regime& regime) {
  std::vector<Region> regions;
  for (int i = 0; i < 5; ++i) {
    regions.push_back({i, kRegionCenters[i], regime.half_extents()});
  }
  return regions;
}

std::vector<int> default_region_assignment(int object_count) {
  // apple->R1, orange->R2, rubiks_cube->center, mug->R3, large_marker->R4
  static const std::array<int, 5> full = {1, 2, 0, 3, 4};
  if (object_count < 1 || object_count > 5) {
    throw std::invalid_argument("object_count must be in [1, 5]");
  }
  return std::vector<int>(full.begin(), full.begin() + object_count);
}

void PlacementSample::validate(const EnvConfig& cfg) const {
  const int n = cfg.object_count();
  if (static_cast<int>(positions.size()) != n) {
    throw std::invalid_argument("placement has wrong object count");
  }
  const double X = cfg.workspace.x_half_extent;
  const double Y = cfg.workspace.y_half_extent;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d& p = positions[i];
    if (regime.kind == RegimeKind::FullRandom) {
      const double r = cfg.object(i).radius;
      if (std::abs(p.x()) > X - r + 1e-12 || std::abs(p.y()) > Y - r + 1e-12) {
        throw std::invalid_argument("object outside shrunk workspace");
      }
    } else {
      if (!region_assignment) {
        throw std::invalid_argument("jitter sample missing region assignment");
      }
      const auto regions = canonical_layout(regime);
      const Region& reg = regions.at(region_assignment->at(i));
      const Eigen::Vector2d d = (p - reg.center).cwiseAbs();
      if (d.x() > reg.half_extents.x() + 1e-12 || d.y() > reg.half_extents.y() + 1e-12) {
        throw std::invalid_argument("object outside its jitter box");
      }
      if (std::abs(p.x()) > X + 1e-12 || std::abs(p.y()) > Y + 1e-12) {
        throw std::invalid_argument("object outside workspace");
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double min_gap = cfg.object(i).radius + cfg.object(j).radius +
                             cfg.placement.collision_margin;
      if ((positions[i] - positions[j]).norm() < min_gap - 1e-12) {
        throw std::invalid_argument("placement violates collision margin");
      }
    }
  }
}

PlacementSample sample_jitter(const EnvConfig& cfg, const Regime& regime,
                              const std::vector<int>& assignment, uint64_t seed) {
  if (!regime.is_jitter()) {
    throw std::invalid_argument("sample_jitter requires a jitter regime");
  }
  Rng rng(seed);
  return jitter_within(cfg, regime, assignment, rng, seed);
}

PlacementSample sample_full_random(const EnvConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  const int n = cfg.object_count();
  const double X = cfg.workspace.x_half_extent;
  const double Y = cfg.workspace.y_half_extent;

  PlacementSample sample;
  sample.regime = Regime::full_random();
  sample.seed = seed;
  sample.positions.resize(n);

  for (int attempt = 0; attempt < kFullRandomMaxAttempts; ++attempt) {
    for (int id = 0; id < n; ++id) {
      const double r = cfg.object(id).radius;
      sample.positions[id] =
          Eigen::Vector2d(rng.uniform(-(X - r), X - r), rng.uniform(-(Y - r), Y - r));
    }
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      for (int j = i + 1; j < n && ok; ++j) {
        const double min_gap = cfg.object(i).radius + cfg.object(j).radius +
                               cfg.placement.collision_margin;
        if ((sample.positions[i] - sample.positions[j]).norm() < min_gap) ok = false;
      }
    }
    if (ok) return sample;
  }
  throw PlacementError("full-random placement failed after 10000 attempts, seed " +
                       std::to_string(seed));
}

void PairingSplit::validate() const {
  if (train_regions.size() != 5 || eval_regions.size() != 5) {
    throw std::invalid_argument("pairing split must cover 5 objects");
  }
  std::set<int> train_union;
  for (int i = 0; i < 5; ++i) {
    std::set<int> all;
    for (int r : train_regions[i]) all.insert(r);
    for (int r : eval_regions[i]) all.insert(r);
    if (all != std::set<int>{0, 1, 2, 3, 4}) {
      throw std::invalid_argument("train and eval regions must partition all five");
    }
    for (int r : train_regions[i]) train_union.insert(r);
  }
  if (train_union != std::set<int>{0, 1, 2, 3, 4}) {
    throw std::invalid_argument("union of train regions must cover all five");
  }
}

PairingSplit make_pairing_split(uint64_t seed) {
  std::vector<int> row(5);
  for (int i = 0; i < 5; ++i) row[i] = i;
  if (seed != 0) {
    Rng rng(mix64(seed));
    rng.shuffle(row);
  }
  PairingSplit split;
  split.seed = seed;
  split.train_regions.resize(5);
  split.eval_regions.resize(5);
  for (int i = 0; i < 5; ++i) {
    const int p = row[i];  // object i takes circulant row p
    split.train_regions[i] = {p, (p + 1) % 5, (p + 2) % 5};
    split.eval_regions[i] = {(p + 3) % 5, (p + 4) % 5};
  }
  split.validate();
  return split;
}

PlacementSample sample_compositional(const EnvConfig& cfg, const PairingSplit& split,
                                     SplitPhase phase, const Regime& regime,
                                     int instructed_id, double canonical_bias,
                                     uint64_t seed) {
  if (!regime.is_jitter()) {
    throw std::invalid_argument("compositional sampling requires a jitter regime");
  }
  if (cfg.object_count() != 5) {
    throw std::invalid_argument("compositional split is defined on 5 objects");
  }
  split.validate();
  if (instructed_id < 0 || instructed_id >= 5) {
    throw std::invalid_argument("instructed object out of range");
  }
  Rng rng(seed);
  std::vector<int> assignment(5, -1);

  if (phase == SplitPhase::Train) {
    if (rng.uniform() < canonical_bias) {
      for (int i = 0; i < 5; ++i) assignment[i] = split.train_regions[i][0];
    } else {
      bool found = false;
      std::vector<int> order = {0, 1, 2, 3, 4};
      for (int attempt = 0; attempt < kMatchingMaxAttempts && !found; ++attempt) {
        std::fill(assignment.begin(), assignment.end(), -1);
        rng.shuffle(order);
        std::set<int> used;
        bool ok = true;
        for (int obj : order) {
          std::vector<int> options;
          for (int r : split.train_regions[obj]) {
            if (!used.count(r)) options.push_back(r);
          }
          if (options.empty()) {
            ok = false;
            break;
          }
          const int pick = options[rng.uniform_int(static_cast<int>(options.size()))];
          assignment[obj] = pick;
          used.insert(pick);
        }
        found = ok;
      }
      if (!found) {
        throw PlacementError("no train-phase matching found, seed " +
                             std::to_string(seed));
      }
    }
  } else {
    const auto& evals = split.eval_regions[instructed_id];
    assignment[instructed_id] = evals[rng.uniform_int(2)];
    std::vector<int> remaining;
    for (int r = 0; r < 5; ++r) {
      if (r != assignment[instructed_id]) remaining.push_back(r);
    }
    rng.shuffle(remaining);
    int k = 0;
    for (int obj = 0; obj < 5; ++obj) {
      if (obj == instructed_id) continue;
      assignment[obj] = remaining[k++];
    }
  }

  PlacementSample sample = jitter_within(cfg, regime, assignment, rng, seed);
  sample.seed = seed;
  return sample;
}

void to_json(nlohmann::json& j, const Regime& r) {
  j = nlohmann::json{{"kind", r.name()},
                     {"region_dims", {r.region_dims.x(), r.region_dims.y()}}};
}

void from_json(const nlohmann::json& j, Regime& r) {
  r = Regime::from_name(j.at("kind").get<std::string>());
  if (j.contains("region_dims")) {
    r.region_dims.x() = j["region_dims"][0].get<double>();
    r.region_dims.y() = j["region_dims"][1].get<double>();
  }
}

}  // namespace pickbench
