// Environment configuration: workspace geometry, object set, grasp rule
// constants and placement margins. Serializes to JSON; the hash of the
// canonical JSON form is embedded in datasets and protocol handshakes.
#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace pickbench {

struct WorkspaceConfig {
  double x_half_extent = 0.175;   // meters, 35 cm workspace
  double y_half_extent = 0.25;    // meters, 50 cm workspace
  double table_z = 0.0;
  std::array<double, 3> gripper_home = {0.0, -0.30, 0.10};
  double control_hz = 20.0;
  int physics_substeps = 5;       // 100 Hz physics under 20 Hz control
  int horizon = 50;               // 2.5 s episodes
  double translation_clamp = 0.02;  // meters per control step
};

struct ObjectSpec {
  int object_id = 0;
  std::string name;
  double radius = 0.0;  // disc radius, meters
};

// Constants of the kinematic capture rule.
struct GraspConfig {
  double close_width_threshold = 0.02;  // commanded width below this can attach
  double capture_margin = 0.015;        // planar capture: radius + margin
  double z_tolerance = 0.03;            // gripper must be this close to table
  double release_width = 0.04;          // opening past this drops the object
  double max_width = 0.08;
  double width_rate = 0.04;             // meters per control step
};

struct PlacementConfig {
  double collision_margin = 0.005;  // min gap between object rims
};

struct EnvConfig {
  WorkspaceConfig workspace;
  GraspConfig grasp;
  PlacementConfig placement;
  std::vector<ObjectSpec> objects;

  int object_count() const { return static_cast<int>(objects.size()); }
  const ObjectSpec& object(int id) const { return objects.at(id); }
  double capture_radius(int id) const {
    return objects.at(id).radius + grasp.capture_margin;
  }
  double max_object_radius() const;

  // Throws std::invalid_argument when an invariant is broken.
  void validate() const;

  // First `object_count` objects of the canonical five-object set:
  // apple, orange, rubiks_cube, mug, large_marker.
  static EnvConfig defaults(int object_count = 5);
};

using EnvConfigPtr = std::shared_ptr<const EnvConfig>;

void to_json(nlohmann::json& j, const EnvConfig& c);
void from_json(const nlohmann::json& j, EnvConfig& c);

// FNV-1a over the canonical JSON dump, as a 16-char hex string.
std::string config_hash(const EnvConfig& c);

// The five canonical object names, in object_id order.
const std::vector<std::string>& canonical_object_names();
int object_id_by_name(const EnvConfig& c, const std::string& name);

}  // namespace pickbench
