#include "pickbench/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "pickbench/util.hpp"

namespace pickbench {

namespace {

// Function-local so it is safe to use from other translation units' static
// initializers.
const std::vector<ObjectSpec>& canonical_objects() {
  static const std::vector<ObjectSpec> objects = {
      {0, "apple", 0.040},
      {1, "orange", 0.037},
      {2, "rubiks_cube", 0.035},
      {3, "mug", 0.045},
      {4, "large_marker", 0.012},
  };
  return objects;
}

}  // namespace

const std::vector<std::string>& canonical_object_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& o : canonical_objects()) n.push_back(o.name);
    return n;
  }();
  return names;
}

int object_id_by_name(const EnvConfig& c, const std::string& name) {
  for (const auto& o : c.objects) {
    if (o.name == name) return o.object_id;
  }
  throw std::invalid_argument("unknown object name: " + name);
}

double EnvConfig::max_object_radius() const {
  double r = 0.0;
  for (const auto& o : objects) r = std::max(r, o.radius);
  return r;
}

EnvConfig EnvConfig::defaults(int object_count) {
  if (object_count < 1 || object_count > 5) {
    throw std::invalid_argument("object_count must be in [1, 5]");
  }
  EnvConfig c;
  const auto& all = canonical_objects();
  c.objects.assign(all.begin(), all.begin() + object_count);
  c.validate();
  return c;
}

void EnvConfig::validate() const {
  const auto& w = workspace;
  if (w.x_half_extent <= 0 || w.y_half_extent <= 0) {
    throw std::invalid_argument("workspace extents must be positive");
  }
  if (w.control_hz <= 0 || w.physics_substeps < 1 || w.horizon < 1) {
    throw std::invalid_argument("control rates must be positive");
  }
  if (std::abs(w.horizon / w.control_hz - 2.5) > 1e-9) {
    throw std::invalid_argument("horizon / control_hz must equal 2.5 s");
  }
  if (std::abs(w.physics_substeps * w.control_hz - 100.0) > 1e-9) {
    throw std::invalid_argument("substeps * control_hz must equal 100 Hz");
  }
  if (w.translation_clamp <= 0) {
    throw std::invalid_argument("translation_clamp must be positive");
  }
  if (grasp.max_width <= 0 || grasp.width_rate <= 0 ||
      grasp.close_width_threshold <= 0 ||
      grasp.release_width <= grasp.close_width_threshold) {
    throw std::invalid_argument("grasp constants inconsistent");
  }
  if (placement.collision_margin < 0) {
    throw std::invalid_argument("collision_margin must be non-negative");
  }
  if (objects.empty() || objects.size() > 5) {
    throw std::invalid_argument("expected 1..5 objects");
  }
  const auto& names = canonical_object_names();
  std::set<int> ids;
  for (const auto& o : objects) {
    if (o.radius <= 0) throw std::invalid_argument("object radii must be positive");
    if (!ids.insert(o.object_id).second) {
      throw std::invalid_argument("duplicate object id");
    }
    if (std::find(names.begin(), names.end(), o.name) == names.end()) {
      throw std::invalid_argument("unknown object name: " + o.name);
    }
  }
  for (int i = 0; i < object_count(); ++i) {
    if (objects[i].object_id != i) {
      throw std::invalid_argument("object ids must be 0..n-1 in order");
    }
  }
}

void to_json(nlohmann::json& j, const EnvConfig& c) {
  j = nlohmann::json{
      {"workspace",
       {{"x_half_extent", c.workspace.x_half_extent},
        {"y_half_extent", c.workspace.y_half_extent},
        {"table_z", c.workspace.table_z},
        {"gripper_home", c.workspace.gripper_home},
        {"control_hz", c.workspace.control_hz},
        {"physics_substeps", c.workspace.physics_substeps},
        {"horizon", c.workspace.horizon},
        {"translation_clamp", c.workspace.translation_clamp}}},
      {"grasp",
       {{"close_width_threshold", c.grasp.close_width_threshold},
        {"capture_margin", c.grasp.capture_margin},
        {"z_tolerance", c.grasp.z_tolerance},
        {"release_width", c.grasp.release_width},
        {"max_width", c.grasp.max_width},
        {"width_rate", c.grasp.width_rate}}},
      {"placement", {{"collision_margin", c.placement.collision_margin}}},
  };
  auto& objs = j["objects"] = nlohmann::json::array();
  for (const auto& o : c.objects) {
    objs.push_back({{"object_id", o.object_id}, {"name", o.name}, {"radius", o.radius}});
  }
}

void from_json(const nlohmann::json& j, EnvConfig& c) {
  const auto& w = j.at("workspace");
  w.at("x_half_extent").get_to(c.workspace.x_half_extent);
  w.at("y_half_extent").get_to(c.workspace.y_half_extent);
  w.at("table_z").get_to(c.workspace.table_z);
  w.at("gripper_home").get_to(c.workspace.gripper_home);
  w.at("control_hz").get_to(c.workspace.control_hz);
  w.at("physics_substeps").get_to(c.workspace.physics_substeps);
  w.at("horizon").get_to(c.workspace.horizon);
  w.at("translation_clamp").get_to(c.workspace.translation_clamp);
  const auto& g = j.at("grasp");
  g.at("close_width_threshold").get_to(c.grasp.close_width_threshold);
  g.at("capture_margin").get_to(c.grasp.capture_margin);
  g.at("z_tolerance").get_to(c.grasp.z_tolerance);
  g.at("release_width").get_to(c.grasp.release_width);
  g.at("max_width").get_to(c.grasp.max_width);
  g.at("width_rate").get_to(c.grasp.width_rate);
  j.at("placement").at("collision_margin").get_to(c.placement.collision_margin);
  c.objects.clear();
  for (const auto& jo : j.at("objects")) {
    ObjectSpec o;
    jo.at("object_id").get_to(o.object_id);
    jo.at("name").get_to(o.name);
    jo.at("radius").get_to(o.radius);
    c.objects.push_back(o);
  }
  c.validate();
}

std::string config_hash(const EnvConfig& c) {
  nlohmann::json j = c;
  return hex64(fnv1a64(j.dump()));
}

}  // namespace pickbench
