#pragma once
// Procedural generation and validation of cluttered box-world maps.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sensnav/geometry.hpp"

namespace sensnav {

struct WorldConfig {
  int grid_w = 9;        // boxes along x
  int grid_h = 12;       // boxes along y
  double box_w = 0.5;    // m
  double box_h = 0.3;    // m
  int n_sensors = 7;     // including the robot-mounted sensor
  double d_c_min = 0.51; // obstacle-obstacle and obstacle-border clearance
  double d_s_min = 0.75; // sensor-sensor clearance
  double d_r_min = 0.51; // robot clearance to everything
  double robot_radius = 0.16;
  std::uint64_t seed = 1;

  int obstacle_count_min = 3;
  int obstacle_count_max = 8;
  int max_run = 3;           // boxes per obstacle
  int entity_retries = 200;  // per placed entity
  int map_retries = 1000;    // full-map restarts

  double world_width() const { return grid_w * box_w; }
  double world_height() const { return grid_h * box_h; }

  /// Throws ConfigError when an invariant is broken.
  void validate() const;
};

struct EnvironmentMap {
  Rect bounds;
  std::vector<Rect> obstacles;
  std::vector<Vec2> sensors;  // sensors[0] is the robot-mounted sensor
  Vec2 target;
  std::uint64_t seed = 0;

  Vec2 robot() const { return sensors.at(0); }
  bool operator==(const EnvironmentMap&) const = default;
};

struct Violation {
  std::string constraint;
  std::vector<std::string> entities;
  std::string detail;
};

struct GenerationStats {
  int map_attempts = 0;  // full-map attempts consumed, including the accepted one
};

/// Rejection-sampled map. Deterministic in cfg (including cfg.seed).
EnvironmentMap generate_map(const WorldConfig& cfg, GenerationStats* stats = nullptr);

/// Config whose seed is the sub-stream for map `index` of a batch.
WorldConfig config_for_index(const WorldConfig& cfg, std::uint64_t index);

/// Maps 0..count-1 of the batch rooted at cfg.seed; identical for any thread count.
std::vector<EnvironmentMap> generate_maps(const WorldConfig& cfg, std::size_t count, unsigned threads = 1,
                                          std::uint64_t first_index = 0);

/// All broken invariants; empty iff the map is valid for cfg.
std::vector<Violation> validate_map(const EnvironmentMap& m, const WorldConfig& cfg);

std::string describe(const Violation& v);

nlohmann::json to_json(const EnvironmentMap& m);
EnvironmentMap map_from_json(const nlohmann::json& j);

nlohmann::json to_json(const WorldConfig& c);
/// Missing keys keep their defaults.
WorldConfig world_config_from_json(const nlohmann::json& j, WorldConfig base = {});

}  // namespace sensnav
