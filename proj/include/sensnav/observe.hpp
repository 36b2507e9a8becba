#pragma once
// Per-sensor observations and the disk-model communication graph.
//
// Each sensor sees the world through R equally spaced rays in a frame shared
// by all sensors (ray r points at angle 2*pi*r/R from +x). A ray reports the
// nearest hit and its class; this stands in for an omnidirectional image.

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include <json.hpp>

#include "sensnav/envgen.hpp"

namespace sensnav {

enum class HitClass : std::uint8_t { None = 0, Border, Obstacle, Sensor, Robot, Target };
inline constexpr int kHitClassCount = 6;
inline constexpr int kRayFeatures = 1 + kHitClassCount;  // distance + one-hot

struct ObserveConfig {
  int rays = 64;
  double max_range = 0.0;  // <= 0 selects the environment diagonal
  double sensor_radius = 0.05;
  double target_radius = 0.05;
  double robot_radius = 0.16;

  int width() const { return rays * kRayFeatures; }
  double range_for(const EnvironmentMap& m) const;
};

struct RayHit {
  double distance = 1.0;  // normalized by max range
  HitClass hit = HitClass::None;
};

struct Observation {
  std::vector<RayHit> rays;

  /// Row-major [distance, one-hot x 6] per ray.
  std::vector<double> flatten() const;
};

Observation render_observation(const EnvironmentMap& m, std::size_t sensor_index, const ObserveConfig& cfg);

/// Observations of every sensor, index-aligned with m.sensors.
std::vector<Observation> render_all(const EnvironmentMap& m, const ObserveConfig& cfg);

struct CommGraph {
  int n = 0;
  std::vector<std::vector<int>> neighbors;  // sorted, no self loops
  double range = 0.0;

  std::size_t edge_count() const;
};

inline constexpr double kInfiniteRange = std::numeric_limits<double>::infinity();

/// j is a neighbour of i iff |p_i - p_j| <= range (i != j).
CommGraph build_comm_graph(const std::vector<Vec2>& positions, double range);

/// Ranges serialize as numbers, with "inf" for the complete graph.
nlohmann::json range_to_json(double r);
double range_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ObserveConfig& c);
ObserveConfig observe_config_from_json(const nlohmann::json& j, ObserveConfig base = {});

}  // namespace sensnav
