#include "sensnav/observe.hpp"

#include <cmath>
#include <string>

namespace sensnav {

double ObserveConfig::range_for(const EnvironmentMap& m) const {
  if (max_range > 0.0) return max_range;
  return std::hypot(m.bounds.width(), m.bounds.height());
}

std::vector<double> Observation::flatten() const {
  std::vector<double> out(rays.size() * kRayFeatures, 0.0);
  for (std::size_t r = 0; r < rays.size(); ++r) {
    out[r * kRayFeatures] = rays[r].distance;
    out[r * kRayFeatures + 1 + static_cast<int>(rays[r].hit)] = 1.0;
  }
  return out;
}

Observation render_observation(const EnvironmentMap& m, std::size_t sensor_index, const ObserveConfig& cfg) {
  const Vec2 origin = m.sensors.at(sensor_index);
  const double range = cfg.range_for(m);
  Observation obs;
  obs.rays.resize(static_cast<std::size_t>(cfg.rays));
  for (int k = 0; k < cfg.rays; ++k) {
    const Vec2 dir = direction(k, cfg.rays);
    double best = range;
    HitClass hit = HitClass::None;
    auto consider = [&](std::optional<double> t, HitClass c) {
      if (t && *t < best) {
        best = *t;
        hit = c;
      }
    };
    consider(ray_rect_exit(m.bounds, origin, dir), HitClass::Border);
    for (const auto& r : m.obstacles) consider(ray_rect_entry(r, origin, dir), HitClass::Obstacle);
    for (std::size_t j = 0; j < m.sensors.size(); ++j) {
      if (j == sensor_index) continue;
      if (j == 0) {
        consider(ray_disc(m.sensors[j], cfg.robot_radius, origin, dir), HitClass::Robot);
      } else {
        consider(ray_disc(m.sensors[j], cfg.sensor_radius, origin, dir), HitClass::Sensor);
      }
    }
    consider(ray_disc(m.target, cfg.target_radius, origin, dir), HitClass::Target);
    obs.rays[static_cast<std::size_t>(k)] = {hit == HitClass::None ? 1.0 : best / range, hit};
  }
  return obs;
}

std::vector<Observation> render_all(const EnvironmentMap& m, const ObserveConfig& cfg) {
  std::vector<Observation> out;
  out.reserve(m.sensors.size());
  for (std::size_t i = 0; i < m.sensors.size(); ++i) out.push_back(render_observation(m, i, cfg));
  return out;
}

std::size_t CommGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& nb : neighbors) total += nb.size();
  return total / 2;
}

CommGraph build_comm_graph(const std::vector<Vec2>& positions, double range) {
  CommGraph g;
  g.n = static_cast<int>(positions.size());
  g.range = range;
  g.neighbors.assign(positions.size(), {});
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.n; ++j) {
      if (i == j) continue;
      if (distance(positions[i], positions[j]) <= range) g.neighbors[i].push_back(j);
    }
  }
  return g;
}

nlohmann::json range_to_json(double r) { return std::isinf(r) ? nlohmann::json("inf") : nlohmann::json(r); }

double range_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return kInfiniteRange;
    return std::stod(s);
  }
  if (j.is_null()) return kInfiniteRange;
  return j.get<double>();
}

nlohmann::json to_json(const ObserveConfig& c) {
  return {{"rays", c.rays},
          {"max_range", c.max_range},
          {"sensor_radius", c.sensor_radius},
          {"target_radius", c.target_radius},
          {"robot_radius", c.robot_radius}};
}

ObserveConfig observe_config_from_json(const nlohmann::json& j, ObserveConfig c) {
  c.rays = j.value("rays", c.rays);
  c.max_range = j.value("max_range", c.max_range);
  c.sensor_radius = j.value("sensor_radius", c.sensor_radius);
  c.target_radius = j.value("target_radius", c.target_radius);
  c.robot_radius = j.value("robot_radius", c.robot_radius);
  return c;
}

}  // namespace sensnav
