#include "sensnav/envgen.hpp"

#include <algorithm>
#include <optional>
#include <sstream>
#include <thread>

#include "sensnav/errors.hpp"
#include "sensnav/planner.hpp"
#include "sensnav/rng.hpp"

namespace sensnav {

namespace {

constexpr double kTol = 1e-9;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

std::string name_of_point(std::size_t sensor_index) {
  return sensor_index == 0 ? std::string("robot") : "sensor " + std::to_string(sensor_index);
}

// Stream order per map attempt: obstacle count; per obstacle try
// (run length, orientation, grid x, grid y); then per point try (x, y) for
// the target, the static sensors in order, and finally the robot.
class Sampler {
 public:
  Sampler(const WorldConfig& cfg, std::uint64_t attempt_seed) : cfg_(cfg), rng_(attempt_seed) {
    bounds_ = {0.0, 0.0, cfg.world_width(), cfg.world_height()};
  }

  std::optional<EnvironmentMap> run() {
    EnvironmentMap m;
    m.bounds = bounds_;
    m.seed = cfg_.seed;
    const auto count = rng_.uniform_int(cfg_.obstacle_count_min, cfg_.obstacle_count_max);
    for (std::int64_t i = 0; i < count; ++i) {
      auto r = place_obstacle(m.obstacles);
      if (!r) return std::nullopt;
      m.obstacles.push_back(*r);
    }

    std::vector<Vec2> placed;  // target first, then static sensors
    const auto target = place_point(m.obstacles, placed, cfg_.d_c_min, cfg_.d_s_min);
    if (!target) return std::nullopt;
    m.target = *target;
    placed.push_back(*target);

    std::vector<Vec2> statics;
    for (int s = 1; s < cfg_.n_sensors; ++s) {
      const auto p = place_point(m.obstacles, placed, cfg_.d_c_min, cfg_.d_s_min);
      if (!p) return std::nullopt;
      placed.push_back(*p);
      statics.push_back(*p);
    }

    const auto robot = place_point(m.obstacles, placed, cfg_.d_r_min, cfg_.d_r_min);
    if (!robot) return std::nullopt;
    m.sensors.push_back(*robot);
    m.sensors.insert(m.sensors.end(), statics.begin(), statics.end());
    return m;
  }

 private:
  std::optional<Rect> place_obstacle(const std::vector<Rect>& existing) {
    for (int attempt = 0; attempt < cfg_.entity_retries; ++attempt) {
      const auto run = static_cast<int>(rng_.uniform_int(1, cfg_.max_run));
      const bool vertical = rng_.uniform_int(0, 1) == 1;
      const int cells_x = vertical ? 1 : run;
      const int cells_y = vertical ? run : 1;
      if (cells_x > cfg_.grid_w || cells_y > cfg_.grid_h) {
        // Still consume the position draws to keep the stream layout fixed.
        rng_.next_u64();
        rng_.next_u64();
        continue;
      }
      const auto gx = rng_.uniform_int(0, cfg_.grid_w - cells_x);
      const auto gy = rng_.uniform_int(0, cfg_.grid_h - cells_y);
      const Rect r{static_cast<double>(gx) * cfg_.box_w, static_cast<double>(gy) * cfg_.box_h,
                   static_cast<double>(gx + cells_x) * cfg_.box_w, static_cast<double>(gy + cells_y) * cfg_.box_h};
      if (border_clearance(bounds_, r) < cfg_.d_c_min - kTol) continue;
      const bool clear = std::all_of(existing.begin(), existing.end(),
                                     [&](const Rect& o) { return rect_distance(o, r) >= cfg_.d_c_min - kTol; });
      if (clear) return r;
    }
    return std::nullopt;
  }

  std::optional<Vec2> place_point(const std::vector<Rect>& obstacles, const std::vector<Vec2>& others,
                                  double obstacle_clearance, double point_clearance) {
    for (int attempt = 0; attempt < cfg_.entity_retries; ++attempt) {
      const Vec2 p{rng_.uniform(bounds_.x0, bounds_.x1), rng_.uniform(bounds_.y0, bounds_.y1)};
      if (border_clearance(bounds_, p) < obstacle_clearance) continue;
      const bool clear_obstacles = std::all_of(obstacles.begin(), obstacles.end(), [&](const Rect& o) {
        return distance_to_rect(o, p) >= obstacle_clearance;
      });
      if (!clear_obstacles) continue;
      const bool clear_points = std::all_of(others.begin(), others.end(),
                                            [&](Vec2 q) { return distance(p, q) >= point_clearance; });
      if (clear_points) return p;
    }
    return std::nullopt;
  }

  const WorldConfig& cfg_;
  Rng rng_;
  Rect bounds_;
};

void check_solvable(const EnvironmentMap& m, double inflation, std::vector<Violation>& out) {
  std::optional<CostToGoField> field;
  try {
    field = build_field(m, inflation);
  } catch (const std::exception& e) {
    out.push_back({"solvability", {"target"}, e.what()});
    return;
  }
  for (std::size_t i = 0; i < m.sensors.size(); ++i) {
    try {
      field->cost_to_go(m.sensors[i]);
    } catch (const std::exception& e) {
      out.push_back({"solvability", {name_of_point(i), "target"}, e.what()});
    }
  }
}

}  // namespace

void WorldConfig::validate() const {
  if (grid_w < 2 || grid_h < 2) throw ConfigError("world: grid_w and grid_h must be >= 2");
  if (n_sensors < 1) throw ConfigError("world: n_sensors must be >= 1");
  if (!(d_c_min > 0 && d_s_min > 0 && d_r_min > 0)) throw ConfigError("world: clearances must be > 0");
  if (!(box_w > 0 && box_h > 0)) throw ConfigError("world: box sizes must be > 0");
  if (!(robot_radius >= 0)) throw ConfigError("world: robot_radius must be >= 0");
  if (obstacle_count_min < 0 || obstacle_count_max < obstacle_count_min)
    throw ConfigError("world: invalid obstacle count range");
  if (max_run < 1) throw ConfigError("world: max_run must be >= 1");
  if (entity_retries < 1 || map_retries < 1) throw ConfigError("world: retry caps must be >= 1");
}

EnvironmentMap generate_map(const WorldConfig& cfg, GenerationStats* stats) {
  cfg.validate();
  for (int attempt = 0; attempt < cfg.map_retries; ++attempt) {
    Sampler sampler(cfg, derive_seed(cfg.seed, {static_cast<std::uint64_t>(attempt)}));
    auto m = sampler.run();
    if (!m) continue;
    std::vector<Violation> unsolvable;
    check_solvable(*m, cfg.robot_radius, unsolvable);
    if (!unsolvable.empty()) continue;
    if (stats) stats->map_attempts = attempt + 1;
    return *m;
  }
  throw GenerationExhausted("no valid map after " + std::to_string(cfg.map_retries) + " attempts (seed " +
                            std::to_string(cfg.seed) + ")");
}

WorldConfig config_for_index(const WorldConfig& cfg, std::uint64_t index) {
  WorldConfig out = cfg;
  out.seed = derive_seed(cfg.seed, {index});
  return out;
}

std::vector<EnvironmentMap> generate_maps(const WorldConfig& cfg, std::size_t count, unsigned threads,
                                          std::uint64_t first_index) {
  std::vector<EnvironmentMap> maps(count);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](unsigned worker) {
    try {
      for (std::size_t i = worker; i < count; i += threads) maps[i] = generate_map(config_for_index(cfg, first_index + i));
    } catch (...) {
      errors[worker] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return maps;
}

std::vector<Violation> validate_map(const EnvironmentMap& m, const WorldConfig& cfg) {
  std::vector<Violation> out;
  const Rect& b = m.bounds;
  if (!(b.x1 > b.x0 && b.y1 > b.y0)) out.push_back({"bounds", {"bounds"}, "degenerate bounds"});

  for (std::size_t i = 0; i < m.obstacles.size(); ++i) {
    const Rect& r = m.obstacles[i];
    const std::string name = "obstacle " + std::to_string(i);
    if (!(r.x1 > r.x0 && r.y1 > r.y0)) out.push_back({"obstacle_shape", {name}, "empty rectangle"});
    const double c = border_clearance(b, r);
    if (c < 0) out.push_back({"obstacle_in_bounds", {name}, "extends past the bounds by " + fmt(-c) + " m"});
    if (c < cfg.d_c_min - kTol)
      out.push_back({"obstacle_border_clearance", {name, "border"}, "clearance " + fmt(c) + " m < " + fmt(cfg.d_c_min)});
    for (std::size_t j = i + 1; j < m.obstacles.size(); ++j) {
      const double d = rect_distance(r, m.obstacles[j]);
      if (d < cfg.d_c_min - kTol)
        out.push_back({"obstacle_clearance", {name, "obstacle " + std::to_string(j)},
                       "distance " + fmt(d) + " m < " + fmt(cfg.d_c_min)});
    }
  }

  if (static_cast<int>(m.sensors.size()) != cfg.n_sensors)
    out.push_back({"sensor_count", {"sensors"},
                   std::to_string(m.sensors.size()) + " sensors, expected " + std::to_string(cfg.n_sensors)});

  // Points: target and static sensors use d_c_min / d_s_min, the robot d_r_min.
  struct Point {
    std::string name;
    Vec2 p;
    bool robot;
  };
  std::vector<Point> points{{"target", m.target, false}};
  for (std::size_t i = 0; i < m.sensors.size(); ++i) points.push_back({name_of_point(i), m.sensors[i], i == 0});

  for (std::size_t a = 0; a < points.size(); ++a) {
    const auto& pa = points[a];
    const double obstacle_clearance = pa.robot ? cfg.d_r_min : cfg.d_c_min;
    const double bc = border_clearance(b, pa.p);
    if (bc < obstacle_clearance - kTol)
      out.push_back({"point_border_clearance", {pa.name, "border"}, "clearance " + fmt(bc) + " m"});
    for (std::size_t i = 0; i < m.obstacles.size(); ++i) {
      const double d = distance_to_rect(m.obstacles[i], pa.p);
      if (d < obstacle_clearance - kTol)
        out.push_back({"point_obstacle_clearance", {pa.name, "obstacle " + std::to_string(i)},
                       "distance " + fmt(d) + " m"});
    }
    for (std::size_t c = a + 1; c < points.size(); ++c) {
      const auto& pc = points[c];
      const double need = (pa.robot || pc.robot) ? cfg.d_r_min : cfg.d_s_min;
      const double d = distance(pa.p, pc.p);
      if (d < need - kTol)
        out.push_back({"point_clearance", {pa.name, pc.name}, "distance " + fmt(d) + " m < " + fmt(need)});
    }
  }

  if (!m.sensors.empty()) check_solvable(m, cfg.robot_radius, out);
  return out;
}

std::string describe(const Violation& v) {
  std::string s = v.constraint + " [";
  for (std::size_t i = 0; i < v.entities.size(); ++i) s += (i ? ", " : "") + v.entities[i];
  s += "]";
  if (!v.detail.empty()) s += ": " + v.detail;
  return s;
}

nlohmann::json to_json(const EnvironmentMap& m) {
  nlohmann::json j;
  j["bounds"] = {m.bounds.x0, m.bounds.y0, m.bounds.x1, m.bounds.y1};
  j["obstacles"] = nlohmann::json::array();
  for (const auto& r : m.obstacles) j["obstacles"].push_back({r.x0, r.y0, r.x1, r.y1});
  j["sensors"] = nlohmann::json::array();
  for (const auto& s : m.sensors) j["sensors"].push_back({s.x, s.y});
  j["target"] = {m.target.x, m.target.y};
  j["seed"] = m.seed;
  return j;
}

EnvironmentMap map_from_json(const nlohmann::json& j) {
  auto rect = [](const nlohmann::json& a) {
    return Rect{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>(), a.at(3).get<double>()};
  };
  auto point = [](const nlohmann::json& a) { return Vec2{a.at(0).get<double>(), a.at(1).get<double>()}; };
  EnvironmentMap m;
  m.bounds = rect(j.at("bounds"));
  for (const auto& o : j.at("obstacles")) m.obstacles.push_back(rect(o));
  for (const auto& s : j.at("sensors")) m.sensors.push_back(point(s));
  m.target = point(j.at("target"));
  m.seed = j.value("seed", std::uint64_t{0});
  return m;
}

nlohmann::json to_json(const WorldConfig& c) {
  return {{"grid_w", c.grid_w},
          {"grid_h", c.grid_h},
          {"box_w", c.box_w},
          {"box_h", c.box_h},
          {"n_sensors", c.n_sensors},
          {"d_c_min", c.d_c_min},
          {"d_s_min", c.d_s_min},
          {"d_r_min", c.d_r_min},
          {"robot_radius", c.robot_radius},
          {"seed", c.seed},
          {"obstacle_count_min", c.obstacle_count_min},
          {"obstacle_count_max", c.obstacle_count_max},
          {"max_run", c.max_run},
          {"entity_retries", c.entity_retries},
          {"map_retries", c.map_retries}};
}

WorldConfig world_config_from_json(const nlohmann::json& j, WorldConfig c) {
  c.grid_w = j.value("grid_w", c.grid_w);
  c.grid_h = j.value("grid_h", c.grid_h);
  c.box_w = j.value("box_w", c.box_w);
  c.box_h = j.value("box_h", c.box_h);
  c.n_sensors = j.value("n_sensors", c.n_sensors);
  c.d_c_min = j.value("d_c_min", c.d_c_min);
  c.d_s_min = j.value("d_s_min", c.d_s_min);
  c.d_r_min = j.value("d_r_min", c.d_r_min);
  c.robot_radius = j.value("robot_radius", c.robot_radius);
  c.seed = j.value("seed", c.seed);
  c.obstacle_count_min = j.value("obstacle_count_min", c.obstacle_count_min);
  c.obstacle_count_max = j.value("obstacle_count_max", c.obstacle_count_max);
  c.max_run = j.value("max_run", c.max_run);
  c.entity_retries = j.value("entity_retries", c.entity_retries);
  c.map_retries = j.value("map_retries", c.map_retries);
  return c;
}

}  // namespace sensnav
