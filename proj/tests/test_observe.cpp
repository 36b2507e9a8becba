#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "sensnav/observe.hpp"
#include "sensnav/rng.hpp"

using namespace sensnav;

namespace {

Vec2 rotate(Vec2 p, Vec2 about, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const Vec2 d = p - about;
  return about + Vec2{c * d.x - s * d.y, s * d.x + c * d.y};
}

Rect rotate_quarter(const Rect& r, Vec2 about) {
  const Vec2 a = rotate({r.x0, r.y0}, about, std::numbers::pi / 2);
  const Vec2 b = rotate({r.x1, r.y1}, about, std::numbers::pi / 2);
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.x, b.x), std::max(a.y, b.y)};
}

void expect_shifted(const Observation& before, const Observation& after) {
  const std::size_t n = before.rays.size();
  for (std::size_t k = 0; k < n; ++k) {
    const auto& a = before.rays[k];
    const auto& b = after.rays[(k + 1) % n];
    EXPECT_EQ(a.hit, b.hit) << "ray " << k;
    EXPECT_NEAR(a.distance, b.distance, 1e-9) << "ray " << k;
  }
}

}  // namespace

TEST(Observe, BorderHitClosedForm) {
  EnvironmentMap m;
  m.bounds = {0, 0, 4, 4};
  m.sensors = {{2, 2}};
  m.target = {100, 100};  // out of the box, never hit
  ObserveConfig cfg;
  const auto o = render_observation(m, 0, cfg);
  const double range = std::hypot(4.0, 4.0);
  EXPECT_EQ(o.rays[0].hit, HitClass::Border);
  EXPECT_NEAR(o.rays[0].distance, 2.0 / range, 1e-12);
  EXPECT_NEAR(o.rays[8].distance, 2.0 * std::sqrt(2.0) / range, 1e-12);  // 45 degrees, into the corner
}

TEST(Observe, TargetDisc) {
  EnvironmentMap m;
  m.bounds = {0, 0, 4, 4};
  m.sensors = {{1, 2}};
  m.target = {2, 2};
  ObserveConfig cfg;
  const auto o = render_observation(m, 0, cfg);
  EXPECT_EQ(o.rays[0].hit, HitClass::Target);
  EXPECT_NEAR(o.rays[0].distance, 0.95 / cfg.range_for(m), 1e-12);
}

TEST(Observe, NothingInRange) {
  EnvironmentMap m;
  m.bounds = {0, 0, 4, 4};
  m.sensors = {{2, 2}};
  m.target = {3.5, 3.5};
  ObserveConfig cfg;
  cfg.max_range = 0.5;
  const auto o = render_observation(m, 0, cfg);
  for (const auto& r : o.rays) {
    EXPECT_EQ(r.hit, HitClass::None);
    EXPECT_EQ(r.distance, 1.0);
  }
}

TEST(Observe, ClassesAndSelfExclusion) {
  EnvironmentMap m;
  m.bounds = {0, 0, 4, 4};
  m.sensors = {{1, 1}, {3, 1}, {1, 3}};
  m.target = {3.5, 3.5};
  m.obstacles = {{0.2, 0.8, 0.4, 1.2}};
  ObserveConfig cfg;
  cfg.rays = 4;
  const auto robot = render_observation(m, 0, cfg);
  EXPECT_EQ(robot.rays[0].hit, HitClass::Sensor);
  EXPECT_EQ(robot.rays[1].hit, HitClass::Sensor);
  EXPECT_EQ(robot.rays[2].hit, HitClass::Obstacle);
  EXPECT_EQ(robot.rays[3].hit, HitClass::Border);
  const auto s1 = render_observation(m, 1, cfg);
  EXPECT_EQ(s1.rays[2].hit, HitClass::Robot);
  EXPECT_NEAR(s1.rays[2].distance, (2.0 - 0.16) / cfg.range_for(m), 1e-12);

  const auto flat = robot.flatten();
  ASSERT_EQ(flat.size(), 4u * kRayFeatures);
  for (int r = 0; r < 4; ++r) {
    double onehot = 0;
    for (int c = 1; c < kRayFeatures; ++c) onehot += flat[r * kRayFeatures + c];
    EXPECT_EQ(onehot, 1.0);
  }
}

TEST(Observe, RotationByOneRayShiftsRectWorld) {
  WorldConfig wc;
  wc.seed = 3;
  const auto base = generate_map(wc);
  ObserveConfig cfg;
  cfg.rays = 4;
  for (std::size_t i = 0; i < base.sensors.size(); ++i) {
    const Vec2 c = base.sensors[i];
    EnvironmentMap rot = base;
    rot.bounds = rotate_quarter(base.bounds, c);
    for (auto& o : rot.obstacles) o = rotate_quarter(o, c);
    for (auto& s : rot.sensors) s = rotate(s, c, std::numbers::pi / 2);
    rot.target = rotate(base.target, c, std::numbers::pi / 2);
    expect_shifted(render_observation(base, i, cfg), render_observation(rot, i, cfg));
  }
}

TEST(Observe, RotationByOneRayShiftsDiscs) {
  Rng rng(21);
  ObserveConfig cfg;
  cfg.max_range = 2.0;
  for (int trial = 0; trial < 20; ++trial) {
    EnvironmentMap m;
    m.bounds = {-50, -50, 50, 50};
    for (int i = 0; i < 7; ++i) m.sensors.push_back({rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)});
    m.target = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    const std::size_t i = static_cast<std::size_t>(trial % 7);
    const double step = 2 * std::numbers::pi / cfg.rays;
    EnvironmentMap rot = m;
    for (auto& s : rot.sensors) s = rotate(s, m.sensors[i], step);
    rot.target = rotate(m.target, m.sensors[i], step);
    expect_shifted(render_observation(m, i, cfg), render_observation(rot, i, cfg));
  }
}

TEST(CommGraph, Examples) {
  const auto g0 = build_comm_graph({{0, 0}, {1, 0}, {0, 1}}, 0.0);
  for (const auto& nb : g0.neighbors) EXPECT_TRUE(nb.empty());
  const auto g2 = build_comm_graph({{0, 0}, {1.9, 0}}, 2.0);
  EXPECT_EQ(g2.neighbors[0], std::vector<int>{1});
  EXPECT_EQ(g2.neighbors[1], std::vector<int>{0});
  const auto ginf = build_comm_graph({{0, 0}, {100, 0}, {0, 1e6}, {3, 3}}, kInfiniteRange);
  EXPECT_EQ(ginf.edge_count(), 6u);
}

TEST(CommGraph, MatchesBruteForce) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec2> pos;
    for (int i = 0; i < 13; ++i) pos.push_back({rng.uniform(0.0, 4.5), rng.uniform(0.0, 3.6)});
    const double range = rng.uniform(0.0, 3.0);
    const auto g = build_comm_graph(pos, range);
    const auto s = oracle::adjacency(pos, range);
    for (int i = 0; i < 13; ++i) {
      std::vector<int> expect;
      for (int j = 0; j < 13; ++j)
        if (s[i][j] != 0.0) expect.push_back(j);
      EXPECT_EQ(g.neighbors[i], expect);
      for (int j : g.neighbors[i]) {
        EXPECT_NE(i, j);
        const auto& back = g.neighbors[j];
        EXPECT_NE(std::find(back.begin(), back.end(), i), back.end());
      }
    }
    // Monotone in range.
    const auto wider = build_comm_graph(pos, range + 0.5);
    for (int i = 0; i < 13; ++i)
      for (int j : g.neighbors[i])
        EXPECT_NE(std::find(wider.neighbors[i].begin(), wider.neighbors[i].end(), j), wider.neighbors[i].end());
  }
}

TEST(CommGraph, RangeJson) {
  EXPECT_EQ(range_to_json(kInfiniteRange), "inf");
  EXPECT_TRUE(std::isinf(range_from_json(nlohmann::json("inf"))));
  EXPECT_EQ(range_from_json(nlohmann::json(2.5)), 2.5);
}
