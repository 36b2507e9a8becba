#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sensnav/errors.hpp"
#include "sensnav/planner.hpp"
#include "sensnav/rng.hpp"

using namespace sensnav;

namespace {

EnvironmentMap open_map(Vec2 target, Rect bounds = {-1, -1, 4, 1}) {
  EnvironmentMap m;
  m.bounds = bounds;
  m.target = target;
  return m;
}

std::vector<EnvironmentMap> random_maps(std::uint64_t seed, std::size_t n) {
  WorldConfig cfg;
  cfg.seed = seed;
  return generate_maps(cfg, n, 4);
}

Vec2 random_free(const EnvironmentMap& m, double r, Rng& rng) {
  for (;;) {
    const Vec2 p{rng.uniform(m.bounds.x0, m.bounds.x1), rng.uniform(m.bounds.y0, m.bounds.y1)};
    if (oracle::point_free(m, p, r)) return p;
  }
}

}  // namespace

TEST(Planner, OpenMapStraightLine) {
  const auto m = open_map({3, 0});
  const auto f = build_field(m, 0.16);
  EXPECT_EQ(f.graph().vertices.size(), 1u);
  EXPECT_NEAR(f.cost_to_go({0, 0}), 3.0, 1e-12);
  EXPECT_EQ(f.cost_to_go({3, 0}), 0.0);
  const auto path = f.shortest_path({0, 0});
  ASSERT_EQ(path.size(), 2u);
  EXPECT_EQ(path.back(), (Vec2{3, 0}));
}

TEST(Planner, OneSquareObstacleCorners) {
  auto m = open_map({3, 0}, {-2, -2, 5, 2});
  m.obstacles = {{1, -0.25, 1.5, 0.25}};
  const double r = 0.16;
  const auto f = build_field(m, r);
  const auto& g = f.graph();
  ASSERT_EQ(g.vertices.size(), 5u);
  for (std::size_t v = 1; v < g.vertices.size(); ++v) {
    const Vec2 c = g.vertices[v];
    EXPECT_TRUE(std::abs(std::abs(c.x - 1.25) - (0.25 + r)) < 1e-12 && std::abs(std::abs(c.y) - (0.25 + r)) < 1e-12);
    bool linked = false;
    for (const auto& e : g.adjacency[v]) linked = linked || e.to == VisibilityGraph::kTargetVertex;
    EXPECT_EQ(linked, oracle::exact_segment_free(m, c, m.target, r)) << "vertex " << v;
  }
  // Over the box by its two upper corners (the lower route is the mirror image).
  const Vec2 p{0, 0};
  const Vec2 c1{1 - r, 0.25 + r}, c2{1.5 + r, 0.25 + r};
  const double expect = distance(p, c1) + distance(c1, c2) + distance(c2, m.target);
  EXPECT_NEAR(f.cost_to_go(p), expect, 1e-12);
}

TEST(Planner, PathTurnsOnlyAtGraphVertices) {
  for (const auto& m : random_maps(91, 30)) {
    const auto f = build_field(m, 0.16);
    for (const auto& s : m.sensors) {
      const auto path = f.shortest_path(s);
      ASSERT_GE(path.size(), 2u);
      for (std::size_t i = 1; i + 1 < path.size(); ++i) {
        const bool vertex = std::any_of(f.graph().vertices.begin(), f.graph().vertices.end(),
                                        [&](Vec2 v) { return distance(v, path[i]) < 1e-12; });
        EXPECT_TRUE(vertex);
      }
      for (std::size_t i = 0; i + 1 < path.size(); ++i)
        EXPECT_TRUE(oracle::sampled_segment_free(m, path[i], path[i + 1], 0.16 - 1e-6));
      EXPECT_NEAR(polyline_length(path), f.cost_to_go(s), 1e-9);
    }
  }
}

TEST(Planner, GraphInvariants) {
  for (const auto& m : random_maps(5, 100)) {
    const auto f = build_field(m, 0.16);
    const auto& g = f.graph();
    const auto& d = f.dist_to_target();
    EXPECT_EQ(d[VisibilityGraph::kTargetVertex], 0.0);
    for (std::size_t u = 0; u < g.vertices.size(); ++u) {
      for (const auto& e : g.adjacency[u]) {
        const double w = distance(g.vertices[u], g.vertices[static_cast<std::size_t>(e.to)]);
        ASSERT_GT(e.weight, 0.0);
        ASSERT_NEAR(e.weight, w, 1e-12);
        ASSERT_TRUE(oracle::exact_segment_free(m, g.vertices[u], g.vertices[e.to], 0.16));
        if (std::isfinite(d[u]) || std::isfinite(d[e.to])) ASSERT_LE(std::abs(d[u] - d[e.to]), e.weight + 1e-9);
      }
    }
  }
}

TEST(Planner, SegmentFreeMatchesSampling) {
  const auto maps = random_maps(17, 20);
  Rng rng(99);
  int agree = 0, blocked = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto& m = maps[static_cast<std::size_t>(i) % maps.size()];
    const Vec2 a = random_free(m, 0.16, rng);
    const Vec2 b = i % 3 ? random_free(m, 0.16, rng)
                         : Vec2{rng.uniform(m.bounds.x0, m.bounds.x1), rng.uniform(m.bounds.y0, m.bounds.y1)};
    const bool fast = segment_free(m, a, b, 0.16);
    // Sampling cannot see a crossing shorter than 1 mm, so clip such cases by
    // also consulting the exact interval test.
    const bool sampled = oracle::sampled_segment_free(m, a, b, 0.16);
    if (fast == sampled) {
      ++agree;
    } else {
      EXPECT_EQ(fast, oracle::exact_segment_free(m, a, b, 0.16)) << "disagreement on a sub-millimetre crossing";
    }
    blocked += !fast;
  }
  EXPECT_GE(agree, 9990);
  EXPECT_GT(blocked, 1000);
}

TEST(Planner, SegmentFreeTrivia) {
  auto m = open_map({3, 0});
  m.obstacles = {{1, -0.2, 1.4, 0.2}};
  EXPECT_TRUE(segment_free(m, {0, 0.5}, {0, 0.5}, 0.16));
  EXPECT_FALSE(segment_free(m, {0, 0}, {3, 0}, 0.16));  // through the centre
  EXPECT_TRUE(segment_free(m, {0, 0.6}, {3, 0.6}, 0.16));
}

TEST(Planner, OneWallMatchesGridDijkstra) {
  EnvironmentMap m;
  m.bounds = {0, 0, 4, 4};
  m.target = {3, 1};
  m.obstacles = {{1.9, 0, 2.1, 3}};
  const auto f = build_field(m, 0.16);
  oracle::GridDijkstra grid(m, 0.16);
  for (const Vec2 p : {Vec2{1, 1}, Vec2{0.5, 0.5}, Vec2{1.2, 2.0}}) {
    const double a = f.cost_to_go(p), b = grid.query(p);
    EXPECT_LE(a, b + 1e-9);
    EXPECT_LE(std::abs(a - b) / b, 0.02) << p.x << "," << p.y;
  }
}

TEST(Planner, LowerBoundLipschitzMonotone) {
  Rng rng(8);
  for (const auto& m : random_maps(23, 40)) {
    const auto f = build_field(m, 0.16);
    for (int i = 0; i < 50; ++i) {
      const Vec2 a = random_free(m, 0.16, rng);
      double qa = 0.0;
      try {
        qa = f.cost_to_go(a);
      } catch (const Unreachable&) {
        continue;
      }
      EXPECT_GE(qa, distance(a, m.target) - 1e-12);
      const Vec2 b = a + Vec2{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
      if (oracle::point_free(m, b, 0.16) && segment_free(m, a, b, 0.16))
        EXPECT_LE(std::abs(qa - f.cost_to_go(b)), distance(a, b) + 1e-9);
      // Arc-distance monotonicity along the optimal path.
      const auto path = f.shortest_path(a);
      double walked = 0.0;
      for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const Vec2 mid = path[k] + (path[k + 1] - path[k]) * 0.5;
        EXPECT_NEAR(f.cost_to_go(mid), qa - walked - 0.5 * distance(path[k], path[k + 1]), 1e-6);
        walked += distance(path[k], path[k + 1]);
      }
    }
  }
}

TEST(Planner, Errors) {
  auto m = open_map({3, 0});
  m.obstacles = {{2.8, -0.2, 3.2, 0.2}};
  EXPECT_THROW(build_field(m, 0.16), TargetUnreachable);
  m.obstacles = {{1, -0.2, 1.4, 0.2}};
  const auto f = build_field(m, 0.16);
  EXPECT_THROW(f.cost_to_go({1.2, 0}), PointInObstacle);
}
