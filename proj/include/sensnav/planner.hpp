#pragma once
// Any-angle expert planner: exact visibility graph over the inflated map plus
// a single-source Dijkstra rooted at the target.
//
// Obstacles are grown by the robot radius with a square structuring element,
// so the inflated map is again a set of axis-aligned rectangles and every
// taut path bends only at inflated corners. The bounds are shrunk by the same
// radius. Boundaries are free space; only open interiors collide.

#include <vector>

#include "sensnav/envgen.hpp"
#include "sensnav/geometry.hpp"

namespace sensnav {

/// Inflated copy of a map's collision geometry.
struct InflatedMap {
  Rect bounds;                // shrunk by the inflation radius
  std::vector<Rect> obstacles;  // grown by the inflation radius
  double inflation = 0.0;

  static InflatedMap from(const EnvironmentMap& m, double inflation);

  bool point_free(Vec2 p) const;
  bool segment_free(Vec2 a, Vec2 b) const;
  /// Fraction t in [0,1] of a->b that can be travelled before entering an
  /// obstacle interior or leaving the bounds (1 if the segment is free).
  double free_fraction(Vec2 a, Vec2 b) const;
};

/// True iff segment ab stays inside the inflated bounds and avoids every
/// inflated obstacle interior.
bool segment_free(const EnvironmentMap& m, Vec2 a, Vec2 b, double inflation);

struct VisibilityGraph {
  struct Edge {
    int to;
    double weight;
  };
  std::vector<Vec2> vertices;  // vertex 0 is the target
  std::vector<std::vector<Edge>> adjacency;
  double inflation = 0.0;

  static constexpr int kTargetVertex = 0;
};

class CostToGoField {
 public:
  const VisibilityGraph& graph() const { return graph_; }
  const InflatedMap& inflated() const { return inflated_; }
  const std::vector<double>& dist_to_target() const { return dist_; }
  Vec2 target() const { return graph_.vertices[VisibilityGraph::kTargetVertex]; }

  /// Shortest any-angle path length from p to the target.
  double cost_to_go(Vec2 p) const;
  /// Taut polyline p -> ... -> target.
  std::vector<Vec2> shortest_path(Vec2 p) const;

 private:
  friend CostToGoField build_field(const EnvironmentMap& m, double inflation);

  struct Best {
    int vertex;
    double cost;
  };
  Best best_vertex(Vec2 p) const;

  InflatedMap inflated_;
  VisibilityGraph graph_;
  std::vector<double> dist_;
  std::vector<int> next_;  // successor toward the target, -1 at the target
};

CostToGoField build_field(const EnvironmentMap& m, double inflation);

double polyline_length(const std::vector<Vec2>& path);

}  // namespace sensnav
