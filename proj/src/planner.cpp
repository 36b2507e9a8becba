#include "sensnav/planner.hpp"

#include <functional>
#include <limits>
#include <queue>
#include <sstream>

#include "sensnav/errors.hpp"

namespace sensnav {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt_point(Vec2 p) {
  std::ostringstream os;
  os << "(" << p.x << ", " << p.y << ")";
  return os.str();
}
}  // namespace

InflatedMap InflatedMap::from(const EnvironmentMap& m, double inflation) {
  InflatedMap out;
  out.inflation = inflation;
  out.bounds = m.bounds.inflated(-inflation);
  out.obstacles.reserve(m.obstacles.size());
  for (const auto& r : m.obstacles) out.obstacles.push_back(r.inflated(inflation));
  return out;
}

bool InflatedMap::point_free(Vec2 p) const {
  if (bounds.x0 > bounds.x1 || bounds.y0 > bounds.y1) return false;
  if (!inside_closed(bounds, p)) return false;
  for (const auto& r : obstacles)
    if (strictly_inside(r, p)) return false;
  return true;
}

bool InflatedMap::segment_free(Vec2 a, Vec2 b) const {
  if (!point_free(a) || !point_free(b)) return false;
  for (const auto& r : obstacles)
    if (segment_hits_interior(r, a, b)) return false;
  return true;
}

double InflatedMap::free_fraction(Vec2 a, Vec2 b) const {
  if (!point_free(a)) return 0.0;
  double t = 1.0;
  const Rect outer{bounds.x0 - kGeomEps, bounds.y0 - kGeomEps, bounds.x1 + kGeomEps, bounds.y1 + kGeomEps};
  if (const auto clip = clip_segment(outer, a, b)) {
    t = std::min(t, clip->second);
  } else {
    return 0.0;
  }
  for (const auto& r : obstacles)
    if (const auto entry = segment_entry(r, a, b)) t = std::min(t, *entry);
  return t;
}

bool segment_free(const EnvironmentMap& m, Vec2 a, Vec2 b, double inflation) {
  return InflatedMap::from(m, inflation).segment_free(a, b);
}

CostToGoField build_field(const EnvironmentMap& m, double inflation) {
  CostToGoField f;
  f.inflated_ = InflatedMap::from(m, inflation);
  const InflatedMap& inf = f.inflated_;
  if (!inf.point_free(m.target))
    throw TargetUnreachable("target " + fmt_point(m.target) + " collides with the inflated map");

  auto& g = f.graph_;
  g.inflation = inflation;
  g.vertices.push_back(m.target);
  for (const auto& r : inf.obstacles) {
    for (const Vec2 c : {Vec2{r.x0, r.y0}, Vec2{r.x1, r.y0}, Vec2{r.x1, r.y1}, Vec2{r.x0, r.y1}}) {
      if (inf.point_free(c)) g.vertices.push_back(c);
    }
  }

  const auto n = static_cast<int>(g.vertices.size());
  g.adjacency.assign(n, {});
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double w = distance(g.vertices[i], g.vertices[j]);
      if (w <= 0.0) continue;
      if (!inf.segment_free(g.vertices[i], g.vertices[j])) continue;
      g.adjacency[i].push_back({j, w});
      g.adjacency[j].push_back({i, w});
    }
  }

  // Dijkstra from the target; pair ordering breaks ties by vertex index.
  f.dist_.assign(n, kInf);
  f.next_.assign(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  f.dist_[0] = 0.0;
  open.push({0.0, 0});
  while (!open.empty()) {
    const auto [d, u] = open.top();
    open.pop();
    if (d > f.dist_[u]) continue;
    for (const auto& e : g.adjacency[u]) {
      const double nd = d + e.weight;
      if (nd < f.dist_[e.to]) {
        f.dist_[e.to] = nd;
        f.next_[e.to] = u;
        open.push({nd, e.to});
      }
    }
  }
  return f;
}

CostToGoField::Best CostToGoField::best_vertex(Vec2 p) const {
  if (!inflated_.point_free(p)) throw PointInObstacle("point " + fmt_point(p) + " collides with the inflated map");
  Best best{-1, kInf};
  for (int v = 0; v < static_cast<int>(graph_.vertices.size()); ++v) {
    if (dist_[v] == kInf) continue;
    const double c = distance(p, graph_.vertices[v]) + dist_[v];
    if (c >= best.cost) continue;
    if (!inflated_.segment_free(p, graph_.vertices[v])) continue;
    best = {v, c};
  }
  if (best.vertex < 0) throw Unreachable("no visibility-graph vertex visible from " + fmt_point(p));
  return best;
}

double CostToGoField::cost_to_go(Vec2 p) const { return best_vertex(p).cost; }

std::vector<Vec2> CostToGoField::shortest_path(Vec2 p) const {
  const Best best = best_vertex(p);
  std::vector<Vec2> path{p};
  for (int v = best.vertex; v >= 0; v = next_[v]) {
    if (graph_.vertices[v] == path.back()) continue;
    path.push_back(graph_.vertices[v]);
  }
  return path;
}

double polyline_length(const std::vector<Vec2>& path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) len += distance(path[i - 1], path[i]);
  return len;
}

}  // namespace sensnav
