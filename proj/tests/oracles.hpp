#pragma once
// Independent reference implementations used by the tests. None of these call
// into the planner, the raycaster or the network code they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <vector>

#include "sensnav/envgen.hpp"
#include "sensnav/neural.hpp"
#include "sensnav/observe.hpp"
#include "sensnav/rng.hpp"

namespace oracle {

using sensnav::EnvironmentMap;
using sensnav::Rect;
using sensnav::Vec2;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Configuration-space point test: outside every open inflated box, inside the
// bounds shrunk by r (closed).
inline bool point_free(const EnvironmentMap& m, Vec2 p, double r) {
  if (p.x < m.bounds.x0 + r - 1e-12 || p.x > m.bounds.x1 - r + 1e-12) return false;
  if (p.y < m.bounds.y0 + r - 1e-12 || p.y > m.bounds.y1 - r + 1e-12) return false;
  for (const auto& o : m.obstacles) {
    if (p.x > o.x0 - r + 1e-12 && p.x < o.x1 + r - 1e-12 && p.y > o.y0 - r + 1e-12 && p.y < o.y1 + r - 1e-12)
      return false;
  }
  return true;
}

/// Dense sampling of the segment at `step` spacing, endpoints included.
inline bool sampled_segment_free(const EnvironmentMap& m, Vec2 a, Vec2 b, double r, double step = 1e-3) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    if (!point_free(m, {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}, r)) return false;
  }
  return true;
}

// Exact open-box crossing test by interval intersection in t.
inline bool crosses_open_box(double x0, double y0, double x1, double y1, Vec2 a, Vec2 b) {
  double lo = 0.0, hi = 1.0;
  const double d[2] = {b.x - a.x, b.y - a.y};
  const double s[2] = {a.x, a.y};
  const double mn[2] = {x0, y0}, mx[2] = {x1, y1};
  for (int k = 0; k < 2; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (!(s[k] > mn[k] + 1e-12 && s[k] < mx[k] - 1e-12)) return false;
      continue;
    }
    double t0 = (mn[k] - s[k]) / d[k], t1 = (mx[k] - s[k]) / d[k];
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
  }
  return hi - lo > 1e-9;
}

inline bool exact_segment_free(const EnvironmentMap& m, Vec2 a, Vec2 b, double r) {
  if (!point_free(m, a, r) || !point_free(m, b, r)) return false;
  for (const auto& o : m.obstacles)
    if (crosses_open_box(o.x0 - r, o.y0 - r, o.x1 + r, o.y1 + r, a, b)) return false;
  return true;  // both endpoints inside the convex shrunk bounds
}

/// Fine-grid Dijkstra with 16-connected moves. The target and query points are
/// joined to every visible node within `attach` metres by straight segments, so
/// the only error left is the angular quantisation of grid moves.
class GridDijkstra {
 public:
  GridDijkstra(const EnvironmentMap& m, double r, double h = 0.02, double attach = 0.1)
      : m_(m), r_(r), h_(h), attach_(attach) {
    nx_ = static_cast<int>(std::floor(m.bounds.width() / h + 1e-9)) + 1;
    ny_ = static_cast<int>(std::floor(m.bounds.height() / h + 1e-9)) + 1;
    free_.assign(static_cast<std::size_t>(nx_ * ny_), 0);
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i) free_[idx(i, j)] = point_free(m, node(i, j), r);
    run();
  }

  Vec2 node(int i, int j) const { return {m_.bounds.x0 + i * h_, m_.bounds.y0 + j * h_}; }

  /// Oracle cost-to-go; +inf when no attached node reaches the target.
  double query(Vec2 p) const {
    if (std::hypot(p.x - m_.target.x, p.y - m_.target.y) < 1e-12) return 0.0;
    double best = kInf;
    if (exact_segment_free(m_, p, m_.target, r_)) best = std::hypot(p.x - m_.target.x, p.y - m_.target.y);
    for_attached(p, [&](int k, double d) { best = std::min(best, d + dist_[k]); });
    return best;
  }

  /// 4-connected flood fill from the target's attached nodes.
  bool flood_reachable(Vec2 p) const {
    std::vector<char> seen(free_.size(), 0);
    std::vector<int> stack;
    for_attached(m_.target, [&](int k, double) {
      if (!seen[k]) stack.push_back(k), seen[k] = 1;
    });
    while (!stack.empty()) {
      const int k = stack.back();
      stack.pop_back();
      const int i = k % nx_, j = k / nx_;
      const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int e = 0; e < 4; ++e) {
        const int a = i + di[e], b = j + dj[e];
        if (a < 0 || b < 0 || a >= nx_ || b >= ny_) continue;
        const int q = idx(a, b);
        if (!free_[q] || seen[q]) continue;
        seen[q] = 1;
        stack.push_back(q);
      }
    }
    bool hit = false;
    for_attached(p, [&](int k, double) { hit = hit || seen[k]; });
    return hit;
  }

 private:
  int idx(int i, int j) const { return j * nx_ + i; }

  template <class F>
  void for_attached(Vec2 p, F&& f) const {
    const int reach = static_cast<int>(std::ceil(attach_ / h_));
    const int ci = static_cast<int>(std::round((p.x - m_.bounds.x0) / h_));
    const int cj = static_cast<int>(std::round((p.y - m_.bounds.y0) / h_));
    for (int j = cj - reach; j <= cj + reach; ++j) {
      for (int i = ci - reach; i <= ci + reach; ++i) {
        if (i < 0 || j < 0 || i >= nx_ || j >= ny_ || !free_[idx(i, j)]) continue;
        const Vec2 c = node(i, j);
        const double d = std::hypot(c.x - p.x, c.y - p.y);
        if (d > attach_ || !exact_segment_free(m_, p, c, r_)) continue;
        f(idx(i, j), d);
      }
    }
  }

  void run() {
    dist_.assign(free_.size(), kInf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for_attached(m_.target, [&](int k, double d) {
      if (d < dist_[k]) pq.push({dist_[k] = d, k});
    });
    static constexpr int kMoves[16][2] = {{1, 0},  {-1, 0}, {0, 1},  {0, -1}, {1, 1},  {1, -1}, {-1, 1}, {-1, -1},
                                          {2, 1},  {2, -1}, {-2, 1}, {-2, -1}, {1, 2}, {1, -2}, {-1, 2}, {-1, -2}};
    while (!pq.empty()) {
      const auto [d, k] = pq.top();
      pq.pop();
      if (d > dist_[k]) continue;
      const int i = k % nx_, j = k / nx_;
      for (const auto& mv : kMoves) {
        const int a = i + mv[0], b = j + mv[1];
        if (a < 0 || b < 0 || a >= nx_ || b >= ny_) continue;
        const int q = idx(a, b);
        if (!free_[q]) continue;
        const double w = h_ * std::hypot(mv[0], mv[1]);
        if (d + w >= dist_[q]) continue;
        if (!exact_segment_free(m_, node(i, j), node(a, b), r_)) continue;
        pq.push({dist_[q] = d + w, q});
      }
    }
  }

  const EnvironmentMap& m_;
  double r_, h_, attach_;
  int nx_ = 0, ny_ = 0;
  std::vector<char> free_;
  std::vector<double> dist_;
};

// ---- dense network reference ---------------------------------------------

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const sensnav::Tensor2& t) {
  Mat out(static_cast<std::size_t>(t.rows()), std::vector<double>(static_cast<std::size_t>(t.cols())));
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j) out[i][j] = t(i, j);
  return out;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  const std::size_t n = a.size(), k = b.size(), m = b.empty() ? 0 : b[0].size();
  Mat out(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += a[i][t] * b[t][j];
      out[i][j] = s;
    }
  return out;
}

inline double act(double x, sensnav::Activation a) {
  switch (a) {
    case sensnav::Activation::ReLU:
      return x > 0 ? x : 0.0;
    case sensnav::Activation::Sigmoid:
      return 1.0 / (1.0 + std::exp(-x));
    case sensnav::Activation::Identity:
      break;
  }
  return x;
}

inline Mat dense(const Mat& x, const sensnav::DenseLayer& l, bool activate, sensnav::Activation a) {
  Mat y = matmul(x, to_mat(l.weight));
  for (auto& row : y)
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] += l.bias(0, static_cast<Eigen::Index>(j));
      if (activate) row[j] = act(row[j], a);
    }
  return y;
}

/// Adjacency matrix from positions by pairwise threshold.
inline Mat adjacency(const std::vector<Vec2>& pos, double range) {
  const std::size_t n = pos.size();
  Mat s(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && std::hypot(pos[i].x - pos[j].x, pos[i].y - pos[j].y) <= range) s[i][j] = 1.0;
  return s;
}

inline Mat encode(const sensnav::PolicyModel& model, Mat x) {
  for (const auto& l : model.encoder) x = dense(x, l, true, model.spec.activation);
  return x;
}

/// X' = sigma(X W_self + S X W_neighbor), layer by layer.
inline Mat gnn(const sensnav::PolicyModel& model, Mat x, const Mat& s) {
  for (const auto& l : model.gnn) {
    const Mat a = matmul(x, to_mat(l.self_weight));
    const Mat b = matmul(matmul(s, x), to_mat(l.neighbor_weight));
    Mat y = a;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a[i].size(); ++j) y[i][j] = act(a[i][j] + b[i][j], model.spec.activation);
    x = std::move(y);
  }
  return x;
}

inline Mat head(const sensnav::PolicyModel& model, Mat x) {
  for (std::size_t i = 0; i < model.head.size(); ++i)
    x = dense(x, model.head[i], i + 1 < model.head.size(), model.spec.activation);
  return x;
}

inline Mat forward(const sensnav::PolicyModel& model, const Mat& inputs, const Mat& s) {
  return head(model, gnn(model, encode(model, inputs), s));
}

inline double max_abs_diff(const Mat& a, const sensnav::Tensor2& b) {
  double worst = 0.0;
  if (a.size() != static_cast<std::size_t>(b.rows())) return kInf;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != static_cast<std::size_t>(b.cols())) return kInf;
    for (std::size_t j = 0; j < a[i].size(); ++j)
      worst = std::max(worst, std::abs(a[i][j] - b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
  }
  return worst;
}

/// Adam with bias correction, one scalar at a time.
struct ScalarAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double param, double g, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    return param - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

// ---- finite differences -----------------------------------------------------

struct GradCheck {
  double worst_rel = 0.0;
  std::size_t entries = 0;
};

/// Central differences on every parameter entry against loss_and_grads.
/// Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheck gradient_check(const sensnav::PolicyModel& model, const std::vector<sensnav::GraphSample>& batch,
                                double h = 1e-5, double floor = 1e-6) {
  std::vector<const sensnav::GraphSample*> ptrs;
  for (const auto& b : batch) ptrs.push_back(&b);
  const auto analytic = sensnav::loss_and_grads(model, ptrs);
  sensnav::PolicyModel probe = model;
  auto params = probe.parameters();
  const auto grads = analytic.grads.parameters();
  GradCheck out;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (Eigen::Index i = 0; i < params[p]->size(); ++i) {
      double& w = params[p]->data()[i];
      const double saved = w;
      w = saved + h;
      const double up = sensnav::loss_only(probe, ptrs);
      w = saved - h;
      const double down = sensnav::loss_only(probe, ptrs);
      w = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = grads[p]->data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      out.worst_rel = std::max(out.worst_rel, rel);
      ++out.entries;
    }
  }
  return out;
}

/// A small architecture so that finite differences stay cheap.
inline sensnav::ModelSpec small_spec(int layers, int K, sensnav::Activation a) {
  sensnav::ModelSpec s;
  s.input_width = 2 * sensnav::kRayFeatures;
  s.encoder_hidden = {6, 5};
  s.feature_width = 4;
  s.gnn_width = 5;
  s.gnn_layers = layers;
  s.head_hidden = {6, 4};
  s.advantages = K;
  s.activation = a;
  return s;
}

/// Random node inputs, disk graph over random positions, random targets.
inline sensnav::GraphSample random_sample(sensnav::Rng& rng, int nodes, int width, int K, double range) {
  sensnav::GraphSample g;
  std::vector<Vec2> pos;
  for (int i = 0; i < nodes; ++i) pos.push_back({rng.uniform(0.0, 4.0), rng.uniform(0.0, 4.0)});
  g.graph = sensnav::build_comm_graph(pos, range);
  g.inputs.resize(nodes, width);
  for (Eigen::Index i = 0; i < g.inputs.size(); ++i) g.inputs.data()[i] = rng.uniform();
  g.targets.resize(nodes, K);
  for (Eigen::Index i = 0; i < g.targets.size(); ++i) g.targets.data()[i] = rng.uniform(-0.3, 0.3);
  return g;
}

/// Adjacency matrix straight from a CommGraph's neighbour lists.
inline Mat adjacency(const sensnav::CommGraph& g) {
  Mat s(static_cast<std::size_t>(g.n), std::vector<double>(static_cast<std::size_t>(g.n), 0.0));
  for (int i = 0; i < g.n; ++i)
    for (int j : g.neighbors[static_cast<std::size_t>(i)]) s[i][j] = 1.0;
  return s;
}

}  // namespace oracle
