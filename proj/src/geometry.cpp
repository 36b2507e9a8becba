#include "sensnav/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace sensnav {

Vec2 direction(int k, int count) {
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
  return {std::cos(angle), std::sin(angle)};
}

bool strictly_inside(const Rect& r, Vec2 p, double eps) {
  return p.x > r.x0 + eps && p.x < r.x1 - eps && p.y > r.y0 + eps && p.y < r.y1 - eps;
}

bool inside_closed(const Rect& r, Vec2 p, double eps) {
  return p.x >= r.x0 - eps && p.x <= r.x1 + eps && p.y >= r.y0 - eps && p.y <= r.y1 + eps;
}

Vec2 closest_point_on_rect(const Rect& r, Vec2 p) {
  return {std::clamp(p.x, r.x0, r.x1), std::clamp(p.y, r.y0, r.y1)};
}

double distance_to_rect(const Rect& r, Vec2 p) { return distance(p, closest_point_on_rect(r, p)); }

double rect_distance(const Rect& a, const Rect& b) {
  const double dx = std::max({0.0, a.x0 - b.x1, b.x0 - a.x1});
  const double dy = std::max({0.0, a.y0 - b.y1, b.y0 - a.y1});
  return std::hypot(dx, dy);
}

double border_clearance(const Rect& container, const Rect& r) {
  return std::min({r.x0 - container.x0, container.x1 - r.x1, r.y0 - container.y0, container.y1 - r.y1});
}

double border_clearance(const Rect& container, Vec2 p) {
  return std::min({p.x - container.x0, container.x1 - p.x, p.y - container.y0, container.y1 - p.y});
}

std::optional<std::pair<double, double>> clip_segment(const Rect& r, Vec2 a, Vec2 b) {
  // Liang-Barsky against the closed rectangle.
  const Vec2 d = b - a;
  double t0 = 0.0;
  double t1 = 1.0;
  const double p[4] = {-d.x, d.x, -d.y, d.y};
  const double q[4] = {a.x - r.x0, r.x1 - a.x, a.y - r.y0, r.y1 - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return std::nullopt;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 > t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

bool segment_hits_interior(const Rect& r, Vec2 a, Vec2 b) {
  const auto clip = clip_segment(r, a, b);
  if (!clip) return false;
  // The clipped piece is convex; it touches the interior iff its midpoint does.
  const double tm = 0.5 * (clip->first + clip->second);
  return strictly_inside(r, a + (b - a) * tm);
}

std::optional<double> segment_entry(const Rect& r, Vec2 a, Vec2 b) {
  const auto clip = clip_segment(r, a, b);
  if (!clip) return std::nullopt;
  const double tm = 0.5 * (clip->first + clip->second);
  if (!strictly_inside(r, a + (b - a) * tm)) return std::nullopt;
  return clip->first;
}

namespace {

// Slab intersection of the full line; returns [tmin, tmax] or nullopt.
std::optional<std::pair<double, double>> ray_slabs(const Rect& r, Vec2 o, Vec2 d) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  double tmin = -inf;
  double tmax = inf;
  const double lo[2] = {r.x0, r.y0};
  const double hi[2] = {r.x1, r.y1};
  const double oo[2] = {o.x, o.y};
  const double dd[2] = {d.x, d.y};
  for (int i = 0; i < 2; ++i) {
    if (std::abs(dd[i]) < 1e-15) {
      if (oo[i] < lo[i] || oo[i] > hi[i]) return std::nullopt;
      continue;
    }
    double ta = (lo[i] - oo[i]) / dd[i];
    double tb = (hi[i] - oo[i]) / dd[i];
    if (ta > tb) std::swap(ta, tb);
    tmin = std::max(tmin, ta);
    tmax = std::min(tmax, tb);
  }
  if (tmin > tmax) return std::nullopt;
  return std::make_pair(tmin, tmax);
}

}  // namespace

std::optional<double> ray_rect_entry(const Rect& r, Vec2 origin, Vec2 dir) {
  const auto s = ray_slabs(r, origin, dir);
  if (!s || s->first <= 0.0) return std::nullopt;
  return s->first;
}

std::optional<double> ray_rect_exit(const Rect& r, Vec2 origin, Vec2 dir) {
  const auto s = ray_slabs(r, origin, dir);
  if (!s || s->second <= 0.0) return std::nullopt;
  return s->second;
}

std::optional<double> ray_disc(Vec2 center, double radius, Vec2 origin, Vec2 dir) {
  const Vec2 oc = origin - center;
  const double c = dot(oc, oc) - radius * radius;
  if (c <= 0.0) return std::nullopt;  // origin inside the disc
  const double b = dot(dir, oc);
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double t = -b - std::sqrt(disc);
  if (t <= 0.0) return std::nullopt;
  return t;
}

}  // namespace sensnav
