#pragma once
// Planar primitives shared by the map generator, planner and raycaster.

#include <cmath>
#include <optional>
#include <utility>

namespace sensnav {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
};

inline constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Unit vector at angle 2*pi*k/count, measured from +x.
Vec2 direction(int k, int count);

/// Axis-aligned rectangle [x0,x1] x [y0,y1].
struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  constexpr double width() const { return x1 - x0; }
  constexpr double height() const { return y1 - y0; }
  constexpr Vec2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
  constexpr bool operator==(const Rect&) const = default;

  /// Minkowski sum with a square of half-width r (negative r shrinks).
  constexpr Rect inflated(double r) const { return {x0 - r, y0 - r, x1 + r, y1 + r}; }
};

// Tolerance used for "strictly inside" tests. Points on an obstacle boundary
// count as free, which keeps visibility-graph corners valid.
inline constexpr double kGeomEps = 1e-9;

bool strictly_inside(const Rect& r, Vec2 p, double eps = kGeomEps);
bool inside_closed(const Rect& r, Vec2 p, double eps = kGeomEps);

/// Euclidean distance from p to the closed rectangle (0 if inside).
double distance_to_rect(const Rect& r, Vec2 p);
Vec2 closest_point_on_rect(const Rect& r, Vec2 p);

/// Euclidean distance between two closed rectangles.
double rect_distance(const Rect& a, const Rect& b);

/// Smallest gap between r and the inner edge of the container (negative when
/// r sticks out).
double border_clearance(const Rect& container, const Rect& r);
double border_clearance(const Rect& container, Vec2 p);

/// Parameter interval [t0,t1] within [0,1] of segment a->b lying in the closed
/// rectangle, or nullopt when disjoint.
std::optional<std::pair<double, double>> clip_segment(const Rect& r, Vec2 a, Vec2 b);

/// True if the segment passes through the open interior of r.
bool segment_hits_interior(const Rect& r, Vec2 a, Vec2 b);

/// Smallest t in [0,1] at which the segment enters the interior of r, if any.
std::optional<double> segment_entry(const Rect& r, Vec2 a, Vec2 b);

/// Ray distances (origin + t*dir, |dir| = 1, t > 0).
std::optional<double> ray_rect_entry(const Rect& r, Vec2 origin, Vec2 dir);
std::optional<double> ray_rect_exit(const Rect& r, Vec2 origin, Vec2 dir);
std::optional<double> ray_disc(Vec2 center, double radius, Vec2 origin, Vec2 dir);

}  // namespace sensnav
