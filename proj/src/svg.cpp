#include "sensnav/svg.hpp"

#include <cstdio>
#include <sstream>

namespace sensnav {

namespace {

constexpr double kScale = 100.0;  // px per meter
constexpr double kMargin = 10.0;
constexpr double kMarker = 0.1;  // m, side of the square markers

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

class Canvas {
 public:
  explicit Canvas(const Rect& bounds) : b_(bounds) {}

  double px(double x) const { return kMargin + (x - b_.x0) * kScale; }
  double py(double y) const { return kMargin + (b_.y1 - y) * kScale; }  // y up

  void rect(const Rect& r, const std::string& style) {
    os_ << "  <rect x=\"" << num(px(r.x0)) << "\" y=\"" << num(py(r.y1)) << "\" width=\"" << num(r.width() * kScale)
        << "\" height=\"" << num(r.height() * kScale) << "\" " << style << "/>\n";
  }

  void marker(Vec2 p, const std::string& fill) {
    const double h = 0.5 * kMarker;
    rect({p.x - h, p.y - h, p.x + h, p.y + h}, "fill=\"" + fill + "\"");
  }

  void polyline(const std::vector<Vec2>& pts, const std::string& stroke, const std::string& cls) {
    os_ << "  <polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) os_ << (i ? " " : "") << num(px(pts[i].x)) << "," << num(py(pts[i].y));
    os_ << "\"/>\n";
  }

  std::string finish() const {
    std::ostringstream out;
    const double w = b_.width() * kScale + 2 * kMargin;
    const double h = b_.height() * kScale + 2 * kMargin;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
        << "\" viewBox=\"0 0 " << num(w) << " " << num(h) << "\">\n"
        << os_.str() << "</svg>\n";
    return out.str();
  }

 private:
  Rect b_;
  std::ostringstream os_;
};

}  // namespace

std::string render_svg(const EnvironmentMap& m, const std::vector<Vec2>& expert_path,
                       const std::vector<Vec2>& executed_path) {
  Canvas c(m.bounds);
  c.rect(m.bounds, "fill=\"white\" stroke=\"black\" stroke-width=\"2\"");
  for (const auto& r : m.obstacles) c.rect(r, "fill=\"black\"");
  if (!expert_path.empty()) c.polyline(expert_path, "red", "expert");
  if (!executed_path.empty()) c.polyline(executed_path, "orange", "executed");
  for (std::size_t i = 1; i < m.sensors.size(); ++i) c.marker(m.sensors[i], "blue");
  if (!m.sensors.empty()) c.marker(m.sensors[0], "red");
  c.marker(m.target, "green");
  return c.finish();
}

}  // namespace sensnav
