#include "latticebot/ground.hpp"

#include <cmath>
#include <numbers>

namespace latticebot {

GroundModel GroundModel::flat_at(double height) {
  GroundModel g;
  g.kind = Kind::flat;
  g.height = height;
  g.pivot = Vec2(0.0, height);
  return g;
}

GroundModel GroundModel::incline(double angle_deg, Vec2 pivot) {
  GroundModel g;
  g.kind = Kind::incline;
  g.angle_deg = angle_deg;
  g.pivot = pivot;
  g.height = pivot.y();
  g.validate();
  return g;
}

void GroundModel::validate() const {
  if (!std::isfinite(height)) throw std::invalid_argument("ground height must be finite");
  if (kind == Kind::incline && !(angle_deg >= 0.0 && angle_deg <= 45.0)) {
    throw std::invalid_argument("incline angle must lie in [0, 45] degrees");
  }
}

SurfaceFrame GroundModel::frame_at(double x) const {
  if (kind == Kind::incline && x >= pivot.x()) {
    const double a = angle_deg * std::numbers::pi / 180.0;
    return {Vec2(-std::sin(a), std::cos(a)), Vec2(std::cos(a), std::sin(a)), pivot};
  }
  return {Vec2(0.0, 1.0), Vec2(1.0, 0.0), Vec2(0.0, height)};
}

}  // namespace latticebot
