#pragma once

#include "latticebot/common.hpp"

namespace latticebot {

/// Local contact frame of one ground segment.
struct SurfaceFrame {
  Vec2 normal{0.0, 1.0};
  Vec2 tangent{1.0, 0.0};
  Vec2 point{0.0, 0.0};

  double signed_distance(const Vec2& p) const { return normal.dot(p - point); }
};

/// Flat ground, optionally rising into a straight incline at `pivot`.
/// Segments are assigned by the x-coordinate of the query point.
struct GroundModel {
  enum class Kind { flat, incline };

  Kind kind = Kind::flat;
  double height = 0.0;     // y-level of the flat part
  double angle_deg = 0.0;  // incline slope, [0, 45]
  Vec2 pivot{0.0, 0.0};    // where the incline leaves the flat part

  static GroundModel flat_at(double height);
  static GroundModel incline(double angle_deg, Vec2 pivot);

  void validate() const;
  SurfaceFrame frame_at(double x) const;
  double signed_distance(const Vec2& p) const { return frame_at(p.x()).signed_distance(p); }
};

}  // namespace latticebot
