#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "dyntamp/util.hpp"

namespace dyntamp {

// Planar pose with a z offset: rotation is about the world z axis only.
struct Pose {
  double x = 0, y = 0, z = 0, yaw = 0;

  Eigen::Vector2d xy() const { return {x, y}; }
  Eigen::Vector3d xyz() const { return {x, y, z}; }

  // this ∘ child: child expressed in this frame, result in parent frame
  Pose compose(const Pose& child) const {
    double c = std::cos(yaw), s = std::sin(yaw);
    return Pose{x + c * child.x - s * child.y, y + s * child.x + c * child.y,
                z + child.z, yaw + child.yaw};
  }

  Pose inverse() const {
    double c = std::cos(yaw), s = std::sin(yaw);
    return Pose{-(c * x + s * y), -(-s * x + c * y), -z, -yaw};
  }
};

inline Eigen::Vector2d rotate2d(double yaw, const Eigen::Vector2d& v) {
  double c = std::cos(yaw), s = std::sin(yaw);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

// Axis-aligned rectangle, used for surface extents.
struct Rect {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Vector2d half = Eigen::Vector2d::Zero();

  Eigen::Vector2d lo() const { return center - half; }
  Eigen::Vector2d hi() const { return center + half; }

  bool contains(const Eigen::Vector2d& p, double inset = 0) const {
    return p.x() >= lo().x() + inset && p.x() <= hi().x() - inset &&
           p.y() >= lo().y() + inset && p.y() <= hi().y() - inset;
  }

  Eigen::Vector2d clamp(const Eigen::Vector2d& p, double inset = 0) const {
    Eigen::Vector2d l = lo(), h = hi();
    return {std::clamp(p.x(), l.x() + inset, h.x() - inset),
            std::clamp(p.y(), l.y() + inset, h.y() - inset)};
  }
};

// Point at `offset` from the rectangle edge, nearest to `from`. Used for
// human standing positions next to a surface.
inline Eigen::Vector2d stand_point_edge(const Rect& rect,
                                        const Eigen::Vector2d& from,
                                        double offset) {
  Eigen::Vector2d q = rect.clamp(from);
  if ((from - q).norm() > 1e-9) {
    Eigen::Vector2d dir = (from - q).normalized();
    return q + offset * dir;
  }
  // from is inside the rectangle: push out through the nearest edge
  Eigen::Vector2d l = rect.lo(), h = rect.hi();
  double dl = from.x() - l.x(), dr = h.x() - from.x();
  double db = from.y() - l.y(), dt = h.y() - from.y();
  double m = std::min({dl, dr, db, dt});
  if (m == dl) return {l.x() - offset, from.y()};
  if (m == dr) return {h.x() + offset, from.y()};
  if (m == db) return {from.x(), l.y() - offset};
  return {from.x(), h.y() + offset};
}

// Point at `offset` from `anchor` in the direction of `from`; deterministic
// fallback direction when the two coincide. Used for robot move targets.
inline Eigen::Vector2d stand_point_circle(const Eigen::Vector2d& anchor,
                                          const Eigen::Vector2d& from,
                                          double offset) {
  Eigen::Vector2d d = from - anchor;
  double n = d.norm();
  Eigen::Vector2d dir = n > 1e-9 ? Eigen::Vector2d(d / n) : Eigen::Vector2d(1, 0);
  return anchor + offset * dir;
}

}  // namespace dyntamp
