#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "earol/so3.hpp"

namespace earol {

// Yaw-oriented box obstacle.
struct ObstacleBox {
  Vec3 center = Vec3::Zero();
  Vec3 half = Vec3::Ones();
  double yaw = 0.0;

  bool contains(const Vec3& p) const {
    const double c = std::cos(-yaw), s = std::sin(-yaw);
    const Vec3 d = p - center;
    const Vec3 local(c * d.x() - s * d.y(), s * d.x() + c * d.y(), d.z());
    return std::abs(local.x()) <= half.x() && std::abs(local.y()) <= half.y() &&
           std::abs(local.z()) <= half.z();
  }
};

// Axis-aligned wall helper: a thin box from (x1,y1) to (x2,y2).
inline ObstacleBox make_wall(double x1, double y1, double x2, double y2,
                             double thickness, double height) {
  ObstacleBox b;
  const double dx = x2 - x1, dy = y2 - y1;
  const double len = std::hypot(dx, dy);
  b.center = Vec3(0.5 * (x1 + x2), 0.5 * (y1 + y2), 0.5 * height);
  b.half = Vec3(0.5 * len, 0.5 * thickness, 0.5 * height);
  b.yaw = std::atan2(dy, dx);
  return b;
}

struct RayHit {
  double range = 0.0;
  Vec3 point = Vec3::Zero();
  int object = -1;  // -1 ground, >= 0 obstacle index, -2 target ring
};

// Instantaneous ring pose (a hoop standing on the target vehicle).
struct RingState {
  Vec3 center = Vec3::Zero();
  Vec3 e1 = Vec3::UnitZ();   // in-plane basis
  Vec3 e2 = Vec3::UnitY();
  Vec3 normal = Vec3::UnitX();
  double radius = 0.35;
  double tube_radius = 0.04;

  Vec3 point_at(double angle) const {
    return center + radius * (std::cos(angle) * e1 + std::sin(angle) * e2);
  }
};

inline RingState make_ring_state(const Vec3& center, double heading,
                                 double radius, double tube_radius = 0.04) {
  RingState r;
  r.center = center;
  r.radius = radius;
  r.tube_radius = tube_radius;
  r.normal = Vec3(std::cos(heading), std::sin(heading), 0.0);
  r.e1 = Vec3::UnitZ();
  r.e2 = r.normal.cross(r.e1).normalized();
  return r;
}

// Static geometry: ground plane z = 0 plus boxes. The open-top height cut
// and the dynamic ring live at the sensor level.
struct World {
  bool ground = true;
  std::vector<ObstacleBox> boxes;
  Vec3 bbox_min = Vec3(-5, -5, -0.5);
  Vec3 bbox_max = Vec3(5, 5, 4);

  bool occupied(const Vec3& p) const {
    if (ground && p.z() <= 0.0) return true;
    for (const auto& b : boxes) {
      if (b.contains(p)) return true;
    }
    return false;
  }
};

namespace detail {

inline std::optional<double> ray_box(const Vec3& origin, const Vec3& dir,
                                     const ObstacleBox& b, double t_max) {
  const double c = std::cos(-b.yaw), s = std::sin(-b.yaw);
  const Vec3 od = origin - b.center;
  const Vec3 o(c * od.x() - s * od.y(), s * od.x() + c * od.y(), od.z());
  const Vec3 d(c * dir.x() - s * dir.y(), s * dir.x() + c * dir.y(), dir.z());
  double t0 = 0.0, t1 = t_max;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-12) {
      if (std::abs(o[i]) > b.half[i]) return std::nullopt;
      continue;
    }
    double ta = (-b.half[i] - o[i]) / d[i];
    double tb = (b.half[i] - o[i]) / d[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  if (t0 <= 1e-9) return std::nullopt;  // origin inside or behind
  return t0;
}

inline std::optional<double> ray_sphere(const Vec3& origin, const Vec3& dir,
                                        const Vec3& c, double r, double t_max) {
  const Vec3 oc = origin - c;
  const double b = oc.dot(dir);
  const double disc = b * b - (oc.squaredNorm() - r * r);
  if (disc < 0.0) return std::nullopt;
  const double t = -b - std::sqrt(disc);
  if (t <= 1e-9 || t > t_max) return std::nullopt;
  return t;
}

}  // namespace detail

// Nearest intersection along the ray: ground, boxes, and (optionally) the
// ring approximated by a dense loop of spheres.
inline std::optional<RayHit> raycast_world(const World& world, const Vec3& origin,
                                           const Vec3& dir, double t_max,
                                           const RingState* ring = nullptr) {
  RayHit hit;
  hit.range = t_max;
  bool found = false;

  if (world.ground && dir.z() < -1e-12) {
    const double t = -origin.z() / dir.z();
    if (t > 1e-9 && t < hit.range) {
      hit.range = t;
      hit.object = -1;
      found = true;
    }
  }
  for (size_t i = 0; i < world.boxes.size(); ++i) {
    if (auto t = detail::ray_box(origin, dir, world.boxes[i], hit.range)) {
      hit.range = *t;
      hit.object = static_cast<int>(i);
      found = true;
    }
  }
  if (ring) {
    // cheap reject: bounding sphere around the ring
    const double bound = ring->radius + ring->tube_radius;
    const Vec3 oc = origin - ring->center;
    const double b = oc.dot(dir);
    if (b * b - (oc.squaredNorm() - bound * bound) >= 0.0) {
      constexpr int kRingSpheres = 64;
      for (int i = 0; i < kRingSpheres; ++i) {
        const double a = 2.0 * kPi * i / kRingSpheres;
        if (auto t = detail::ray_sphere(origin, dir, ring->point_at(a),
                                        ring->tube_radius, hit.range)) {
          hit.range = *t;
          hit.object = -2;
          found = true;
        }
      }
    }
  }
  if (!found) return std::nullopt;
  hit.point = origin + hit.range * dir;
  return hit;
}

}  // namespace earol
