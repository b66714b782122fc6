#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "earol/so3.hpp"

namespace earol {

struct RingDetectParams {
  double tolerance = 0.03;          // point-to-curve distance [m]
  double min_inlier_fraction = 0.6;
  int iterations = 150;
  double radius_gate = 0.3;         // relative deviation from the prior
};

struct RingDetection {
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitX();
  double radius = 0.0;
  int inliers = 0;
  double inlier_fraction = 0.0;
};

namespace detail {

struct CircleHypothesis {
  Vec3 center;
  Vec3 normal;
  double radius;
};

inline std::optional<CircleHypothesis> circle_from_three(const Vec3& p1,
                                                         const Vec3& p2,
                                                         const Vec3& p3) {
  const Vec3 a = p2 - p1, b = p3 - p1;
  const Vec3 n = a.cross(b);
  const double n2 = n.squaredNorm();
  if (n2 < 1e-16) return std::nullopt;  // collinear
  const Vec3 center =
      p1 + (a.squaredNorm() * b.cross(n) + b.squaredNorm() * n.cross(a)) /
               (2.0 * n2);
  return CircleHypothesis{center, n.normalized(), (center - p1).norm()};
}

inline double circle_distance(const Vec3& q, const CircleHypothesis& h) {
  const Vec3 v = q - h.center;
  const double height = h.normal.dot(v);
  const double radial = (v - height * h.normal).norm() - h.radius;
  return std::hypot(radial, height);
}

}  // namespace detail

// Coarse euclidean clustering on a spatial grid, for segmenting compact
// object candidates out of a scan before circle fitting. Clusters come out
// in a deterministic order (sorted by their minimum cell key).
inline std::vector<std::vector<Vec3>> cluster_points(std::span<const Vec3> points,
                                                     double cell = 0.5) {
  struct CellKey {
    int x, y, z;
    bool operator<(const CellKey& o) const {
      if (x != o.x) return x < o.x;
      if (y != o.y) return y < o.y;
      return z < o.z;
    }
  };
  std::map<CellKey, std::vector<int>> cells;
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    const Vec3& p = points[static_cast<size_t>(i)];
    cells[{static_cast<int>(std::floor(p.x() / cell)),
           static_cast<int>(std::floor(p.y() / cell)),
           static_cast<int>(std::floor(p.z() / cell))}]
        .push_back(i);
  }
  std::map<CellKey, int> label;
  int next_label = 0;
  std::vector<std::vector<Vec3>> clusters;
  for (const auto& [key, idx] : cells) {
    if (label.count(key)) continue;
    // flood fill over the 26-neighborhood
    std::vector<CellKey> stack{key};
    label[key] = next_label;
    clusters.emplace_back();
    while (!stack.empty()) {
      const CellKey c = stack.back();
      stack.pop_back();
      const auto it = cells.find(c);
      for (int i : it->second) clusters.back().push_back(points[static_cast<size_t>(i)]);
      for (int dx = -1; dx <= 1; ++dx) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dz = -1; dz <= 1; ++dz) {
            if (dx == 0 && dy == 0 && dz == 0) continue;
            const CellKey n{c.x + dx, c.y + dy, c.z + dz};
            if (cells.count(n) && !label.count(n)) {
              label[n] = next_label;
              stack.push_back(n);
            }
          }
        }
      }
    }
    ++next_label;
  }
  return clusters;
}

// RANSAC over 3-point circle hypotheses, gated by the radius prior, with a
// plane + algebraic circle refinement on the winning inlier set. Absent
// when the inlier fraction stays below the acceptance threshold.
inline std::optional<RingDetection> detect_ring(std::span<const Vec3> points,
                                                double radius_prior,
                                                std::mt19937_64& rng,
                                                RingDetectParams params = {}) {
  const int n = static_cast<int>(points.size());
  if (n < 10) return std::nullopt;
  std::uniform_int_distribution<int> pick(0, n - 1);

  detail::CircleHypothesis best{};
  int best_inliers = 0;
  for (int it = 0; it < params.iterations; ++it) {
    const int i1 = pick(rng), i2 = pick(rng), i3 = pick(rng);
    if (i1 == i2 || i1 == i3 || i2 == i3) continue;
    auto hyp = detail::circle_from_three(points[static_cast<size_t>(i1)],
                                         points[static_cast<size_t>(i2)],
                                         points[static_cast<size_t>(i3)]);
    if (!hyp) continue;
    if (std::abs(hyp->radius - radius_prior) > params.radius_gate * radius_prior) {
      continue;
    }
    int count = 0;
    for (const Vec3& q : points) {
      if (detail::circle_distance(q, *hyp) <= params.tolerance) ++count;
    }
    if (count > best_inliers) {
      best_inliers = count;
      best = *hyp;
    }
  }
  if (best_inliers < 3) return std::nullopt;

  // refine: PCA plane through the inliers, then an algebraic (Kasa) circle
  // fit in that plane
  std::vector<Vec3> inliers;
  inliers.reserve(static_cast<size_t>(best_inliers));
  for (const Vec3& q : points) {
    if (detail::circle_distance(q, best) <= params.tolerance) inliers.push_back(q);
  }
  Vec3 mean = Vec3::Zero();
  for (const Vec3& q : inliers) mean += q;
  mean /= static_cast<double>(inliers.size());
  Mat3 cov = Mat3::Zero();
  for (const Vec3& q : inliers) cov += (q - mean) * (q - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  Vec3 normal = es.eigenvectors().col(0);
  Vec3 e1 = (std::abs(normal.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX())
                .cross(normal)
                .normalized();
  const Vec3 e2 = normal.cross(e1);

  Eigen::MatrixXd a(static_cast<int>(inliers.size()), 3);
  Eigen::VectorXd rhs(static_cast<int>(inliers.size()));
  for (size_t i = 0; i < inliers.size(); ++i) {
    const Vec3 d = inliers[i] - mean;
    const double u = e1.dot(d), v = e2.dot(d);
    a(static_cast<int>(i), 0) = 2.0 * u;
    a(static_cast<int>(i), 1) = 2.0 * v;
    a(static_cast<int>(i), 2) = 1.0;
    rhs(static_cast<int>(i)) = u * u + v * v;
  }
  const Eigen::Vector3d sol =
      a.colPivHouseholderQr().solve(rhs);
  const Vec3 center = mean + sol[0] * e1 + sol[1] * e2;
  const double radius = std::sqrt(std::max(0.0, sol[2] + sol[0] * sol[0] + sol[1] * sol[1]));

  detail::CircleHypothesis refined{center, normal, radius};
  int count = 0;
  for (const Vec3& q : points) {
    if (detail::circle_distance(q, refined) <= params.tolerance) ++count;
  }
  const double frac = static_cast<double>(count) / n;
  if (frac < params.min_inlier_fraction) return std::nullopt;

  RingDetection det;
  det.center = center;
  // deterministic normal sign
  for (int i = 0; i < 3; ++i) {
    if (std::abs(normal[i]) > 1e-9) {
      if (normal[i] < 0.0) normal = -normal;
      break;
    }
  }
  det.normal = normal;
  det.radius = radius;
  det.inliers = count;
  det.inlier_fraction = frac;
  return det;
}

}  // namespace earol
