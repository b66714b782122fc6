#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "earol/so3.hpp"

namespace earol {

// Distance-attenuated binary entropy of one occupancy cell:
//   H = exp(-R) * (-p log2 p - (1-p) log2 (1-p)),  with 0 log 0 := 0.
inline double cell_entropy(double p, double distance) {
  if (p < 0.0 || p > 1.0) {
    throw std::invalid_argument("cell_entropy: probability outside [0,1]");
  }
  double h = 0.0;
  if (p > 0.0 && p < 1.0) {
    h = -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
  }
  return std::exp(-distance) * h;
}

// Half-open polar-angle interval, possibly wrapping across +/-pi.
struct AngleSector {
  double lo = -kPi;
  double hi = kPi;

  bool full_circle() const { return hi - lo >= 2.0 * kPi - 1e-12; }
  bool contains(double a) const {
    if (full_circle()) return true;
    const double span = wrap_positive(hi - lo);
    return wrap_positive(a - lo) < span;
  }
  static double wrap_positive(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a < 0.0) a += 2.0 * kPi;
    return a;
  }
};

struct EntropyGridParams {
  double cell = 0.25;          // [m]
  double window = 5.0;         // side length of the local analysis cube [m]
  double logodds_hit = 0.85;
  double logodds_miss = -0.4;
  double p_min = 0.12;
  double p_max = 0.97;
};

// World-bounded occupancy grid in log-odds form. Unobserved cells stay at
// the 0.5 prior. Rays carve misses up to the hit and mark the cell just
// behind the surface as occupied, which keeps hit/miss evidence consistent
// for grid-aligned geometry.
class EntropyGrid {
 public:
  EntropyGrid() = default;
  EntropyGrid(const Vec3& bbox_min, const Vec3& bbox_max,
              EntropyGridParams params = {})
      : params_(params), origin_(bbox_min) {
    const Vec3 span = bbox_max - bbox_min;
    for (int i = 0; i < 3; ++i) {
      dims_[i] = std::max(1, static_cast<int>(std::ceil(span[i] / params_.cell)));
    }
    logodds_.assign(static_cast<size_t>(dims_[0]) * dims_[1] * dims_[2], 0.0f);
    observed_.assign(logodds_.size(), 0);
    lo_min_ = std::log(params_.p_min / (1.0 - params_.p_min));
    lo_max_ = std::log(params_.p_max / (1.0 - params_.p_max));
  }

  const EntropyGridParams& params() const { return params_; }
  const Eigen::Vector3i& dims() const { return dims_; }
  const Vec3& origin() const { return origin_; }

  bool inside(const Eigen::Vector3i& c) const {
    return c.x() >= 0 && c.y() >= 0 && c.z() >= 0 && c.x() < dims_[0] &&
           c.y() < dims_[1] && c.z() < dims_[2];
  }

  Eigen::Vector3i cell_of(const Vec3& p) const {
    const Vec3 q = (p - origin_) / params_.cell;
    return {static_cast<int>(std::floor(q.x())),
            static_cast<int>(std::floor(q.y())),
            static_cast<int>(std::floor(q.z()))};
  }

  Vec3 center_of(const Eigen::Vector3i& c) const {
    return origin_ + params_.cell * (c.cast<double>() + Vec3::Constant(0.5));
  }

  double probability(const Eigen::Vector3i& c) const {
    if (!inside(c)) return 0.5;
    const float l = logodds_[index(c)];
    return 1.0 / (1.0 + std::exp(-static_cast<double>(l)));
  }

  bool observed(const Eigen::Vector3i& c) const {
    return inside(c) && observed_[index(c)] != 0;
  }

  void raycast_update(const Vec3& origin, std::span<const Vec3> hits) {
    for (const Vec3& h : hits) ray_update(origin, h);
  }

  // single-ray form for streams whose origin moves during the scan
  void raycast_update(const Vec3& origin, const Vec3& hit) {
    ray_update(origin, hit);
  }

  // Sum of distance-attenuated cell entropies over the window cube around
  // center, restricted to cells whose polar angle lies in the sector.
  double sector_entropy(const Vec3& center, const AngleSector& sector) const {
    const double half = 0.5 * params_.window;
    const Eigen::Vector3i lo = cell_of(center - Vec3::Constant(half));
    const Eigen::Vector3i hi = cell_of(center + Vec3::Constant(half));
    double sum = 0.0;
    for (int z = std::max(0, lo.z()); z <= std::min(dims_[2] - 1, hi.z()); ++z) {
      for (int y = std::max(0, lo.y()); y <= std::min(dims_[1] - 1, hi.y()); ++y) {
        for (int x = std::max(0, lo.x()); x <= std::min(dims_[0] - 1, hi.x()); ++x) {
          const Eigen::Vector3i c(x, y, z);
          const Vec3 cc = center_of(c);
          if ((cc - center).cwiseAbs().maxCoeff() > half) continue;
          const double ang = std::atan2(cc.y() - center.y(), cc.x() - center.x());
          if (!sector.contains(ang)) continue;
          sum += cell_entropy(probability(c), (cc - center).norm());
        }
      }
    }
    return sum;
  }

  // Attainable cap of sector_entropy for a fully unknown window, averaged
  // over azimuth: sum of exp(-R) over all window cells scaled by the
  // sector share of the circle. Constant in the sector's direction, so
  // normalizing by it preserves the per-yaw ranking.
  double sector_entropy_cap(const Vec3& center, double sector_width) const {
    const double half = 0.5 * params_.window;
    const Eigen::Vector3i lo = cell_of(center - Vec3::Constant(half));
    const Eigen::Vector3i hi = cell_of(center + Vec3::Constant(half));
    double sum = 0.0;
    for (int z = std::max(0, lo.z()); z <= std::min(dims_[2] - 1, hi.z()); ++z) {
      for (int y = std::max(0, lo.y()); y <= std::min(dims_[1] - 1, hi.y()); ++y) {
        for (int x = std::max(0, lo.x()); x <= std::min(dims_[0] - 1, hi.x()); ++x) {
          const Vec3 cc = center_of({x, y, z});
          if ((cc - center).cwiseAbs().maxCoeff() > half) continue;
          sum += std::exp(-(cc - center).norm());
        }
      }
    }
    return sum * sector_width / (2.0 * kPi);
  }

  // Map-wide binary entropy (no distance term), the exploration metric.
  double total_entropy() const {
    double sum = 0.0;
    for (float l : logodds_) {
      const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(l)));
      if (p > 0.0 && p < 1.0) {
        sum += -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
      }
    }
    return sum;
  }

  // Column-summed entropy image, row-major, top row = max y. 8-bit, low
  // entropy dark.
  std::vector<uint8_t> entropy_image(int* width = nullptr,
                                     int* height = nullptr) const {
    std::vector<uint8_t> img(static_cast<size_t>(dims_[0]) * dims_[1]);
    const double cap = static_cast<double>(dims_[2]);
    for (int y = 0; y < dims_[1]; ++y) {
      for (int x = 0; x < dims_[0]; ++x) {
        double col = 0.0;
        for (int z = 0; z < dims_[2]; ++z) {
          const double p = probability({x, y, z});
          if (p > 0.0 && p < 1.0) {
            col += -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
          }
        }
        const int row = dims_[1] - 1 - y;
        img[static_cast<size_t>(row) * dims_[0] + x] =
            static_cast<uint8_t>(std::lround(255.0 * std::clamp(col / cap, 0.0, 1.0)));
      }
    }
    if (width) *width = dims_[0];
    if (height) *height = dims_[1];
    return img;
  }

 private:
  size_t index(const Eigen::Vector3i& c) const {
    return (static_cast<size_t>(c.z()) * dims_[1] + c.y()) * dims_[0] + c.x();
  }

  void apply(const Eigen::Vector3i& c, double delta) {
    if (!inside(c)) return;
    const size_t i = index(c);
    logodds_[i] = static_cast<float>(
        std::clamp(static_cast<double>(logodds_[i]) + delta, lo_min_, lo_max_));
    observed_[i] = 1;
  }

  // Amanatides-Woo traversal from origin to the hit point; every traversed
  // cell before the surface gets a miss, the cell just behind gets the hit.
  void ray_update(const Vec3& origin, const Vec3& hit) {
    const Vec3 d = hit - origin;
    const double len = d.norm();
    if (len < 1e-9) return;
    const Vec3 dir = d / len;
    const Eigen::Vector3i terminal = cell_of(hit + 1e-4 * dir);
    Eigen::Vector3i c = cell_of(origin);
    const Eigen::Vector3i step(dir.x() > 0 ? 1 : -1, dir.y() > 0 ? 1 : -1,
                               dir.z() > 0 ? 1 : -1);
    Vec3 t_max, t_delta;
    for (int i = 0; i < 3; ++i) {
      if (std::abs(dir[i]) < 1e-12) {
        t_max[i] = 1e30;
        t_delta[i] = 1e30;
      } else {
        const double cell_border =
            origin_[i] + (c[i] + (step[i] > 0 ? 1 : 0)) * params_.cell;
        t_max[i] = (cell_border - origin[i]) / dir[i];
        t_delta[i] = params_.cell / std::abs(dir[i]);
      }
    }
    double t = 0.0;
    const int guard_max =
        2 * (dims_[0] + dims_[1] + dims_[2]) + 8;  // bound traversal length
    for (int guard = 0; guard < guard_max; ++guard) {
      if (c == terminal) break;
      if (t > len) break;
      apply(c, params_.logodds_miss);
      int axis = 0;
      if (t_max[1] < t_max[axis]) axis = 1;
      if (t_max[2] < t_max[axis]) axis = 2;
      t = t_max[axis];
      c[axis] += step[axis];
      t_max[axis] += t_delta[axis];
    }
    apply(terminal, params_.logodds_hit);
  }

  EntropyGridParams params_;
  Vec3 origin_ = Vec3::Zero();
  Eigen::Vector3i dims_ = Eigen::Vector3i::Ones();
  std::vector<float> logodds_;
  std::vector<uint8_t> observed_;
  double lo_min_ = -2.0, lo_max_ = 3.5;
};

}  // namespace earol
