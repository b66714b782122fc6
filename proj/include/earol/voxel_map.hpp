#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "earol/so3.hpp"

namespace earol {

// Integer cell index at one layer resolution.
struct VoxelKey {
  int32_t x = 0, y = 0, z = 0;
  bool operator==(const VoxelKey&) const = default;
};

inline VoxelKey voxel_key(const Vec3& p, double resolution) {
  return VoxelKey{static_cast<int32_t>(std::floor(p.x() / resolution)),
                  static_cast<int32_t>(std::floor(p.y() / resolution)),
                  static_cast<int32_t>(std::floor(p.z() / resolution))};
}

struct VoxelKeyHash {
  size_t operator()(const VoxelKey& k) const {
    // large-prime mixing, standard for spatial hashing
    return static_cast<size_t>(k.x) * 73856093u ^
           static_cast<size_t>(k.y) * 19349669u ^
           static_cast<size_t>(k.z) * 83492791u;
  }
};

struct PlaneFit {
  Vec3 normal = Vec3::UnitZ();
  Vec3 center = Vec3::Zero();
  Mat3 covariance = Mat3::Zero();
};

// Streaming first/second moments of the points inside one voxel, with a
// lazily refreshed eigen decomposition for the plane fit.
struct VoxelStats {
  int count = 0;
  Vec3 mean = Vec3::Zero();
  Mat3 m2 = Mat3::Zero();  // sum of outer products about the running mean
  Vec3 normal = Vec3::UnitZ();
  Vec3 eigenvalues = Vec3::Zero();  // sorted descending
  int64_t last_touched = -1;
  bool cache_dirty = true;

  void insert(const Vec3& p, int64_t scan_index) {
    ++count;
    const Vec3 d_old = p - mean;
    mean += d_old / count;
    m2 += d_old * (p - mean).transpose();
    last_touched = scan_index;
    cache_dirty = true;
  }

  Mat3 covariance() const {
    if (count < 1) return Mat3::Zero();
    Mat3 c = m2 / count;
    return 0.5 * (c + c.transpose());  // symmetrize fp residue
  }

  void refresh_cache() {
    if (!cache_dirty) return;
    Eigen::SelfAdjointEigenSolver<Mat3> es(covariance());
    // SelfAdjointEigenSolver sorts ascending; store descending
    eigenvalues = es.eigenvalues().reverse();
    Vec3 n = es.eigenvectors().col(0);
    // deterministic sign: largest-magnitude component positive
    int dom = 0;
    n.cwiseAbs().maxCoeff(&dom);
    if (n[dom] < 0.0) n = -n;
    normal = n;
    cache_dirty = false;
  }
};

struct MapUpdateSummary {
  int touched_fine = 0;
  int touched_coarse = 0;
  int skipped_outside = 0;
};

struct DualVoxelMapParams {
  double fine_resolution = 0.25;    // [m]
  double coarse_resolution = 1.0;   // [m]
  double activation_radius = 30.0;  // [m]
  int min_points = 6;               // minimum count for a plane fit
  double planarity_max = 0.1;       // lambda3 / lambda1 gate
  double d_min = 0.1;               // adaptive-resolution clamp
  double d_max = 1.0;
};

// d_new = d_old * exp(-eta * (n_current - n_target) / n_target), clamped.
inline double adapt_resolution(double d_old, int n_current, int n_target,
                               double eta, double d_min = 0.1,
                               double d_max = 1.0) {
  if (d_old <= 0.0 || n_target <= 0) {
    throw std::invalid_argument("adapt_resolution: d_old and n_target must be positive");
  }
  const double ratio =
      static_cast<double>(n_current - n_target) / static_cast<double>(n_target);
  return std::clamp(d_old * std::exp(-eta * ratio), d_min, d_max);
}

// Fine + coarse voxel hash layers over the same world points. Only voxels
// within the activation radius of the platform accept updates.
class DualVoxelMap {
 public:
  explicit DualVoxelMap(DualVoxelMapParams params = {})
      : params_(params), adaptive_resolution_(params.fine_resolution) {}

  const DualVoxelMapParams& params() const { return params_; }

  MapUpdateSummary insert_points(std::span<const Vec3> points,
                                 const Vec3& platform_pos,
                                 int64_t scan_index = 0) {
    MapUpdateSummary s;
    const double act2 = params_.activation_radius * params_.activation_radius;
    for (const Vec3& p : points) {
      if ((p - platform_pos).squaredNorm() > act2) {
        ++s.skipped_outside;
        continue;
      }
      fine_[voxel_key(p, params_.fine_resolution)].insert(p, scan_index);
      coarse_[voxel_key(p, params_.coarse_resolution)].insert(p, scan_index);
      ++s.touched_fine;
      ++s.touched_coarse;
    }
    return s;
  }

  // Fine layer first; a voxel qualifies with enough points and a planar
  // eigen spectrum, otherwise the coarse layer is consulted. Planes lying
  // on a cell boundary are easily claimed by the wrong neighboring voxel,
  // so each layer considers the query cell and its six face neighbors and
  // keeps the candidate with the smallest point-to-plane distance.
  std::optional<PlaneFit> query_plane(const Vec3& p) {
    if (auto f = neighborhood_plane(fine_, p, params_.fine_resolution)) return f;
    return neighborhood_plane(coarse_, p, params_.coarse_resolution);
  }

  const VoxelStats* fine_voxel(const Vec3& p) const {
    auto it = fine_.find(voxel_key(p, params_.fine_resolution));
    return it == fine_.end() ? nullptr : &it->second;
  }
  const VoxelStats* coarse_voxel(const Vec3& p) const {
    auto it = coarse_.find(voxel_key(p, params_.coarse_resolution));
    return it == coarse_.end() ? nullptr : &it->second;
  }

  size_t fine_size() const { return fine_.size(); }
  size_t coarse_size() const { return coarse_.size(); }

  double adaptive_resolution() const { return adaptive_resolution_; }
  void adapt(int n_current, int n_target, double eta) {
    adaptive_resolution_ =
        adapt_resolution(adaptive_resolution_, n_current, n_target, eta,
                         params_.d_min, params_.d_max);
  }

  // Fine-layer voxel means, for export.
  std::vector<Vec3> fine_means() const {
    std::vector<Vec3> out;
    out.reserve(fine_.size());
    for (const auto& [k, v] : fine_) out.push_back(v.mean);
    std::sort(out.begin(), out.end(), [](const Vec3& a, const Vec3& b) {
      if (a.x() != b.x()) return a.x() < b.x();
      if (a.y() != b.y()) return a.y() < b.y();
      return a.z() < b.z();
    });
    return out;
  }

 private:
  using Layer = std::unordered_map<VoxelKey, VoxelStats, VoxelKeyHash>;

  std::optional<PlaneFit> cell_plane(Layer& layer, const VoxelKey& key) {
    auto it = layer.find(key);
    if (it == layer.end()) return std::nullopt;
    VoxelStats& v = it->second;
    if (v.count < params_.min_points) return std::nullopt;
    v.refresh_cache();
    const double l1 = v.eigenvalues[0], l3 = v.eigenvalues[2];
    if (l1 <= 0.0 || l3 / l1 >= params_.planarity_max) return std::nullopt;
    return PlaneFit{v.normal, v.mean, v.covariance()};
  }

  std::optional<PlaneFit> neighborhood_plane(Layer& layer, const Vec3& p,
                                             double resolution) {
    const VoxelKey base = voxel_key(p, resolution);
    std::optional<PlaneFit> best;
    double best_dist = std::numeric_limits<double>::infinity();
    auto consider = [&](const VoxelKey& k) {
      const auto fit = cell_plane(layer, k);
      if (!fit) return;
      const double d = std::abs(fit->normal.dot(p - fit->center));
      if (d < best_dist) {
        best_dist = d;
        best = fit;
      }
    };
    consider(base);
    for (int axis = 0; axis < 3; ++axis) {
      for (int dir : {-1, 1}) {
        VoxelKey k = base;
        (axis == 0 ? k.x : axis == 1 ? k.y : k.z) += dir;
        consider(k);
      }
    }
    return best;
  }

  DualVoxelMapParams params_;
  double adaptive_resolution_;
  Layer fine_;
  Layer coarse_;
};

// Scan downsampling on a temporary voxel grid: one point (the first seen)
// per cell of side d. Deterministic for a fixed input order.
inline std::vector<Vec3> voxel_downsample(std::span<const Vec3> points,
                                          double d) {
  std::unordered_map<VoxelKey, bool, VoxelKeyHash> seen;
  std::vector<Vec3> out;
  seen.reserve(points.size());
  for (const Vec3& p : points) {
    auto [it, inserted] = seen.try_emplace(voxel_key(p, d), true);
    if (inserted) out.push_back(p);
  }
  return out;
}

}  // namespace earol
