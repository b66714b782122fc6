#include <catch2/catch_amalgamated.hpp>
#include <algorithm>
#include <random>

#include "earol/voxel_map.hpp"

using namespace earol;

namespace {

std::vector<Vec3> plane_patch(int n, double extent, double z, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.push_back(Vec3(u(rng), u(rng), z));
  return pts;
}

}  // namespace

TEST_CASE("voxel keys are identical within one cell") {
  const VoxelKey a = voxel_key(Vec3(0.01, 0.24, 0.1), 0.25);
  const VoxelKey b = voxel_key(Vec3(0.2, 0.02, 0.2), 0.25);
  REQUIRE(a == b);
  REQUIRE_FALSE(voxel_key(Vec3(0.3, 0, 0), 0.25) == a);
}

TEST_CASE("planar insertion produces a tight plane fit") {
  DualVoxelMap map;
  auto pts = plane_patch(100, 0.12, 0.0, 1);  // all inside one fine voxel? keep near origin
  // spread over a few voxels around origin, still z = 0
  auto more = plane_patch(400, 1.0, 0.0, 2);
  pts.insert(pts.end(), more.begin(), more.end());
  map.insert_points(pts, Vec3::Zero(), 0);
  const auto plane = map.query_plane(Vec3(0.05, 0.05, 0.0));
  REQUIRE(plane);
  REQUIRE(std::abs(std::abs(plane->normal.z()) - 1.0) < 1e-6);
  const VoxelStats* v = map.fine_voxel(Vec3(0.05, 0.05, 0.0));
  REQUIRE(v != nullptr);
  Eigen::SelfAdjointEigenSolver<Mat3> es(plane->covariance);
  const double l1 = es.eigenvalues()[2], l3 = es.eigenvalues()[0];
  REQUIRE(l3 / l1 < 1e-6);
}

TEST_CASE("points outside the activation radius are ignored") {
  DualVoxelMapParams p;
  p.activation_radius = 10.0;
  DualVoxelMap map(p);
  const Vec3 far(25.0, 0, 0);
  const auto s = map.insert_points(std::vector<Vec3>{far}, Vec3::Zero());
  REQUIRE(s.skipped_outside == 1);
  REQUIRE(map.fine_size() == 0);
}

TEST_CASE("repeated insertion of one point") {
  DualVoxelMap map;
  const Vec3 p(0.1, 0.1, 0.1);
  map.insert_points(std::vector<Vec3>{p, p}, Vec3::Zero());
  const VoxelStats* v = map.fine_voxel(p);
  REQUIRE(v != nullptr);
  REQUIRE(v->count == 2);
  REQUIRE((v->mean - p).norm() < 1e-15);
}

TEST_CASE("streaming covariance equals batch covariance") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss(0.0, 0.03);
  VoxelStats stats;
  std::vector<Vec3> pts;
  for (int i = 0; i < 500; ++i) {
    const Vec3 p(0.1 + gauss(rng), 0.1 + gauss(rng), gauss(rng));
    pts.push_back(p);
    stats.insert(p, 0);
  }
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= pts.size();
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  cov /= pts.size();
  REQUIRE((stats.covariance() - cov).norm() / cov.norm() < 1e-9);
}

TEST_CASE("voxel stats are insertion-order independent") {
  auto pts = plane_patch(300, 0.12, 0.0, 77);
  VoxelStats a, b;
  for (const auto& p : pts) a.insert(p, 0);
  std::mt19937_64 rng(5);
  std::shuffle(pts.begin(), pts.end(), rng);
  for (const auto& p : pts) b.insert(p, 0);
  REQUIRE((a.mean - b.mean).norm() < 1e-9);
  REQUIRE((a.covariance() - b.covariance()).norm() < 1e-9);
}

TEST_CASE("query in empty space is absent") {
  DualVoxelMap map;
  REQUIRE_FALSE(map.query_plane(Vec3(5, 5, 5)));
}

TEST_CASE("coarse fallback when the fine voxel is starved") {
  DualVoxelMapParams params;
  DualVoxelMap map(params);
  // coplanar points spread over one coarse voxel (1 m), at most 4 per fine
  // voxel cell
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) {
    const double x = 0.02 + 0.12 * i;
    pts.push_back(Vec3(x, 0.05, 0.3));
    pts.push_back(Vec3(x, 0.55, 0.3));
  }
  map.insert_points(pts, Vec3::Zero());
  const Vec3 q(0.02, 0.05, 0.3);
  const VoxelStats* fine = map.fine_voxel(q);
  REQUIRE(fine != nullptr);
  REQUIRE(fine->count < map.params().min_points);
  const auto plane = map.query_plane(q);
  REQUIRE(plane);
  REQUIRE(std::abs(std::abs(plane->normal.z()) - 1.0) < 1e-6);
  REQUIRE(plane->center.z() == Catch::Approx(0.3));
}

TEST_CASE("adapt_resolution formula and clamps") {
  REQUIRE(adapt_resolution(0.5, 1000, 1000, 0.5) == Catch::Approx(0.5));
  REQUIRE(adapt_resolution(0.5, 2000, 1000, 0.5) ==
          Catch::Approx(0.5 * std::exp(-0.5)));
  REQUIRE(adapt_resolution(0.11, 100000, 10, 1.0) == Catch::Approx(0.1));  // d_min
  REQUIRE(adapt_resolution(0.9, 1, 100000, 1.0) == Catch::Approx(1.0));    // d_max
  REQUIRE_THROWS_AS(adapt_resolution(0.0, 1, 1, 0.5), std::invalid_argument);
  // monotone decreasing in n_current
  double prev = 1e9;
  for (int n = 100; n <= 4000; n += 100) {
    const double d = adapt_resolution(0.5, n, 2000, 0.4, 1e-6, 1e6);
    REQUIRE(d < prev);
    prev = d;
  }
}

TEST_CASE("downsample keeps one point per cell") {
  std::vector<Vec3> pts = {{0.0, 0.0, 0.0}, {0.05, 0.05, 0.0}, {0.3, 0.0, 0.0}};
  const auto out = voxel_downsample(pts, 0.25);
  REQUIRE(out.size() == 2);
}
