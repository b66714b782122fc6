#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "earol/lio_estimator.hpp"

using namespace earol;

namespace {

// Dense synthetic planes inserted into a fresh map.
void add_plane(std::vector<Vec3>& pts, const Vec3& base, const Vec3& u,
               const Vec3& v, double extent_u, double extent_v, double step) {
  for (double a = -extent_u; a <= extent_u; a += step) {
    for (double b = -extent_v; b <= extent_v; b += step) {
      pts.push_back(base + a * u + b * v);
    }
  }
}

DualVoxelMap desk_scene_map(std::vector<Vec3>* world_points = nullptr) {
  std::vector<Vec3> pts;
  add_plane(pts, Vec3(0, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 3.0, 3.0, 0.05);
  add_plane(pts, Vec3(3.0, 0, 1.0), Vec3::UnitY(), Vec3::UnitZ(), 3.0, 1.0, 0.05);
  add_plane(pts, Vec3(0, 3.0, 1.0), Vec3::UnitX(), Vec3::UnitZ(), 3.0, 1.0, 0.05);
  DualVoxelMap map;
  map.insert_points(pts, Vec3::Zero());
  if (world_points) *world_points = pts;
  return map;
}

// corridor: two parallel walls along x plus the floor, no end caps
DualVoxelMap corridor_map(std::vector<Vec3>* world_points = nullptr,
                          double noise = 0.0, unsigned seed = 0) {
  std::vector<Vec3> pts;
  add_plane(pts, Vec3(0, -1.0, 1.0), Vec3::UnitX(), Vec3::UnitZ(), 6.0, 1.0, 0.05);
  add_plane(pts, Vec3(0, 1.0, 1.0), Vec3::UnitX(), Vec3::UnitZ(), 6.0, 1.0, 0.05);
  add_plane(pts, Vec3(0, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 6.0, 1.0, 0.05);
  if (noise > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, noise);
    for (auto& p : pts) p += Vec3(gauss(rng), gauss(rng), gauss(rng));
  }
  DualVoxelMap map;
  map.insert_points(pts, Vec3::Zero());
  if (world_points) *world_points = pts;
  return map;
}

}  // namespace

TEST_CASE("residual vanishes on the plane") {
  PlaneFit plane{Vec3::UnitZ(), Vec3::Zero(), Mat3::Identity() * 0.01};
  const auto r = point_plane_residual(Vec3(0.3, -0.2, 0.0), plane, SO3(), Vec3::Zero());
  REQUIRE(r);
  REQUIRE(std::abs(r->value) < 1e-12);
}

TEST_CASE("residual closed form h / sigma") {
  const double sigma = 0.05, h = 0.12;
  PlaneFit plane{Vec3::UnitZ(), Vec3::Zero(), Mat3::Identity() * sigma * sigma};
  const auto r = point_plane_residual(Vec3(1.0, 2.0, h), plane, SO3(), Vec3::Zero());
  REQUIRE(r);
  REQUIRE(r->value == Catch::Approx(h / sigma).epsilon(1e-12));
}

TEST_CASE("residual rejected for singular plane covariance") {
  PlaneFit plane{Vec3::UnitZ(), Vec3::Zero(), Mat3::Zero()};
  REQUIRE_FALSE(point_plane_residual(Vec3(0, 0, 1), plane, SO3(), Vec3::Zero()));
}

TEST_CASE("whitened residual scales as 1/sqrt(k) under covariance scaling") {
  PlaneFit plane{Vec3(0.3, -0.5, 0.81).normalized(), Vec3(1, 1, 1),
                 Mat3::Identity() * 0.004};
  const Vec3 p(1.4, 0.8, 1.3);
  const auto r1 = point_plane_residual(p, plane, SO3(), Vec3::Zero());
  PlaneFit scaled = plane;
  const double k = 9.0;
  scaled.covariance *= k;
  const auto r2 = point_plane_residual(p, scaled, SO3(), Vec3::Zero());
  REQUIRE(r1);
  REQUIRE(r2);
  REQUIRE(r2->value == Catch::Approx(r1->value / std::sqrt(k)).epsilon(1e-12));
}

TEST_CASE("residual Jacobian matches central finite differences") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    PlaneFit plane;
    plane.normal = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized();
    plane.center = Vec3(gauss(rng), gauss(rng), gauss(rng));
    plane.covariance = Mat3::Identity() * 0.01;
    const SO3 att = SO3::exp(0.3 * Vec3(gauss(rng), gauss(rng), gauss(rng)));
    const Vec3 pos(gauss(rng), gauss(rng), gauss(rng));
    const Vec3 p_body(gauss(rng), gauss(rng), gauss(rng));
    const Vec3 p_world = att * p_body + pos;
    const auto res = point_plane_residual(p_world, plane, att, pos);
    REQUIRE(res);
    const double h = 1e-6;
    for (int k = 0; k < 6; ++k) {
      ErrorState d = ErrorState::Zero();
      d[k] = h;
      auto eval = [&](const ErrorState& dd) {
        const Vec3 t2 = pos + dd.segment<3>(kIdxPos);
        const SO3 r2 = att * SO3::exp(dd.segment<3>(kIdxAtt));
        const Vec3 pw = r2 * p_body + t2;
        return point_plane_residual(pw, plane, r2, t2)->value;
      };
      const double fd = (eval(d) - eval(-d)) / (2.0 * h);
      const double an = res->jacobian[k];
      REQUIRE(std::abs(fd - an) <=
              1e-4 * std::max(1.0, std::max(std::abs(fd), std::abs(an))));
    }
  }
}

TEST_CASE("degeneracy: symmetric spectrum") {
  const DegeneracyReport rep = detect_degeneracy(Mat3::Identity(), 0.75, 0.05);
  REQUIRE(rep.entropy == Catch::Approx(std::log(3.0)).margin(1e-12));
  REQUIRE((rep.gamma - Vec3::Constant(1.0 / 3.0)).norm() < 1e-12);
  REQUIRE_FALSE(rep.degenerate);
  REQUIRE(rep.projector.norm() < 1e-12);
}

TEST_CASE("degeneracy: rank-1 spectrum") {
  Mat3 cov = Mat3::Zero();
  cov(0, 0) = 1.0;
  const DegeneracyReport rep = detect_degeneracy(cov, 0.75, 0.05);
  REQUIRE(rep.entropy == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(rep.degenerate);
  // projector spans the two null directions
  REQUIRE(rep.projector.trace() == Catch::Approx(2.0).margin(1e-9));
  REQUIRE((rep.projector * Vec3::UnitX()).norm() < 1e-9);
  REQUIRE((rep.projector * Vec3::UnitY() - Vec3::UnitY()).norm() < 1e-9);
}

TEST_CASE("degeneracy: zero mass gives the fully-degenerate report") {
  const DegeneracyReport rep = detect_degeneracy(Mat3::Zero(), 0.75, 0.05);
  REQUIRE(rep.degenerate);
  REQUIRE((rep.projector - Mat3::Identity()).norm() < 1e-12);
}

TEST_CASE("degeneracy projector is symmetric and idempotent") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Mat3 a;
    a << gauss(rng), gauss(rng), gauss(rng), gauss(rng), gauss(rng), gauss(rng),
        gauss(rng), gauss(rng), gauss(rng);
    const Mat3 cov = a * a.transpose();
    const DegeneracyReport rep = detect_degeneracy(cov, 0.75, 0.3);
    REQUIRE((rep.projector - rep.projector.transpose()).norm() < 1e-9);
    REQUIRE((rep.projector * rep.projector - rep.projector).norm() < 1e-9);
    REQUIRE(rep.gamma.sum() == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("degeneracy from corridor normals flags the corridor axis") {
  // normals of matched planes in a corridor: +/-y walls and the floor
  std::vector<Vec3> normals;
  for (int i = 0; i < 40; ++i) normals.push_back(Vec3::UnitY());
  for (int i = 0; i < 40; ++i) normals.push_back(-Vec3::UnitY());
  for (int i = 0; i < 30; ++i) normals.push_back(Vec3::UnitZ());
  Mat3 moment = Mat3::Zero();
  for (const auto& n : normals) moment += n * n.transpose();
  moment /= static_cast<double>(normals.size());
  const DegeneracyReport rep = detect_degeneracy(moment, 0.75, 0.05);
  REQUIRE(rep.degenerate);
  REQUIRE((rep.projector * Vec3::UnitX() - Vec3::UnitX()).norm() < 1e-9);
  REQUIRE((rep.projector * Vec3::UnitY()).norm() < 1e-9);
}

TEST_CASE("ieskf fixed point at zero residuals") {
  auto map = desk_scene_map();
  // body points sampled exactly on the mapped planes at the true pose
  StateVector xi_true;
  xi_true.t_wi = Vec3(0.5, 0.4, 1.2);
  std::vector<Vec3> world_pts;
  add_plane(world_pts, Vec3(0, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 2.0, 2.0, 0.1);
  add_plane(world_pts, Vec3(3.0, 0, 1.0), Vec3::UnitY(), Vec3::UnitZ(), 2.0, 0.8, 0.1);
  add_plane(world_pts, Vec3(0, 3.0, 1.0), Vec3::UnitX(), Vec3::UnitZ(), 2.0, 0.8, 0.1);
  std::vector<Vec3> body;
  for (const auto& p : world_pts) {
    body.push_back(xi_true.phi_wi.inverse() * (p - xi_true.t_wi));
  }
  Mat18 p_prior = Mat18::Identity() * 1e-2;
  const IeskfResult res = ieskf_update(xi_true, p_prior, body, map, {});
  REQUIRE_FALSE(res.report.skipped);
  REQUIRE((res.state.t_wi - xi_true.t_wi).norm() < 1e-9);
  REQUIRE((res.state.phi_wi.matrix() - xi_true.phi_wi.matrix()).norm() < 1e-9);
}

TEST_CASE("ieskf corrects a prior offset against ground and two walls") {
  auto map = desk_scene_map();
  StateVector xi_true;
  xi_true.t_wi = Vec3(0.5, 0.4, 1.2);
  std::vector<Vec3> world_pts;
  add_plane(world_pts, Vec3(0, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 2.0, 2.0, 0.1);
  add_plane(world_pts, Vec3(3.0, 0, 1.0), Vec3::UnitY(), Vec3::UnitZ(), 2.0, 0.8, 0.1);
  add_plane(world_pts, Vec3(0, 3.0, 1.0), Vec3::UnitX(), Vec3::UnitZ(), 2.0, 0.8, 0.1);
  std::vector<Vec3> body;
  for (const auto& p : world_pts) {
    body.push_back(xi_true.phi_wi.inverse() * (p - xi_true.t_wi));
  }
  StateVector prior = xi_true;
  prior.t_wi += Vec3(0.13, -0.11, 0.09);  // 0.2 m offset
  Mat18 p_prior = Mat18::Identity() * 1e-2;
  const IeskfResult res = ieskf_update(prior, p_prior, body, map, {});
  REQUIRE(res.report.iterations <= 5);
  REQUIRE((res.state.t_wi - xi_true.t_wi).norm() < 0.01);
}

TEST_CASE("ieskf converges quadratically on the desk scene") {
  auto map = desk_scene_map();
  StateVector xi_true;
  xi_true.t_wi = Vec3(0.5, 0.4, 1.2);
  std::vector<Vec3> world_pts;
  add_plane(world_pts, Vec3(0, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 2.0, 2.0, 0.1);
  add_plane(world_pts, Vec3(3.0, 0, 1.0), Vec3::UnitY(), Vec3::UnitZ(), 2.0, 0.8, 0.1);
  add_plane(world_pts, Vec3(0, 3.0, 1.0), Vec3::UnitX(), Vec3::UnitZ(), 2.0, 0.8, 0.1);
  std::vector<Vec3> body;
  for (const auto& p : world_pts) {
    body.push_back(xi_true.phi_wi.inverse() * (p - xi_true.t_wi));
  }
  StateVector prior = xi_true;
  prior.t_wi += Vec3(0.05, -0.04, 0.06);
  prior.phi_wi = xi_true.phi_wi * SO3::exp(Vec3(0.02, -0.02, 0.03));
  Mat18 p_prior = Mat18::Identity() * 1e2;  // weak prior so measurements dominate
  IeskfParams params;
  double prev_err = (prior.t_wi - xi_true.t_wi).norm();
  for (int iters = 1; iters <= 3; ++iters) {
    params.max_iterations = iters;
    params.convergence_tol = 0.0;
    const IeskfResult res = ieskf_update(prior, p_prior, body, map, params);
    const double err = (res.state.t_wi - xi_true.t_wi).norm();
    REQUIRE(err < 0.5 * prev_err);
    prev_err = err;
  }
}

TEST_CASE("ieskf skips the update when matches are too few") {
  DualVoxelMap map;  // empty
  StateVector prior;
  std::vector<Vec3> body{Vec3(1, 0, 0), Vec3(0, 1, 0)};
  Mat18 p_prior = Mat18::Identity() * 1e-2;
  const IeskfResult res = ieskf_update(prior, p_prior, body, map, {});
  REQUIRE(res.report.skipped);
  REQUIRE((res.state.t_wi - prior.t_wi).norm() == 0.0);
  REQUIRE((res.covariance - p_prior).norm() == 0.0);
}

TEST_CASE("damped corridor update keeps the unobservable axis put") {
  int pass = 0;
  for (unsigned seed = 1; seed <= 10; ++seed) {
    std::vector<Vec3> world_pts;
    auto map = corridor_map(&world_pts, 0.002, seed);
    StateVector xi_true;
    xi_true.t_wi = Vec3(0, 0, 0.8);
    std::vector<Vec3> scan_world;
    std::mt19937_64 rng(seed * 91 + 7);
    std::normal_distribution<double> gauss(0.0, 0.002);
    add_plane(scan_world, Vec3(0, -1.0, 1.0), Vec3::UnitX(), Vec3::UnitZ(), 4.0, 0.8, 0.11);
    add_plane(scan_world, Vec3(0, 1.0, 1.0), Vec3::UnitX(), Vec3::UnitZ(), 4.0, 0.8, 0.11);
    add_plane(scan_world, Vec3(0, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 4.0, 0.8, 0.11);
    std::vector<Vec3> body;
    for (auto p : scan_world) {
      p += Vec3(gauss(rng), gauss(rng), gauss(rng));
      body.push_back(xi_true.phi_wi.inverse() * (p - xi_true.t_wi));
    }
    StateVector prior = xi_true;
    const double axis_offset = 0.2, transverse_offset = 0.15;
    prior.t_wi += Vec3(axis_offset, transverse_offset, 0.0);
    Mat18 p_prior = Mat18::Identity() * 1e2;
    IeskfParams params;
    params.sigma_meas = 0.01;
    const IeskfResult res = ieskf_update(prior, p_prior, body, map, params);
    REQUIRE(res.report.degenerate);
    const Vec3 err = res.state.t_wi - xi_true.t_wi;
    const double axis_moved = axis_offset - std::abs(err.x());
    const double transverse_corrected = 1.0 - std::abs(err.y()) / transverse_offset;
    if (axis_moved < 0.1 * axis_offset && transverse_corrected >= 0.9) ++pass;
  }
  REQUIRE(pass == 10);
}

TEST_CASE("ieskf update is deterministic") {
  auto map = desk_scene_map();
  StateVector prior;
  prior.t_wi = Vec3(0.4, 0.3, 1.0);
  std::vector<Vec3> world_pts;
  add_plane(world_pts, Vec3(0, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 2.0, 2.0, 0.1);
  std::vector<Vec3> body;
  for (const auto& p : world_pts) {
    body.push_back(prior.phi_wi.inverse() * (p - prior.t_wi) + Vec3(0, 0, 0.01));
  }
  Mat18 p_prior = Mat18::Identity() * 1e-2;
  const IeskfResult a = ieskf_update(prior, p_prior, body, map, {});
  const IeskfResult b = ieskf_update(prior, p_prior, body, map, {});
  REQUIRE((a.state.t_wi - b.state.t_wi).norm() == 0.0);
  REQUIRE((a.covariance - b.covariance).norm() == 0.0);
  REQUIRE(a.report.entropy == b.report.entropy);
}
