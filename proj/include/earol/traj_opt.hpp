#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "earol/lbfgs.hpp"
#include "earol/trajectory.hpp"

namespace earol {

struct PlannerLimits {
  double vel_max = 2.0;   // [m/s]
  double acc_max = 4.0;   // [m/s^2]
  double jerk_max = 20.0; // [m/s^3]
  double clearance = 0.5; // obstacle penalty threshold D [m]
  double w_smooth = 1.0;
  double w_feasible = 1e4;
  double w_obstacle = 1e4;
  double w_time = 20.0;

  void validate() const {
    if (vel_max <= 0 || acc_max <= 0 || jerk_max <= 0 || clearance <= 0 ||
        w_smooth <= 0 || w_feasible <= 0 || w_obstacle <= 0 || w_time <= 0) {
      throw std::invalid_argument("PlannerLimits: all entries must be positive");
    }
  }
};

// Sampled Euclidean distance to the nearest obstacle, trilinearly
// interpolated, with a small-step central-difference gradient.
class DistanceField {
 public:
  DistanceField() = default;

  // occupied(i,j,k) marks obstacle cells; distances are in meters.
  DistanceField(const Vec3& origin, const Eigen::Vector3i& dims, double cell,
                const std::function<bool(int, int, int)>& occupied)
      : origin_(origin), dims_(dims), cell_(cell) {
    const size_t n = static_cast<size_t>(dims_[0]) * dims_[1] * dims_[2];
    std::vector<double> sq(n);
    constexpr double kInf = 1e18;
    for (int z = 0; z < dims_[2]; ++z)
      for (int y = 0; y < dims_[1]; ++y)
        for (int x = 0; x < dims_[0]; ++x)
          sq[index(x, y, z)] = occupied(x, y, z) ? 0.0 : kInf;

    // Felzenszwalb-Huttenlocher squared EDT, one axis at a time.
    edt_pass(sq, dims_[0], [&](int i, int y, int z) { return index(i, y, z); });
    edt_pass(sq, dims_[1], [&](int i, int x, int z) { return index(x, i, z); });
    edt_pass(sq, dims_[2], [&](int i, int x, int y) { return index(x, y, i); });

    dist_.resize(n);
    for (size_t i = 0; i < n; ++i) {
      dist_[i] = static_cast<float>(std::sqrt(sq[i]) * cell_);
    }
  }

  double cell() const { return cell_; }
  const Eigen::Vector3i& dims() const { return dims_; }

  // Trilinear interpolation on the cell-center lattice; queries outside the
  // grid clamp to the border.
  double distance(const Vec3& p) const {
    if (dist_.empty()) return std::numeric_limits<double>::max();
    Vec3 q = (p - origin_) / cell_ - Vec3::Constant(0.5);
    for (int i = 0; i < 3; ++i) q[i] = std::clamp(q[i], 0.0, dims_[i] - 1.0 - 1e-9);
    const int x0 = static_cast<int>(q.x());
    const int y0 = static_cast<int>(q.y());
    const int z0 = static_cast<int>(q.z());
    const double fx = q.x() - x0, fy = q.y() - y0, fz = q.z() - z0;
    auto v = [&](int dx, int dy, int dz) {
      return static_cast<double>(dist_[index(std::min(x0 + dx, dims_[0] - 1),
                                             std::min(y0 + dy, dims_[1] - 1),
                                             std::min(z0 + dz, dims_[2] - 1))]);
    };
    const double c00 = v(0, 0, 0) * (1 - fx) + v(1, 0, 0) * fx;
    const double c10 = v(0, 1, 0) * (1 - fx) + v(1, 1, 0) * fx;
    const double c01 = v(0, 0, 1) * (1 - fx) + v(1, 0, 1) * fx;
    const double c11 = v(0, 1, 1) * (1 - fx) + v(1, 1, 1) * fx;
    const double c0 = c00 * (1 - fy) + c10 * fy;
    const double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
  }

  Vec3 gradient(const Vec3& p, double h = 1e-4) const {
    Vec3 g;
    for (int i = 0; i < 3; ++i) {
      Vec3 lo = p, hi = p;
      lo[i] -= h;
      hi[i] += h;
      g[i] = (distance(hi) - distance(lo)) / (2.0 * h);
    }
    return g;
  }

 private:
  size_t index(int x, int y, int z) const {
    return (static_cast<size_t>(z) * dims_[1] + y) * dims_[0] + x;
  }

  template <typename IndexFn>
  void edt_pass(std::vector<double>& sq, int len, const IndexFn& idx) {
    // 1D lower-envelope-of-parabolas transform applied to every line of
    // the given axis.
    std::vector<double> f(len), d(len), zenv(len + 1);
    std::vector<int> vtx(len);
    int o1 = 0, o2 = 0;
    auto other_dims = [&](int axis) {
      int a = 0, b = 0;
      if (axis == 0) { a = dims_[1]; b = dims_[2]; }
      if (axis == 1) { a = dims_[0]; b = dims_[2]; }
      if (axis == 2) { a = dims_[0]; b = dims_[1]; }
      return std::pair<int, int>(a, b);
    };
    const int axis = (len == dims_[0]) ? 0 : (len == dims_[1] ? 1 : 2);
    std::tie(o1, o2) = other_dims(axis);
    for (int b = 0; b < o2; ++b) {
      for (int a = 0; a < o1; ++a) {
        for (int i = 0; i < len; ++i) f[i] = sq[idx(i, a, b)];
        int k = 0;
        vtx[0] = 0;
        zenv[0] = -std::numeric_limits<double>::infinity();
        zenv[1] = std::numeric_limits<double>::infinity();
        for (int i = 1; i < len; ++i) {
          double s;
          while (true) {
            const int v0 = vtx[k];
            s = ((f[i] + i * i) - (f[v0] + v0 * v0)) / (2.0 * i - 2.0 * v0);
            if (s <= zenv[k]) {
              --k;
            } else {
              break;
            }
          }
          ++k;
          vtx[k] = i;
          zenv[k] = s;
          zenv[k + 1] = std::numeric_limits<double>::infinity();
        }
        k = 0;
        for (int i = 0; i < len; ++i) {
          while (zenv[k + 1] < i) ++k;
          const int v0 = vtx[k];
          d[i] = (i - v0) * (i - v0) + f[v0];
        }
        for (int i = 0; i < len; ++i) sq[idx(i, a, b)] = d[i];
      }
    }
  }

  Vec3 origin_ = Vec3::Zero();
  Eigen::Vector3i dims_ = Eigen::Vector3i::Ones();
  double cell_ = 0.25;
  std::vector<float> dist_;
};

struct CostBreakdown {
  double total = 0.0;
  double smooth = 0.0;
  double feas_vel = 0.0;
  double feas_acc = 0.0;
  double feas_jerk = 0.0;
  double obstacle = 0.0;
  double time = 0.0;
};

constexpr int kQuadSamples = 16;  // uniform midpoint samples per piece

// J = w_s*Js + w_f*(Jv+Ja+Jj) + w_o*Jo + w_t*sum(T). The smoothness term is
// the jerk-squared integral (midpoint quadrature); feasibility and obstacle
// terms are squared-hinge sample sums, so the whole cost stays C1. Writes
// analytic gradients w.r.t. the interior waypoints and piece times when the
// output pointers are non-null.
inline double total_cost(const std::vector<Vec3>& waypoints,
                         const std::vector<double>& times,
                         const BoundaryState& s0, const BoundaryState& sf,
                         const PlannerLimits& limits,
                         const DistanceField* field,
                         std::vector<Vec3>* grad_q = nullptr,
                         std::vector<double>* grad_t = nullptr,
                         CostBreakdown* breakdown = nullptr) {
  limits.validate();
  const int m = static_cast<int>(times.size());
  MincoSolver solver;
  solver.setup(s0, sf, m);
  solver.solve(waypoints, times);
  const PiecewiseTrajectory traj = solver.trajectory();

  Eigen::MatrixXd grad_c = Eigen::MatrixXd::Zero(kPolyCoeffs * m, 3);
  std::vector<double> grad_t_local(static_cast<size_t>(m), 0.0);
  CostBreakdown bd;

  auto hinge = [](double x) { return x > 0.0 ? x : 0.0; };

  for (int i = 0; i < m; ++i) {
    const double ti = times[static_cast<size_t>(i)];
    const double w_quad = ti / kQuadSamples;
    for (int k = 0; k < kQuadSamples; ++k) {
      const double mu = (k + 0.5) / kQuadSamples;
      const double t_local = mu * ti;
      const Vec3 pos = traj.eval_piece(i, t_local, 0);
      const Vec3 vel = traj.eval_piece(i, t_local, 1);
      const Vec3 acc = traj.eval_piece(i, t_local, 2);
      const Vec3 jer = traj.eval_piece(i, t_local, 3);
      const Vec3 snp = traj.eval_piece(i, t_local, 4);

      // dJ/d(p^(d)) accumulators for this sample
      Vec3 g_pos = Vec3::Zero(), g_vel = Vec3::Zero(), g_acc = Vec3::Zero(),
           g_jer = Vec3::Zero();
      double g_time_node = 0.0;  // node motion term: d(t_local)/dT_i = mu

      // smoothness: integral of |jerk|^2
      bd.smooth += w_quad * jer.squaredNorm();
      g_jer += limits.w_smooth * 2.0 * w_quad * jer;
      // quadrature weight depends on T_i
      grad_t_local[static_cast<size_t>(i)] +=
          limits.w_smooth * jer.squaredNorm() / kQuadSamples;
      g_time_node += limits.w_smooth * w_quad * 2.0 * jer.dot(snp) * mu;

      // feasibility: squared hinge on squared-norm overshoots
      const double ev = vel.squaredNorm() - limits.vel_max * limits.vel_max;
      if (ev > 0.0) {
        bd.feas_vel += ev * ev;
        g_vel += limits.w_feasible * 4.0 * ev * vel;
        g_time_node += limits.w_feasible * 4.0 * ev * vel.dot(acc) * mu;
      }
      const double ea = acc.squaredNorm() - limits.acc_max * limits.acc_max;
      if (ea > 0.0) {
        bd.feas_acc += ea * ea;
        g_acc += limits.w_feasible * 4.0 * ea * acc;
        g_time_node += limits.w_feasible * 4.0 * ea * acc.dot(jer) * mu;
      }
      const double ej = jer.squaredNorm() - limits.jerk_max * limits.jerk_max;
      if (ej > 0.0) {
        bd.feas_jerk += ej * ej;
        g_jer += limits.w_feasible * 4.0 * ej * jer;
        g_time_node += limits.w_feasible * 4.0 * ej * jer.dot(snp) * mu;
      }

      // obstacle: squared hinge below the clearance threshold
      if (field) {
        const double dis = field->distance(pos);
        const double eo = hinge(limits.clearance - dis);
        if (eo > 0.0) {
          bd.obstacle += eo * eo;
          const Vec3 dgrad = field->gradient(pos);
          g_pos += limits.w_obstacle * (-2.0 * eo) * dgrad;
          g_time_node += limits.w_obstacle * (-2.0 * eo) * dgrad.dot(vel) * mu;
        }
      }

      grad_t_local[static_cast<size_t>(i)] += g_time_node;

      // scatter into coefficient gradient rows
      const auto b0 = poly_basis(t_local, 0);
      const auto b1 = poly_basis(t_local, 1);
      const auto b2 = poly_basis(t_local, 2);
      const auto b3 = poly_basis(t_local, 3);
      for (int j = 0; j < kPolyCoeffs; ++j) {
        const int row = kPolyCoeffs * i + j;
        grad_c.row(row) += b0[j] * g_pos.transpose() + b1[j] * g_vel.transpose() +
                           b2[j] * g_acc.transpose() + b3[j] * g_jer.transpose();
      }
    }
    bd.time += ti;
    grad_t_local[static_cast<size_t>(i)] += limits.w_time;
  }

  bd.total = limits.w_smooth * bd.smooth +
             limits.w_feasible * (bd.feas_vel + bd.feas_acc + bd.feas_jerk) +
             limits.w_obstacle * bd.obstacle + limits.w_time * bd.time;

  if (grad_q || grad_t) {
    std::vector<Vec3> gq;
    solver.propagate_gradient(grad_c, gq, grad_t_local);
    if (grad_q) *grad_q = gq;
    if (grad_t) *grad_t = grad_t_local;
  }
  if (breakdown) *breakdown = bd;
  return bd.total;
}

struct TrajOptResult {
  PiecewiseTrajectory trajectory;
  std::vector<Vec3> waypoints;
  std::vector<double> times;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  CostBreakdown breakdown;
};

struct TrajOptOptions {
  LbfgsParams lbfgs;
  double min_piece_time = 1e-3;
};

// Quasi-Newton descent over waypoints and log piece times (the exponential
// map keeps every T_i positive without constraints).
inline TrajOptResult optimize_trajectory(std::vector<Vec3> waypoints,
                                         std::vector<double> times,
                                         const BoundaryState& s0,
                                         const BoundaryState& sf,
                                         const PlannerLimits& limits,
                                         const DistanceField* field,
                                         TrajOptOptions options = {}) {
  const int m = static_cast<int>(times.size());
  const int nq = 3 * (m - 1);
  Eigen::VectorXd x(nq + m);
  for (int i = 0; i < m - 1; ++i) {
    x.segment<3>(3 * i) = waypoints[static_cast<size_t>(i)];
  }
  for (int i = 0; i < m; ++i) {
    x[nq + i] = std::log(std::max(times[static_cast<size_t>(i)],
                                  options.min_piece_time));
  }

  auto unpack = [&](const Eigen::VectorXd& v, std::vector<Vec3>& q,
                    std::vector<double>& t) {
    q.resize(static_cast<size_t>(m - 1));
    t.resize(static_cast<size_t>(m));
    for (int i = 0; i < m - 1; ++i) q[static_cast<size_t>(i)] = v.segment<3>(3 * i);
    for (int i = 0; i < m; ++i) {
      t[static_cast<size_t>(i)] = std::max(std::exp(v[nq + i]), options.min_piece_time);
    }
  };

  auto objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
    std::vector<Vec3> q;
    std::vector<double> t;
    unpack(v, q, t);
    std::vector<Vec3> gq;
    std::vector<double> gt;
    const double cost = total_cost(q, t, s0, sf, limits, field, &gq, &gt);
    grad.resize(v.size());
    for (int i = 0; i < m - 1; ++i) grad.segment<3>(3 * i) = gq[static_cast<size_t>(i)];
    for (int i = 0; i < m; ++i) {
      grad[nq + i] = gt[static_cast<size_t>(i)] * t[static_cast<size_t>(i)];
    }
    return cost;
  };

  TrajOptResult res;
  {
    Eigen::VectorXd g0(x.size());
    res.initial_cost = objective(x, g0);
  }
  if (!std::isfinite(res.initial_cost)) {
    throw std::invalid_argument("optimize_trajectory: non-finite initial cost");
  }

  LbfgsSolver solver(options.lbfgs);
  const LbfgsResult lr = solver.minimize(objective, x);

  std::vector<Vec3> q;
  std::vector<double> t;
  // descent property: keep whichever endpoint is better
  if (lr.cost <= res.initial_cost) {
    unpack(lr.x, q, t);
    res.final_cost = lr.cost;
  } else {
    unpack(x, q, t);
    res.final_cost = res.initial_cost;
  }
  res.iterations = lr.iterations;
  res.waypoints = q;
  res.times = t;
  total_cost(q, t, s0, sf, limits, field, nullptr, nullptr, &res.breakdown);
  res.trajectory = solve_coefficients(q, t, s0, sf);
  return res;
}

// Straight-line initial guess: equally spaced waypoints, piece times sized
// for half the velocity limit.
inline void straight_line_guess(const Vec3& start, const Vec3& goal, int pieces,
                                double vel_max, std::vector<Vec3>& waypoints,
                                std::vector<double>& times) {
  waypoints.clear();
  times.clear();
  const double dist = (goal - start).norm();
  const double t_piece =
      std::max(0.1, dist / std::max(1e-6, 0.5 * vel_max) / pieces);
  for (int i = 1; i < pieces; ++i) {
    waypoints.push_back(start + (goal - start) * (static_cast<double>(i) / pieces));
  }
  times.assign(static_cast<size_t>(pieces), t_piece);
}

}  // namespace earol
