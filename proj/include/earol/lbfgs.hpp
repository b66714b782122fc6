#pragma once

#include <Eigen/Core>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace earol {

struct LbfgsParams {
  int memory = 8;
  int max_iterations = 300;
  double gradient_tol = 1e-5;
  double cost_rel_tol = 1e-8;
  int max_linesearch = 64;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
};

enum class LbfgsStatus {
  kConverged,       // gradient norm below tolerance
  kCostStalled,     // relative decrease below tolerance
  kMaxIterations,
  kLineSearchFailed
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double cost = 0.0;
  int iterations = 0;
  LbfgsStatus status = LbfgsStatus::kMaxIterations;
};

// Limited-memory BFGS with a bracketing strong-Wolfe line search
// (Nocedal & Wright, Algorithms 3.5/3.6). The objective returns the cost
// and fills the gradient.
class LbfgsSolver {
 public:
  using Objective =
      std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

  explicit LbfgsSolver(LbfgsParams params = {}) : params_(params) {}

  LbfgsResult minimize(const Objective& fn, Eigen::VectorXd x0) const {
    const int n = static_cast<int>(x0.size());
    LbfgsResult res;
    Eigen::VectorXd x = std::move(x0);
    Eigen::VectorXd g(n), g_new(n);
    double f = fn(x, g);
    if (!std::isfinite(f)) {
      throw std::invalid_argument("lbfgs: non-finite cost at initial point");
    }

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;

    for (int iter = 0; iter < params_.max_iterations; ++iter) {
      res.iterations = iter;
      if (g.norm() < params_.gradient_tol) {
        res.status = LbfgsStatus::kConverged;
        break;
      }

      // two-loop recursion
      Eigen::VectorXd q = g;
      std::vector<double> alpha(s_hist.size());
      for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
        alpha[i] = rho_hist[i] * s_hist[i].dot(q);
        q -= alpha[i] * y_hist[i];
      }
      if (!s_hist.empty()) {
        const double gamma =
            s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        q *= gamma;
      }
      for (size_t i = 0; i < s_hist.size(); ++i) {
        const double beta = rho_hist[i] * y_hist[i].dot(q);
        q += (alpha[i] - beta) * s_hist[i];
      }
      Eigen::VectorXd d = -q;
      double dg = d.dot(g);
      if (dg >= 0.0) {  // safeguard: fall back to steepest descent
        d = -g;
        dg = -g.squaredNorm();
      }

      double step = iter == 0 ? std::min(1.0, 1.0 / std::max(g.norm(), 1e-12)) : 1.0;
      Eigen::VectorXd x_new;
      double f_new = f;
      if (!line_search(fn, x, f, g, d, dg, step, x_new, f_new, g_new)) {
        res.status = LbfgsStatus::kLineSearchFailed;
        break;
      }

      const Eigen::VectorXd s = x_new - x;
      const Eigen::VectorXd yv = g_new - g;
      const double sy = s.dot(yv);
      if (sy > 1e-12) {
        if (static_cast<int>(s_hist.size()) >= params_.memory) {
          s_hist.pop_front();
          y_hist.pop_front();
          rho_hist.pop_front();
        }
        s_hist.push_back(s);
        y_hist.push_back(yv);
        rho_hist.push_back(1.0 / sy);
      }

      const double rel = (f - f_new) / std::max(1.0, std::abs(f));
      x = x_new;
      g = g_new;
      f = f_new;
      res.iterations = iter + 1;
      if (rel >= 0.0 && rel < params_.cost_rel_tol) {
        res.status = LbfgsStatus::kCostStalled;
        break;
      }
    }

    res.x = x;
    res.cost = f;
    return res;
  }

 private:
  bool line_search(const Objective& fn, const Eigen::VectorXd& x, double f0,
                   const Eigen::VectorXd& g0, const Eigen::VectorXd& d,
                   double dg0, double step, Eigen::VectorXd& x_out,
                   double& f_out, Eigen::VectorXd& g_out) const {
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double f_lo = f0, dg_lo = dg0;
    Eigen::VectorXd g_try(x.size());

    for (int ls = 0; ls < params_.max_linesearch; ++ls) {
      x_out = x + step * d;
      f_out = fn(x_out, g_try);
      const double dg = g_try.dot(d);

      if (!std::isfinite(f_out) || f_out > f0 + params_.wolfe_c1 * step * dg0 ||
          (ls > 0 && f_out >= f_lo)) {
        hi = step;  // overshoot: shrink into (lo, hi)
      } else if (std::abs(dg) <= -params_.wolfe_c2 * dg0) {
        g_out = g_try;
        return true;  // strong Wolfe satisfied
      } else if (dg >= 0.0) {
        hi = lo;  // bracketed a minimum between step and lo
        lo = step;
        f_lo = f_out;
        dg_lo = dg;
      } else {
        lo = step;  // still descending: expand
        f_lo = f_out;
        dg_lo = dg;
      }
      (void)dg_lo;

      if (std::isinf(hi)) {
        step = 2.0 * step;
      } else {
        step = 0.5 * (lo + hi);
      }
      if (step < 1e-16 || std::abs(hi - lo) < 1e-16) break;
    }

    // Accept a plain Armijo point if strong Wolfe could not be met.
    x_out = x + step * d;
    f_out = fn(x_out, g_out);
    return std::isfinite(f_out) && f_out <= f0;
  }

  LbfgsParams params_;
};

}  // namespace earol
