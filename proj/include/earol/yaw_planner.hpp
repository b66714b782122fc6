#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

#include "earol/entropy_grid.hpp"
#include "earol/trajectory.hpp"

namespace earol {

struct YawCostWeights {
  double alpha = 0.3;  // exploration
  double beta = 0.6;   // target tracking
  double gamma = 0.1;  // yaw energy

  void validate() const {
    if (alpha < 0 || beta < 0 || gamma < 0 ||
        std::abs(alpha + beta + gamma - 1.0) > 1e-9) {
      throw std::invalid_argument("YawCostWeights: need nonnegative weights summing to 1");
    }
  }

  // Lost target: the tracking share folds into exploration.
  YawCostWeights renormalized_without_target() const {
    return YawCostWeights{alpha + beta, 0.0, gamma};
  }
};

struct TargetObservation {
  Vec3 position = Vec3::Zero();
  bool valid = false;
  double dx = 0.0;  // offset along the FOV center axis
  double dy = 0.0;  // lateral offset
};

// Project a target estimate into the FOV frame of a platform at `pos`
// facing yaw `psi`.
inline TargetObservation make_observation(const Vec3& target_pos,
                                          const Vec3& platform_pos,
                                          double psi) {
  TargetObservation obs;
  obs.position = target_pos;
  obs.valid = true;
  const double rx = target_pos.x() - platform_pos.x();
  const double ry = target_pos.y() - platform_pos.y();
  obs.dx = std::cos(psi) * rx + std::sin(psi) * ry;
  obs.dy = -std::sin(psi) * rx + std::cos(psi) * ry;
  return obs;
}

// Normalized squared polar offset of the target from the FOV center, with
// an inclusive dead zone. Invalid targets contribute nothing.
inline double tracking_cost(double /*psi*/, const TargetObservation& target,
                            double psi_th) {
  if (!target.valid) return 0.0;
  if (target.dx == 0.0 && target.dy == 0.0) return 0.0;
  const double theta = std::atan2(target.dy, target.dx);
  if (std::abs(theta) <= psi_th) return 0.0;
  const double n = theta / kPi;
  return n * n;
}

// Squared wrapped yaw change between consecutive layers.
inline double energy_cost(double psi_t, double psi_prev) {
  const double d = wrap_angle(psi_t - psi_prev);
  return d * d;
}

struct YawNode {
  Vec3 position = Vec3::Zero();
  double psi = 0.0;
  double t = 0.0;
  int layer = 0;
  int yaw_index = 0;
  // cached per-node cost pieces
  double entropy_term = 0.0;   // normalized sector entropy in [0, ~1]
  double tracking_term = 0.0;  // T(psi)
};

struct YawPlannerParams {
  int n_yaw = 24;             // yaw samples per layer (15 deg spacing)
  double dt = 0.4;            // layer spacing [s]
  double horizon = 2.4;       // [s]
  double omega_max = 1.8;     // [rad/s]
  double psi_th = 0.1;        // tracking dead zone [rad]
  double fov_width = 70.6 * kPi / 180.0;  // sector width for entropy
  double replan_rate = 5.0;   // [Hz]
};

struct YawLayers {
  std::vector<std::vector<YawNode>> layers;
  bool truncated = false;    // horizon exceeded the trajectory span
  bool relaxed = false;      // pruning emptied a layer; span reset to +/-pi
  double entropy_cap = 1.0;  // normalizer for the exploration term
};

// Sample (position, yaw, t) nodes along the trajectory at equal time
// intervals. When previous_yaws are given, each layer's samples span
// [prev - omega_max*dt, prev + omega_max*dt] around the matching entry;
// otherwise yaw samples cover [-pi, pi) uniformly.
inline YawLayers build_layers(const PiecewiseTrajectory& traj, double t_now,
                              double horizon, double dt, int n_yaw,
                              const std::vector<double>& previous_yaws = {},
                              double omega_max = 0.0) {
  if (dt <= 0.0) throw std::invalid_argument("build_layers: dt must be positive");
  if (n_yaw < 4) throw std::invalid_argument("build_layers: need at least 4 yaw samples");
  YawLayers out;
  const double t_end_traj = traj.duration();
  int n_layers = static_cast<int>(std::floor(horizon / dt + 1e-9));
  for (int k = 1; k <= n_layers; ++k) {
    const double tk = t_now + k * dt;
    if (tk > t_end_traj + 1e-9) {
      out.truncated = true;
      break;
    }
    const Vec3 pos = traj.eval(tk, 0);
    std::vector<YawNode> layer;
    layer.reserve(static_cast<size_t>(n_yaw));
    const bool pruned = !previous_yaws.empty() && omega_max > 0.0;
    if (pruned) {
      const size_t pi_idx =
          std::min(static_cast<size_t>(k - 1), previous_yaws.size() - 1);
      const double center = previous_yaws[pi_idx];
      const double span = omega_max * dt;
      // keep the global 2pi/n_yaw sample spacing inside the window
      const double step = 2.0 * kPi / n_yaw;
      const int half = static_cast<int>(std::floor(span / step));
      for (int j = -half; j <= half; ++j) {
        YawNode n;
        n.position = pos;
        n.psi = wrap_angle(center + j * step);
        n.t = tk;
        n.layer = k - 1;
        n.yaw_index = static_cast<int>(layer.size());
        layer.push_back(n);
      }
      if (layer.empty()) {
        out.relaxed = true;
      }
    }
    if (layer.empty()) {
      for (int j = 0; j < n_yaw; ++j) {
        YawNode n;
        n.position = pos;
        n.psi = -kPi + (2.0 * kPi * j) / n_yaw;
        n.t = tk;
        n.layer = k - 1;
        n.yaw_index = j;
        layer.push_back(n);
      }
    }
    out.layers.push_back(std::move(layer));
  }
  return out;
}

// Composite node reward C = alpha * H_sector - beta * T - gamma * E, where
// H_sector is normalized by the attainable window cap so all three terms
// share the [0,1] scale.
inline double node_cost(const YawNode& node, double prev_yaw,
                        const EntropyGrid& grid, const TargetObservation& target,
                        const YawCostWeights& weights,
                        const YawPlannerParams& params,
                        double entropy_cap = 0.0) {
  weights.validate();
  const YawCostWeights w =
      target.valid ? weights : weights.renormalized_without_target();
  const AngleSector sector{node.psi - 0.5 * params.fov_width,
                           node.psi + 0.5 * params.fov_width};
  const double cap = entropy_cap > 0.0
                         ? entropy_cap
                         : grid.sector_entropy_cap(node.position, params.fov_width);
  const double h_norm =
      cap > 0.0 ? grid.sector_entropy(node.position, sector) / cap : 0.0;
  TargetObservation obs =
      target.valid ? make_observation(target.position, node.position, node.psi)
                   : TargetObservation{};
  return w.alpha * h_norm - w.beta * tracking_cost(node.psi, obs, params.psi_th) -
         w.gamma * energy_cost(node.psi, prev_yaw);
}

struct YawSearchResult {
  std::vector<std::pair<double, double>> sequence;  // (t, psi)
  double path_reward = 0.0;
  double pruned_fraction = 0.0;
  int layer_count = 0;
  bool relaxed = false;
};

namespace detail {

// Fill the cached per-node terms (entropy and tracking) for each layer.
inline void cache_node_terms(YawLayers& layers, const EntropyGrid& grid,
                             const TargetObservation& target,
                             const YawPlannerParams& params) {
  for (auto& layer : layers.layers) {
    if (layer.empty()) continue;
    const double cap =
        grid.sector_entropy_cap(layer.front().position, params.fov_width);
    for (auto& node : layer) {
      const AngleSector sector{node.psi - 0.5 * params.fov_width,
                               node.psi + 0.5 * params.fov_width};
      node.entropy_term =
          cap > 0.0 ? grid.sector_entropy(node.position, sector) / cap : 0.0;
      if (target.valid) {
        const TargetObservation obs =
            make_observation(target.position, node.position, node.psi);
        node.tracking_term = tracking_cost(node.psi, obs, params.psi_th);
      } else {
        node.tracking_term = 0.0;
      }
    }
  }
}

}  // namespace detail

// Maximum-reward path through the layers from the current yaw, one node per
// layer, edges limited to |wrap(dpsi)| <= omega_max * dt. Runs Dijkstra on
// the shifted-negated reward (w = C_max - C >= 0); total reward ties break
// to the lexicographically smallest yaw-index sequence.
inline YawSearchResult search_yaw_sequence(const YawLayers& layers_in,
                                           const EntropyGrid& grid,
                                           const TargetObservation& target,
                                           const YawCostWeights& weights,
                                           double psi_start, double t_start,
                                           const YawPlannerParams& params) {
  weights.validate();
  YawLayers layers = layers_in;
  if (layers.layers.empty()) {
    throw std::invalid_argument("search_yaw_sequence: need at least one layer");
  }
  const YawCostWeights w =
      target.valid ? weights : weights.renormalized_without_target();
  detail::cache_node_terms(layers, grid, target, params);

  const double max_dpsi = params.omega_max * params.dt + 1e-12;
  const int n_layers = static_cast<int>(layers.layers.size());

  // Reachability relaxation: a layer none of whose nodes are reachable from
  // any reachable predecessor is rebuilt with the full yaw circle.
  std::vector<std::vector<char>> reachable(static_cast<size_t>(n_layers));
  bool relaxed = layers.relaxed;
  {
    std::vector<double> prev_psis{psi_start};
    for (int k = 0; k < n_layers; ++k) {
      auto& layer = layers.layers[static_cast<size_t>(k)];
      auto mark = [&](const std::vector<YawNode>& nodes) {
        std::vector<char> m(nodes.size(), 0);
        bool any = false;
        for (size_t j = 0; j < nodes.size(); ++j) {
          for (double pp : prev_psis) {
            if (std::abs(wrap_angle(nodes[j].psi - pp)) <= max_dpsi) {
              m[j] = 1;
              any = true;
              break;
            }
          }
        }
        return std::pair(m, any);
      };
      auto [m, any] = mark(layer);
      if (!any) {
        // relax this layer to the full circle
        relaxed = true;
        std::vector<YawNode> full;
        for (int j = 0; j < params.n_yaw; ++j) {
          YawNode n = layer.empty() ? YawNode{} : layer.front();
          if (!layer.empty()) n.position = layer.front().position;
          n.psi = -kPi + (2.0 * kPi * j) / params.n_yaw;
          n.yaw_index = j;
          n.layer = k;
          full.push_back(n);
        }
        layer = std::move(full);
        detail::cache_node_terms(layers, grid, target, params);
        std::tie(m, any) = mark(layer);
      }
      reachable[static_cast<size_t>(k)] = m;
      prev_psis.clear();
      for (size_t j = 0; j < layer.size(); ++j) {
        if (m[j]) prev_psis.push_back(layer[j].psi);
      }
      if (prev_psis.empty()) prev_psis.push_back(psi_start);
    }
  }

  // Upper bound of the edge reward: beta*T and gamma*E are nonnegative
  // subtractions, so C <= alpha * max entropy term.
  double c_max = 0.0;
  for (const auto& layer : layers.layers) {
    for (const auto& node : layer) {
      c_max = std::max(c_max, w.alpha * node.entropy_term);
    }
  }

  auto edge_reward = [&](const YawNode& to, double prev_psi) {
    return w.alpha * to.entropy_term - w.beta * to.tracking_term -
           w.gamma * energy_cost(to.psi, prev_psi);
  };

  // Dijkstra over the layered DAG. States are (layer, node); the start
  // state is virtual. Paths are compared by (distance, lexicographic
  // yaw-index sequence).
  struct NodeState {
    double dist = std::numeric_limits<double>::infinity();
    int parent = -1;  // node index in previous layer
    bool done = false;
    std::vector<int> path;  // yaw indices from layer 0
  };
  std::vector<std::vector<NodeState>> states(static_cast<size_t>(n_layers));
  for (int k = 0; k < n_layers; ++k) {
    states[static_cast<size_t>(k)].resize(layers.layers[static_cast<size_t>(k)].size());
  }

  using QItem = std::tuple<double, int, int>;  // dist, layer, node
  std::priority_queue<QItem, std::vector<QItem>, std::greater<QItem>> queue;

  for (size_t j = 0; j < layers.layers[0].size(); ++j) {
    const YawNode& node = layers.layers[0][j];
    if (std::abs(wrap_angle(node.psi - psi_start)) > max_dpsi) continue;
    const double wgt = c_max - edge_reward(node, psi_start);
    auto& st = states[0][j];
    st.dist = wgt;
    st.path = {static_cast<int>(j)};
    queue.emplace(wgt, 0, static_cast<int>(j));
  }

  while (!queue.empty()) {
    auto [dist, k, j] = queue.top();
    queue.pop();
    auto& st = states[static_cast<size_t>(k)][static_cast<size_t>(j)];
    if (st.done || dist > st.dist) continue;
    st.done = true;
    if (k + 1 >= n_layers) continue;
    const YawNode& from = layers.layers[static_cast<size_t>(k)][static_cast<size_t>(j)];
    auto& next_layer = layers.layers[static_cast<size_t>(k + 1)];
    for (size_t nj = 0; nj < next_layer.size(); ++nj) {
      const YawNode& to = next_layer[nj];
      if (std::abs(wrap_angle(to.psi - from.psi)) > max_dpsi) continue;
      const double wgt = c_max - edge_reward(to, from.psi);
      const double nd = st.dist + wgt;
      auto& nst = states[static_cast<size_t>(k + 1)][nj];
      std::vector<int> npath = st.path;
      npath.push_back(static_cast<int>(nj));
      if (nd < nst.dist || (nd == nst.dist && npath < nst.path)) {
        nst.dist = nd;
        nst.parent = j;
        nst.path = std::move(npath);
        queue.emplace(nd, k + 1, static_cast<int>(nj));
      }
    }
  }

  // pick the best terminal state
  const auto& last = states[static_cast<size_t>(n_layers - 1)];
  int best = -1;
  for (size_t j = 0; j < last.size(); ++j) {
    if (!std::isfinite(last[j].dist)) continue;
    if (best < 0 || last[j].dist < last[best].dist ||
        (last[j].dist == last[static_cast<size_t>(best)].dist &&
         last[j].path < last[static_cast<size_t>(best)].path)) {
      best = static_cast<int>(j);
    }
  }

  YawSearchResult out;
  out.layer_count = n_layers;
  out.relaxed = relaxed;
  int total_nodes = 0;
  for (const auto& l : layers.layers) total_nodes += static_cast<int>(l.size());
  out.pruned_fraction =
      1.0 - static_cast<double>(total_nodes) /
                std::max(1, params.n_yaw * n_layers);
  if (best < 0) {
    // nothing reachable at all: hold the current yaw
    out.sequence.emplace_back(t_start + params.dt, psi_start);
    return out;
  }
  out.path_reward = c_max * n_layers - last[static_cast<size_t>(best)].dist;
  const auto& path = last[static_cast<size_t>(best)].path;
  for (int k = 0; k < n_layers; ++k) {
    const auto& node =
        layers.layers[static_cast<size_t>(k)][static_cast<size_t>(path[static_cast<size_t>(k)])];
    out.sequence.emplace_back(node.t, node.psi);
  }
  return out;
}

// Receding-horizon entry point: rebuild layers from the current time with
// pruning seeded from the executed yaw / previous solution and search.
inline YawSearchResult receding_replan(const Vec3& /*position*/, double psi_now,
                                       double t_now,
                                       const PiecewiseTrajectory& traj,
                                       const EntropyGrid& grid,
                                       const TargetObservation& target,
                                       const std::vector<std::pair<double, double>>& prev_sequence,
                                       const YawCostWeights& weights,
                                       const YawPlannerParams& params) {
  std::vector<double> prev_yaws;
  if (!prev_sequence.empty()) {
    // previous solution yaw at each new layer time (nearest knot)
    for (int k = 1; k * params.dt <= params.horizon + 1e-9; ++k) {
      const double tk = t_now + k * params.dt;
      double bestd = std::numeric_limits<double>::infinity();
      double psi = psi_now;
      for (const auto& [ts, ps] : prev_sequence) {
        const double d = std::abs(ts - tk);
        if (d < bestd) {
          bestd = d;
          psi = ps;
        }
      }
      prev_yaws.push_back(psi);
    }
  }
  YawLayers layers = build_layers(traj, t_now, params.horizon, params.dt,
                                  params.n_yaw, prev_yaws, params.omega_max);
  if (layers.layers.empty()) {
    YawSearchResult r;
    r.sequence.emplace_back(t_now + params.dt, psi_now);
    return r;
  }
  return search_yaw_sequence(layers, grid, target, weights, psi_now, t_now,
                             params);
}

}  // namespace earol
