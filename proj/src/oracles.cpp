#include "eqbundle/oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace eqbundle::oracles {

BruteForceContractions brute_force_contractions(const DynamicGame& game,
                                                const Policy& policy,
                                                const Vec& stage_u) {
  const int S = game.n_states, N = game.n_players, A = game.n_actions;
  const long long J = game.joint_count();
  if (J > 1000000) throw std::invalid_argument("joint action space above oracle cap");
  if (stage_u.size() != static_cast<std::size_t>(S) * J * N)
    throw std::invalid_argument("stage utility tensor has wrong shape");

  BruteForceContractions out;
  out.joint.assign(static_cast<std::size_t>(S) * J, 0.0);
  out.dev_u.assign(static_cast<std::size_t>(S) * N * A, 0.0);
  out.dev_u_pairs.assign(static_cast<std::size_t>(S) * N * N * A * A, 0.0);

  std::vector<int> dig(N);
  for (int s = 0; s < S; ++s) {
    for (long long Aj = 0; Aj < J; ++Aj) {
      // decode joint index, player 0 slowest
      long long rest = Aj;
      for (int k = N - 1; k >= 0; --k) {
        dig[k] = static_cast<int>(rest % A);
        rest /= A;
      }
      double full = 1.0;
      for (int k = 0; k < N; ++k) full *= policy.p(s, k, dig[k]);
      out.joint[static_cast<std::size_t>(s) * J + Aj] = full;

      const std::size_t ubase = (static_cast<std::size_t>(s) * J + Aj) * N;
      for (int i = 0; i < N; ++i) {
        double excl_i = 1.0;
        for (int k = 0; k < N; ++k)
          if (k != i) excl_i *= policy.p(s, k, dig[k]);
        out.dev_u[(static_cast<std::size_t>(s) * N + i) * A + dig[i]] +=
            excl_i * stage_u[ubase + i];
        for (int j = 0; j < N; ++j) {
          if (j == i) continue;
          double excl_ij = 1.0;
          for (int k = 0; k < N; ++k)
            if (k != i && k != j) excl_ij *= policy.p(s, k, dig[k]);
          const std::size_t idx =
              (((static_cast<std::size_t>(s) * N + i) * N + j) * A + dig[i]) * A +
              dig[j];
          out.dev_u_pairs[idx] += excl_ij * stage_u[ubase + i];
        }
      }
    }
  }
  return out;
}

std::pair<ValueFunction, Policy> value_iteration(const DynamicGame& game,
                                                 double tol) {
  if (game.n_players != 1)
    throw std::invalid_argument("value iteration needs a single-player game");
  const int S = game.n_states, A = game.n_actions;
  ValueFunction v = ValueFunction::zeros(S, 1);
  const double stop =
      game.gamma > 0.0 ? tol * (1.0 - game.gamma) / game.gamma
                       : std::numeric_limits<double>::infinity();
  for (long iter = 0; iter < 1000000; ++iter) {
    ValueFunction next = ValueFunction::zeros(S, 1);
    double delta = 0.0;
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        double q = game.u(s, a, 0);
        for (int s2 = 0; s2 < S; ++s2)
          q += game.gamma * game.t(s, a, s2) * v.at(s2, 0);
        best = std::max(best, q);
      }
      next.at(s, 0) = best;
      delta = std::max(delta, std::abs(best - v.at(s, 0)));
    }
    v = next;
    if (delta < stop) break;
  }
  Vec probs(static_cast<std::size_t>(S) * A, 0.0);
  for (int s = 0; s < S; ++s) {
    int best_a = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a) {
      double q = game.u(s, a, 0);
      for (int s2 = 0; s2 < S; ++s2)
        q += game.gamma * game.t(s, a, s2) * v.at(s2, 0);
      if (q > best) {  // strict: lowest index wins ties
        best = q;
        best_a = a;
      }
    }
    probs[static_cast<std::size_t>(s) * A + best_a] = 1.0;
  }
  return {v, Policy::from_probs(S, 1, A, std::move(probs))};
}

namespace {

// Free simplex coordinates per player: the first A-1 probabilities; the last
// one is the remainder.
struct ScanPoint {
  std::array<double, 2> free0{};
  std::array<double, 2> free1{};
};

Vec point_probs(const ScanPoint& x, int A) {
  Vec probs(static_cast<std::size_t>(2) * A, 0.0);
  auto fill = [&](const std::array<double, 2>& f, int player) {
    double rest = 1.0;
    for (int a = 0; a < A - 1; ++a) {
      probs[static_cast<std::size_t>(player) * A + a] = f[a];
      rest -= f[a];
    }
    probs[static_cast<std::size_t>(player) * A + (A - 1)] = rest;
  };
  fill(x.free0, 0);
  fill(x.free1, 1);
  return probs;
}

bool feasible(const std::array<double, 2>& f, int A) {
  double sum = 0.0;
  for (int a = 0; a < A - 1; ++a) {
    if (f[a] < 0.0) return false;
    sum += f[a];
  }
  return sum <= 1.0 + 1e-15;
}

double best_response_gap(const DynamicGame& g, const Vec& probs) {
  const int A = g.n_actions;
  double gap = 0.0;
  for (int i = 0; i < 2; ++i) {
    double mx = -std::numeric_limits<double>::infinity(), avg = 0.0;
    for (int a = 0; a < A; ++a) {
      double dev = 0.0;
      for (int b = 0; b < A; ++b) {
        const int joint = i == 0 ? a * A + b : b * A + a;
        dev += probs[static_cast<std::size_t>(1 - i) * A + b] * g.u(0, joint, i);
      }
      mx = std::max(mx, dev);
      avg += probs[static_cast<std::size_t>(i) * A + a] * dev;
    }
    gap = std::max(gap, mx - avg);
  }
  return gap;
}

// Shrinking coordinate search on the free simplex coordinates.
ScanPoint refine(const DynamicGame& g, ScanPoint x, double h0) {
  const int A = g.n_actions;
  double h = h0;
  double best = best_response_gap(g, point_probs(x, A));
  while (h > 1e-7) {
    bool improved = false;
    for (int player = 0; player < 2; ++player) {
      for (int c = 0; c < A - 1; ++c) {
        for (double sign : {+1.0, -1.0}) {
          ScanPoint cand = x;
          auto& f = player == 0 ? cand.free0 : cand.free1;
          f[c] += sign * h;
          if (!feasible(f, A)) continue;
          const double val = best_response_gap(g, point_probs(cand, A));
          if (val < best) {
            best = val;
            x = cand;
            improved = true;
          }
        }
      }
    }
    if (!improved) h *= 0.5;
  }
  return x;
}

}  // namespace

NashScanResult grid_nash_scan(const DynamicGame& game, int resolution,
                              double refine_tol) {
  if (game.n_players != 2 || game.n_states != 1 || game.n_actions > 3)
    throw std::invalid_argument(
        "grid scan supports static 2-player games with at most 3 actions");
  if (resolution < 2) throw std::invalid_argument("resolution must be >= 2");
  const int A = game.n_actions, R = resolution;
  const double h = 1.0 / R;

  // enumerate one player's simplex grid in free coordinates
  std::vector<std::array<double, 2>> grid;
  if (A == 2) {
    for (int k = 0; k <= R; ++k) grid.push_back({double(k) / R, 0.0});
  } else {
    for (int k1 = 0; k1 <= R; ++k1)
      for (int k2 = 0; k2 + k1 <= R; ++k2)
        grid.push_back({double(k1) / R, double(k2) / R});
  }
  const int G = static_cast<int>(grid.size());

  std::vector<double> gap(static_cast<std::size_t>(G) * G);
  bool all_below = true;
  for (int g0 = 0; g0 < G; ++g0)
    for (int g1 = 0; g1 < G; ++g1) {
      ScanPoint x{grid[g0], grid[g1]};
      const double v = best_response_gap(game, point_probs(x, A));
      gap[static_cast<std::size_t>(g0) * G + g1] = v;
      if (v >= refine_tol) all_below = false;
    }

  NashScanResult out;
  if (all_below) {
    out.degenerate = true;
    return out;
  }

  // neighbor moves on one player's grid, by free-coordinate deltas
  std::vector<std::array<int, 2>> moves;
  if (A == 2)
    moves = {{+1, 0}, {-1, 0}};
  else
    moves = {{+1, 0}, {-1, 0}, {0, +1}, {0, -1}, {+1, -1}, {-1, +1}};
  auto grid_index = [&](std::array<double, 2> f) -> int {
    const int k1 = static_cast<int>(std::lround(f[0] * R));
    const int k2 = static_cast<int>(std::lround(f[1] * R));
    if (k1 < 0 || k2 < 0 || k1 + k2 > R) return -1;
    if (A == 2) return k2 == 0 ? k1 : -1;
    // row-major over (k1, k2) with k2 bounded by R - k1
    int id = 0;
    for (int r = 0; r < k1; ++r) id += R - r + 1;
    return id + k2;
  };

  std::vector<ScanPoint> candidates;
  for (int g0 = 0; g0 < G; ++g0) {
    for (int g1 = 0; g1 < G; ++g1) {
      const double here = gap[static_cast<std::size_t>(g0) * G + g1];
      bool is_min = true;
      for (int player = 0; player < 2 && is_min; ++player) {
        const int base = player == 0 ? g0 : g1;
        for (const auto& mv : moves) {
          std::array<double, 2> f = grid[base];
          f[0] += mv[0] * h;
          f[1] += mv[1] * h;
          const int nb = grid_index(f);
          if (nb < 0) continue;
          const double other = player == 0
                                   ? gap[static_cast<std::size_t>(nb) * G + g1]
                                   : gap[static_cast<std::size_t>(g0) * G + nb];
          if (other < here) {
            is_min = false;
            break;
          }
        }
      }
      if (is_min) candidates.push_back({grid[g0], grid[g1]});
    }
  }

  std::vector<std::pair<Vec, double>> refined;
  for (const auto& cand : candidates) {
    const ScanPoint x = refine(game, cand, h);
    const Vec probs = point_probs(x, A);
    const double v = best_response_gap(game, probs);
    if (v < refine_tol) refined.emplace_back(probs, v);
  }
  std::stable_sort(refined.begin(), refined.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });

  const double merge_dist = 10.0 * h;
  std::vector<Vec> kept;
  for (const auto& [probs, v] : refined) {
    bool dup = false;
    for (const Vec& other : kept) {
      double dist = 0.0;
      for (std::size_t k = 0; k < probs.size(); ++k)
        dist = std::max(dist, std::abs(probs[k] - other[k]));
      if (dist <= merge_dist) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(probs);
  }
  for (Vec& probs : kept)
    out.equilibria.push_back(Policy::from_probs(1, 2, A, std::move(probs)));
  return out;
}

double finite_difference_directional(const std::function<double(const Vec&)>& f,
                                     const Vec& point, const Vec& direction,
                                     double h) {
  if (!(h > 0.0)) throw std::invalid_argument("step h must be > 0");
  if (point.size() != direction.size())
    throw std::invalid_argument("point/direction size mismatch");
  Vec plus = point, minus = point;
  for (std::size_t k = 0; k < point.size(); ++k) {
    plus[k] += h * direction[k];
    minus[k] -= h * direction[k];
  }
  return (f(plus) - f(minus)) / (2.0 * h);
}

}  // namespace eqbundle::oracles
