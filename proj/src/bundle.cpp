#include "eqbundle/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace eqbundle {

namespace {

void check_barrier(const DynamicGame& g, const BarrierParameter& mu) {
  if (mu.n_states != g.n_states || mu.n_players != g.n_players ||
      mu.n_actions != g.n_actions)
    throw std::invalid_argument("barrier parameter shape does not match game");
}

}  // namespace

double solve_dual_value(std::span<const double> mu_row,
                        std::span<const double> dev_u_row) {
  const int A = static_cast<int>(mu_row.size());
  if (A == 0 || dev_u_row.size() != mu_row.size())
    throw std::invalid_argument("dual value rows have mismatched shapes");
  double mu_min = std::numeric_limits<double>::infinity(), mu_sum = 0.0;
  for (double m : mu_row) {
    if (!(m > 0.0)) throw std::domain_error("barrier parameter must be > 0");
    mu_min = std::min(mu_min, m);
    mu_sum += m;
  }
  double d_max = dev_u_row[0], d_min = dev_u_row[0];
  for (double d : dev_u_row) {
    d_max = std::max(d_max, d);
    d_min = std::min(d_min, d);
  }

  // f decreases monotonically from +inf at d_max to -1, so the root is
  // unique; f(lo) >= 0 and f(hi) <= 0 hold by construction of the bracket.
  auto f = [&](double v) {
    double acc = -1.0;
    for (int a = 0; a < A; ++a) acc += mu_row[a] / (v - dev_u_row[a]);
    return acc;
  };
  auto fprime = [&](double v) {
    double acc = 0.0;
    for (int a = 0; a < A; ++a) {
      const double g = v - dev_u_row[a];
      acc -= mu_row[a] / (g * g);
    }
    return acc;
  };

  double lo = d_max + mu_min;
  double hi = d_max + mu_sum + (d_max - d_min);
  double v = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double fv = f(v);
    if (std::abs(fv) < 1e-12) return v;
    if (fv > 0.0)
      lo = v;
    else
      hi = v;
    const double step = fv / fprime(v);
    double next = v - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == v) break;
    v = next;
  }
  return v;
}

DualQuantities dual_from_deviation(const Policy& policy,
                                   const BarrierParameter& mu,
                                   const Vec& dev_u) {
  const int S = policy.n_states, N = policy.n_players, A = policy.n_actions;
  if (dev_u.size() != policy.probs.size() || mu.mu.size() != policy.probs.size())
    throw std::invalid_argument("dual quantities: mismatched tensor shapes");
  DualQuantities dq;
  dq.v.resize(static_cast<std::size_t>(S) * N);
  dq.r.resize(dev_u.size());
  dq.pi_hat.resize(dev_u.size());
  dq.r_hat.resize(dev_u.size());
  for (int s = 0; s < S; ++s) {
    for (int i = 0; i < N; ++i) {
      const std::size_t base = policy.idx(s, i, 0);
      const double v = solve_dual_value({&mu.mu[base], static_cast<std::size_t>(A)},
                                        {&dev_u[base], static_cast<std::size_t>(A)});
      dq.v[static_cast<std::size_t>(s) * N + i] = v;
      for (int a = 0; a < A; ++a) {
        dq.r[base + a] = v - dev_u[base + a];
        dq.pi_hat[base + a] = mu.mu[base + a] / dq.r[base + a];
        dq.r_hat[base + a] = mu.mu[base + a] / policy.probs[base + a];
      }
    }
  }
  return dq;
}

DualQuantities dual_quantities(const DynamicGame& game, const Policy& policy,
                               const BarrierParameter& mu, const Vec& stage_u) {
  check_barrier(game, mu);
  return dual_from_deviation(policy, mu, deviation_utility(game, policy, stage_u));
}

double unbiased_objective(const Policy& policy, const DualQuantities& dq) {
  double acc = 0.0;
  for (std::size_t k = 0; k < policy.probs.size(); ++k)
    acc += (policy.probs[k] - dq.pi_hat[k]) * (dq.r[k] - dq.r_hat[k]);
  return acc;
}

Vec projected_gradient(const Policy& policy, const DualQuantities& dq,
                       const Vec& dev_u_pairs) {
  const int S = policy.n_states, N = policy.n_players, A = policy.n_actions;
  Vec pg(policy.probs.size(), 0.0);
  Vec g(static_cast<std::size_t>(N) * A);
  for (int s = 0; s < S; ++s) {
    // G[j][a'] = sum_{(i,a)} bias * (Diag(r) - pairs .* probs)
    for (int j = 0; j < N; ++j) {
      for (int a2 = 0; a2 < A; ++a2) {
        const std::size_t kj = policy.idx(s, j, a2);
        double acc = (policy.probs[kj] - dq.pi_hat[kj]) * dq.r[kj];
        for (int i = 0; i < N; ++i) {
          if (i == j) continue;
          for (int a = 0; a < A; ++a) {
            const std::size_t ki = policy.idx(s, i, a);
            const double bias = policy.probs[ki] - dq.pi_hat[ki];
            acc -= bias *
                   dev_u_pairs[(((static_cast<std::size_t>(s) * N + i) * N + j) * A + a) * A + a2] *
                   policy.probs[kj];
          }
        }
        g[static_cast<std::size_t>(j) * A + a2] = acc;
      }
    }
    for (int j = 0; j < N; ++j) {
      double row_sum = 0.0;
      for (int a2 = 0; a2 < A; ++a2) row_sum += g[static_cast<std::size_t>(j) * A + a2];
      for (int a2 = 0; a2 < A; ++a2) {
        const std::size_t k = policy.idx(s, j, a2);
        pg[k] = g[static_cast<std::size_t>(j) * A + a2] - row_sum * policy.probs[k];
      }
    }
  }
  return pg;
}

BarrierParameter canonical_section(const DynamicGame& game,
                                   const Policy& policy,
                                   const ValueFunction& v) {
  const Vec dev = deviation_utility(game, policy, stage_utility(game, v));
  const int S = game.n_states, N = game.n_players, A = game.n_actions;
  BarrierParameter out;
  out.n_states = S;
  out.n_players = N;
  out.n_actions = A;
  out.mu.resize(dev.size());
  for (int s = 0; s < S; ++s)
    for (int i = 0; i < N; ++i) {
      const std::size_t base = policy.idx(s, i, 0);
      double mx = dev[base];
      for (int a = 1; a < A; ++a) mx = std::max(mx, dev[base + a]);
      for (int a = 0; a < A; ++a)
        out.mu[base + a] = policy.probs[base + a] * (mx - dev[base + a]);
    }
  return out;
}

namespace {

// Fills [[H, Bhat], [Bcheck, 0]] for one state.
Eigen::MatrixXd assemble_coefficient_matrix(const DynamicGame& game,
                                            const Policy& policy,
                                            const DualQuantities& dq,
                                            const Vec& dev_u_pairs, int s) {
  const int N = game.n_players, A = game.n_actions;
  const int na = N * A, dim = na + N;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < N; ++i)
    for (int a = 0; a < A; ++a) {
      const int row = i * A + a;
      c(row, row) = dq.r[policy.idx(s, i, a)];
      for (int j = 0; j < N; ++j) {
        if (j == i) continue;  // the i == j pairs block vanishes
        for (int a2 = 0; a2 < A; ++a2)
          c(row, j * A + a2) -= dev_u_pairs[pairs_idx(game, s, i, j, a, a2)] *
                                policy.p(s, j, a2);
      }
      c(row, na + i) = 1.0;
    }
  for (int j = 0; j < N; ++j)
    for (int a2 = 0; a2 < A; ++a2) c(na + j, j * A + a2) = policy.p(s, j, a2);
  return c;
}

double reciprocal_condition(const Eigen::MatrixXd& c) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0.0;
  return sv(sv.size() - 1) / sv(0);
}

}  // namespace

CoefficientMatrix coefficient_matrix(const DynamicGame& game,
                                     const Policy& policy,
                                     const DualQuantities& dq,
                                     const Vec& dev_u_pairs, int state) {
  CoefficientMatrix out;
  out.C = assemble_coefficient_matrix(game, policy, dq, dev_u_pairs, state);
  out.rcond = reciprocal_condition(out.C);
  return out;
}

BundleDifferential bundle_differential(const DynamicGame& game,
                                       const Policy& policy,
                                       const DualQuantities& dq,
                                       const Vec& dev_u_pairs,
                                       const BarrierParameter& mu, int state) {
  check_barrier(game, mu);
  const int N = game.n_players, A = game.n_actions;
  const int na = N * A;
  const Eigen::MatrixXd c =
      assemble_coefficient_matrix(game, policy, dq, dev_u_pairs, state);

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(na + N, na);
  for (int i = 0; i < N; ++i)
    for (int a = 0; a < A; ++a)
      rhs(i * A + a, i * A + a) = dq.r[policy.idx(state, i, a)];

  BundleDifferential out;
  out.condition_estimate = reciprocal_condition(c);
  const Eigen::MatrixXd sol = Eigen::PartialPivLU<Eigen::MatrixXd>(c).solve(rhs);
  out.dlogpi_dlogmu = sol.topRows(na);
  out.dv_dlogmu = sol.bottomRows(N);
  return out;
}

BarrierParameter canonical_descent_step(const BarrierParameter& mu,
                                        const Policy& policy, const Vec& eta,
                                        const Vec& beta) {
  if (static_cast<int>(eta.size()) != mu.n_players ||
      static_cast<int>(beta.size()) != mu.n_players)
    throw std::invalid_argument("eta/beta must have one entry per player");
  for (double e : eta)
    if (!(e >= 0.0 && e < 1.0))
      throw std::invalid_argument("eta must be in [0,1)");
  for (double b : beta)
    if (!(b >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  BarrierParameter out = mu;
  for (int s = 0; s < mu.n_states; ++s)
    for (int i = 0; i < mu.n_players; ++i)
      for (int a = 0; a < mu.n_actions; ++a)
        out.at(s, i, a) = (1.0 - eta[i]) * mu.at(s, i, a) + beta[i] * policy.p(s, i, a);
  return out;
}

BarrierParameter initial_barrier(const Policy& policy, double mu_prime) {
  if (!(mu_prime > 0.0))
    throw std::invalid_argument("initial barrier scale must be > 0");
  for (double p : policy.probs)
    if (!(p > 0.0))
      throw std::invalid_argument("initial barrier needs a strictly interior policy");
  BarrierParameter out;
  out.n_states = policy.n_states;
  out.n_players = policy.n_players;
  out.n_actions = policy.n_actions;
  out.mu.resize(policy.probs.size());
  for (std::size_t k = 0; k < policy.probs.size(); ++k)
    out.mu[k] = mu_prime * policy.probs[k];
  return out;
}

}  // namespace eqbundle
