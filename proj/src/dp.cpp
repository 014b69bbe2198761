#include "eqbundle/dp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace eqbundle {

namespace {

constexpr double kConeTol = -1e-12;

ValueFunction shifted(const ValueFunction& v, const Vec& m) {
  ValueFunction out = v;
  for (int s = 0; s < v.n_states; ++s)
    for (int i = 0; i < v.n_players; ++i) out.at(s, i) += m[i];
  return out;
}

}  // namespace

ValueFunction apply_D(const DynamicGame& game, const Policy& policy,
                      const ValueFunction& v) {
  const Vec jp = joint_policy_prob(game, policy);
  const Vec su = stage_utility(game, v);
  const int S = game.n_states, N = game.n_players, J = game.joint_count();
  ValueFunction out = ValueFunction::zeros(S, N);
  for (int s = 0; s < S; ++s)
    for (int A = 0; A < J; ++A) {
      const double p = jp[static_cast<std::size_t>(s) * J + A];
      const std::size_t base = (static_cast<std::size_t>(s) * J + A) * N;
      for (int i = 0; i < N; ++i) out.at(s, i) += p * su[base + i];
    }
  return out;
}

ValueFunction apply_Dhat(const DynamicGame& game, const Policy& policy,
                         const ValueFunction& v) {
  const Vec dev = deviation_utility(game, policy, stage_utility(game, v));
  const int S = game.n_states, N = game.n_players, A = game.n_actions;
  ValueFunction out = ValueFunction::zeros(S, N);
  for (int s = 0; s < S; ++s)
    for (int i = 0; i < N; ++i) {
      double mx = dev[policy.idx(s, i, 0)];
      for (int a = 1; a < A; ++a) mx = std::max(mx, dev[policy.idx(s, i, a)]);
      out.at(s, i) = mx;
    }
  return out;
}

ValueFunction policy_value(const DynamicGame& game, const Policy& policy) {
  const Vec jp = joint_policy_prob(game, policy);
  const int S = game.n_states, N = game.n_players, J = game.joint_count();

  // T_pi and u_pi under the joint product measure.
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(S, S);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(S, N);
  for (int s = 0; s < S; ++s)
    for (int A = 0; A < J; ++A) {
      const double p = jp[static_cast<std::size_t>(s) * J + A];
      if (p == 0.0) continue;
      for (int s2 = 0; s2 < S; ++s2)
        system(s, s2) -= game.gamma * p * game.t(s, A, s2);
      for (int i = 0; i < N; ++i) rhs(s, i) += p * game.u(s, A, i);
    }

  Eigen::MatrixXd sol = Eigen::PartialPivLU<Eigen::MatrixXd>(system).solve(rhs);
  ValueFunction out = ValueFunction::zeros(S, N);
  for (int s = 0; s < S; ++s)
    for (int i = 0; i < N; ++i) out.at(s, i) = sol(s, i);

  // gamma < 1 makes the system invertible; a bad residual is a bug signal.
  const ValueFunction dv = apply_D(game, policy, out);
  double vmax = 0.0, res = 0.0;
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    vmax = std::max(vmax, std::abs(out.values[k]));
    res = std::max(res, std::abs(out.values[k] - dv.values[k]));
  }
  if (!(res < 1e-9 * (1.0 + vmax)))
    throw std::runtime_error("policy_value residual check failed");
  return out;
}

bool in_policy_cone(const DynamicGame& game, const Policy& policy,
                    const ValueFunction& v) {
  const ValueFunction dv = apply_D(game, policy, v);
  for (std::size_t k = 0; k < v.values.size(); ++k)
    if (v.values[k] - dv.values[k] < kConeTol) return false;
  return true;
}

bool in_best_response_cone(const DynamicGame& game, const Policy& policy,
                           const ValueFunction& v) {
  const ValueFunction dv = apply_Dhat(game, policy, v);
  for (std::size_t k = 0; k < v.values.size(); ++k)
    if (v.values[k] - dv.values[k] < kConeTol) return false;
  return true;
}

ConeDistances cone_distances(const DynamicGame& game, const Policy& policy,
                             const ValueFunction& v) {
  const ValueFunction d = apply_D(game, policy, v);
  const ValueFunction dh = apply_Dhat(game, policy, v);
  ConeDistances out;
  out.d.resize(v.values.size());
  out.d_hat.resize(v.values.size());
  const double scale = 1.0 / (1.0 - game.gamma);
  for (std::size_t k = 0; k < v.values.size(); ++k) {
    out.d[k] = (v.values[k] - d.values[k]) * scale;
    out.d_hat[k] = (v.values[k] - dh.values[k]) * scale;
  }
  return out;
}

Vec min_shift_to_best_response_cone(const DynamicGame& game,
                                    const Policy& policy,
                                    const ValueFunction& v) {
  const Vec dev = deviation_utility(game, policy, stage_utility(game, v));
  Vec m(game.n_players, 0.0);
  const double scale = 1.0 / (1.0 - game.gamma);
  for (int s = 0; s < game.n_states; ++s)
    for (int i = 0; i < game.n_players; ++i)
      for (int a = 0; a < game.n_actions; ++a)
        m[i] = std::max(m[i], (dev[policy.idx(s, i, a)] - v.at(s, i)) * scale);
  return m;
}

ValueFunction dp_step(const DynamicGame& game, const Policy& policy,
                      const ValueFunction& v, const Vec& m) {
  if (static_cast<int>(m.size()) != game.n_players)
    throw std::invalid_argument("dp_step shift must have one entry per player");
  for (double x : m)
    if (!(x >= 0.0)) throw std::invalid_argument("dp_step shift must be >= 0");
  return apply_D(game, policy, shifted(v, m));
}

}  // namespace eqbundle
