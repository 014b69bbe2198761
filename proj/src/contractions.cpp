#include "eqbundle/contractions.hpp"

#include <stdexcept>

namespace eqbundle {

namespace {

void check_dims(const DynamicGame& g, const Policy& p) {
  if (p.n_states != g.n_states || p.n_players != g.n_players ||
      p.n_actions != g.n_actions)
    throw std::invalid_argument("policy shape does not match game");
}

void check_stage_u(const DynamicGame& g, const Vec& stage_u) {
  if (stage_u.size() !=
      static_cast<std::size_t>(g.n_states) * g.joint_count() * g.n_players)
    throw std::invalid_argument("stage utility tensor has wrong shape");
}

}  // namespace

Vec joint_policy_prob(const DynamicGame& game, const Policy& policy) {
  check_dims(game, policy);
  const int S = game.n_states, N = game.n_players, J = game.joint_count();
  Vec out(static_cast<std::size_t>(S) * J);
  for (int s = 0; s < S; ++s) {
    for (int A = 0; A < J; ++A) {
      double p = 1.0;
      for (int k = 0; k < N; ++k) p *= policy.p(s, k, game.joint_digit(A, k));
      out[static_cast<std::size_t>(s) * J + A] = p;
    }
  }
  return out;
}

Vec stage_utility(const DynamicGame& game, const ValueFunction& v) {
  if (v.n_states != game.n_states || v.n_players != game.n_players)
    throw std::invalid_argument("value function shape does not match game");
  const int S = game.n_states, N = game.n_players, J = game.joint_count();
  Vec out(static_cast<std::size_t>(S) * J * N);
  for (int s = 0; s < S; ++s) {
    for (int A = 0; A < J; ++A) {
      const std::size_t base = (static_cast<std::size_t>(s) * J + A) * N;
      for (int i = 0; i < N; ++i) {
        double cont = 0.0;
        for (int s2 = 0; s2 < game.n_states; ++s2)
          cont += game.t(s, A, s2) * v.at(s2, i);
        out[base + i] = game.u(s, A, i) + game.gamma * cont;
      }
    }
  }
  return out;
}

Vec deviation_utility(const DynamicGame& game, const Policy& policy,
                      const Vec& stage_u) {
  check_dims(game, policy);
  check_stage_u(game, stage_u);
  const int S = game.n_states, N = game.n_players, A = game.n_actions,
            J = game.joint_count();
  Vec out(static_cast<std::size_t>(S) * N * A, 0.0);
  std::vector<double> pref(N + 1), suff(N + 1);
  std::vector<int> dig(N);
  for (int s = 0; s < S; ++s) {
    for (int Aj = 0; Aj < J; ++Aj) {
      for (int k = 0; k < N; ++k) dig[k] = game.joint_digit(Aj, k);
      pref[0] = 1.0;
      for (int k = 0; k < N; ++k) pref[k + 1] = pref[k] * policy.p(s, k, dig[k]);
      suff[N] = 1.0;
      for (int k = N - 1; k >= 0; --k) suff[k] = suff[k + 1] * policy.p(s, k, dig[k]);
      const std::size_t ubase = (static_cast<std::size_t>(s) * J + Aj) * N;
      for (int i = 0; i < N; ++i) {
        const double w = pref[i] * suff[i + 1];  // product over k != i
        out[policy.idx(s, i, dig[i])] += w * stage_u[ubase + i];
      }
    }
  }
  return out;
}

Vec deviation_utility_pairs(const DynamicGame& game, const Policy& policy,
                            const Vec& stage_u) {
  check_dims(game, policy);
  check_stage_u(game, stage_u);
  const int S = game.n_states, N = game.n_players, J = game.joint_count();
  const int A = game.n_actions;
  Vec out(static_cast<std::size_t>(S) * N * N * A * A, 0.0);
  std::vector<int> dig(N);
  std::vector<double> fac(N);
  for (int s = 0; s < S; ++s) {
    for (int Aj = 0; Aj < J; ++Aj) {
      for (int k = 0; k < N; ++k) {
        dig[k] = game.joint_digit(Aj, k);
        fac[k] = policy.p(s, k, dig[k]);
      }
      const std::size_t ubase = (static_cast<std::size_t>(s) * J + Aj) * N;
      for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
          if (j == i) continue;  // Iverson factor [i != j]
          double w = 1.0;
          for (int k = 0; k < N; ++k)
            if (k != i && k != j) w *= fac[k];
          out[pairs_idx(game, s, i, j, dig[i], dig[j])] += w * stage_u[ubase + i];
        }
      }
    }
  }
  return out;
}

}  // namespace eqbundle
