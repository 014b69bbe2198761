#pragma once

#include "eqbundle/game.hpp"

namespace eqbundle {

// Expected-utility contractions. All of them marginalize the joint-action
// dimension against the policy product measure; they are the only place the
// solver touches the normal-form tensors.

// out[s][A] = prod_k probs[s][k][a_k]; each state row sums to 1.
Vec joint_policy_prob(const DynamicGame& game, const Policy& policy);

// One-step utility plus discounted continuation:
// out[s][A][i] = u[s][A][i] + gamma * sum_{s'} T[s][A][s'] * V[s'][i].
Vec stage_utility(const DynamicGame& game, const ValueFunction& v);

// out[s][i][a]: expected stage utility to player i when i plays a and all
// other players follow the policy.
Vec deviation_utility(const DynamicGame& game, const Policy& policy,
                      const Vec& stage_u);

// out[s][i][j][a][a']: expected stage utility to player i when i plays a,
// j plays a', and the remaining players follow the policy. The i == j block
// is identically zero.
Vec deviation_utility_pairs(const DynamicGame& game, const Policy& policy,
                            const Vec& stage_u);

inline std::size_t pairs_idx(const DynamicGame& g, int s, int i, int j, int a,
                             int a2) {
  const int N = g.n_players, A = g.n_actions;
  return (((static_cast<std::size_t>(s) * N + i) * N + j) * A + a) * A + a2;
}

}  // namespace eqbundle
