#pragma once

#include "eqbundle/contractions.hpp"
#include "eqbundle/game.hpp"

namespace eqbundle {

// Per-(state, player) distances from V to the two cone boundaries along the
// all-ones direction; d <= d_hat always.
struct ConeDistances {
  Vec d;      // [state][player], (V - D(V)) / (1 - gamma)
  Vec d_hat;  // [state][player], (V - Dhat(V)) / (1 - gamma)
};

// On-policy expectation of the stage utility: D(V)[s][i] = pi_A (u + gamma T V).
ValueFunction apply_D(const DynamicGame& game, const Policy& policy,
                      const ValueFunction& v);

// Per-player best response to the stage utility: max_a of the deviation
// utility.
ValueFunction apply_Dhat(const DynamicGame& game, const Policy& policy,
                         const ValueFunction& v);

/**
 * Unique fixed point of D: solves the dense linear system
 * (I - gamma T_pi) V_i = u_pi,i per player. Throws std::runtime_error if the
 * residual check fails (cannot happen for gamma < 1; treated as a bug
 * signal).
 */
ValueFunction policy_value(const DynamicGame& game, const Policy& policy);

// Cone membership, tolerance -1e-12 to absorb boundary roundoff.
bool in_policy_cone(const DynamicGame& game, const Policy& policy,
                    const ValueFunction& v);
bool in_best_response_cone(const DynamicGame& game, const Policy& policy,
                           const ValueFunction& v);

ConeDistances cone_distances(const DynamicGame& game, const Policy& policy,
                             const ValueFunction& v);

// Smallest per-player m >= 0 with V + m*1 in the best response cone.
Vec min_shift_to_best_response_cone(const DynamicGame& game,
                                    const Policy& policy,
                                    const ValueFunction& v);

// One sweep of the shifted iteration V <- D(V + m*1), m per player (>= 0).
// For fixed policy the iterates converge to policy_value + gamma*m/(1-gamma).
ValueFunction dp_step(const DynamicGame& game, const Policy& policy,
                      const ValueFunction& v, const Vec& m);

}  // namespace eqbundle
