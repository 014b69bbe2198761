#pragma once

#include <Eigen/Dense>
#include <span>

#include "eqbundle/contractions.hpp"
#include "eqbundle/game.hpp"

namespace eqbundle {

/**
 * Dual quantities of the barrier problem at a point (policy, mu, stage
 * utility). With devU the deviation utility:
 *   v      solves sum_a mu_a / (v - devU_a) = 1 per (state, player),
 *   r      = v - devU (> 0 whenever mu > 0),
 *   pi_hat = mu / r   (sums to 1 over actions by construction of v),
 *   r_hat  = mu / probs.
 * The primal-dual bias (probs - pi_hat, r - r_hat) vanishes exactly on the
 * equilibrium bundle.
 */
struct DualQuantities {
  Vec v;       // [state][player]
  Vec r;       // [state][player][action]
  Vec pi_hat;  // [state][player][action]
  Vec r_hat;   // [state][player][action]
};

// Multiplicative response of one state's bundle point to barrier changes.
struct BundleDifferential {
  Eigen::MatrixXd dlogpi_dlogmu;  // [(player,action)] x [(player,action)]
  Eigen::MatrixXd dv_dlogmu;      // [player] x [(player,action)]
  double condition_estimate = 0;  // reciprocal condition number of C
};

struct CoefficientMatrix {
  Eigen::MatrixXd C;  // size n_players*n_actions + n_players, square
  double rcond = 0;
};

/**
 * Unique root of f(v) = sum_a mu_a/(v - devU_a) - 1 on (max_a devU, +inf).
 * Bracketing bisection seeded at (max devU + min mu,
 * max devU + sum mu + range devU), refined by safeguarded Newton to
 * |f(v)| < 1e-12. Throws std::domain_error if any mu_a <= 0.
 */
double solve_dual_value(std::span<const double> mu_row,
                        std::span<const double> dev_u_row);

DualQuantities dual_quantities(const DynamicGame& game, const Policy& policy,
                               const BarrierParameter& mu, const Vec& stage_u);

// Same computation with the deviation utility already contracted.
DualQuantities dual_from_deviation(const Policy& policy,
                                   const BarrierParameter& mu,
                                   const Vec& dev_u);

// Objective sum (pi - pi_hat)(r - r_hat); >= 0, zero exactly when
// probs .* r = mu elementwise.
double unbiased_objective(const Policy& policy, const DualQuantities& dq);

/**
 * Gradient of the objective with respect to the policy logits, treating the
 * dual pair (pi_hat, r_hat) as parameters and v as re-solved on the
 * constraint surface:
 *   pg[j][a''] = G[j][a''] - (sum_{a'} G[j][a']) * probs[j][a''],
 *   G[j][a']   = sum_{(i,a)} bias[i][a] * (Diag(r) - devU_pairs .* probs).
 * Adding a constant per (state, player) row leaves probs unchanged, so the
 * update respects the simplex constraint without explicit projection.
 */
Vec projected_gradient(const Policy& policy, const DualQuantities& dq,
                       const Vec& dev_u_pairs);

/**
 * Least fiber element over the given policy:
 *   mu_bar = probs .* (max_a devU - devU),
 * computed on stage_utility(V). Its zeros are exactly the perfect equilibria
 * when V is the policy value; invariant under per-(state,player) constant
 * shifts of V.
 */
BarrierParameter canonical_section(const DynamicGame& game,
                                   const Policy& policy,
                                   const ValueFunction& v);

/**
 * Per-state coefficient matrix [[H, Bhat], [Bcheck, 0]] with
 * H = Diag(r) - devU_pairs .* probs, Bhat[(i,a)][l] = [i==l],
 * Bcheck[m][(j,a')] = probs[j][a'] * [j==m]. Singularity is reported through
 * rcond, never thrown.
 */
CoefficientMatrix coefficient_matrix(const DynamicGame& game,
                                     const Policy& policy,
                                     const DualQuantities& dq,
                                     const Vec& dev_u_pairs, int state);

/**
 * Solves C [X; Y] = [Diag(r); 0] for one state, columns indexed by the
 * perturbed barrier coordinate. X maps relative barrier changes dmu/mu to
 * relative policy changes dpi/pi along the bundle; Y gives the dual value
 * response. Callers must not trust X when condition_estimate is below the
 * singularity threshold and should move along the fiber instead.
 */
BundleDifferential bundle_differential(const DynamicGame& game,
                                       const Policy& policy,
                                       const DualQuantities& dq,
                                       const Vec& dev_u_pairs,
                                       const BarrierParameter& mu, int state);

// mu' = (1 - eta) .* mu + beta .* probs, eta and beta per player
// (eta in [0,1), beta >= 0). Scaling mu along a fiber changes neither the
// policy nor the canonical section.
BarrierParameter canonical_descent_step(const BarrierParameter& mu,
                                        const Policy& policy, const Vec& eta,
                                        const Vec& beta);

// mu = mu_prime * probs. For large mu_prime the pair (policy, mu) starts
// near the fiber over the policy. Requires a strictly interior policy.
BarrierParameter initial_barrier(const Policy& policy, double mu_prime);

}  // namespace eqbundle
