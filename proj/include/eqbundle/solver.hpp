#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eqbundle/bundle.hpp"
#include "eqbundle/dp.hpp"
#include "eqbundle/game.hpp"

namespace eqbundle {

struct SolveConfig {
  double mu_prime_factor = 1e3;  // initial barrier scale, times ||U||_inf
  double m_factor = 1.0;         // DP shift scale, times ||u||_inf / (1-gamma)
  double eta = 0.1;              // barrier decrement per outer step
  double step_size = 0.2;        // logit gradient step
  double inner_tol_bias = 1e-8;
  double inner_tol_angle = 1e-6;  // radians
  double outer_tol_eps = 1e-4;
  double singular_rcond = 1e-10;
  long max_inner = 50000;
  long max_outer = 5000;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument on bad bounds
};

enum class SolveStatus { converged, max_iterations, numerical_failure };

std::string to_string(SolveStatus status);

// One diagnostics row per inner or outer step.
struct TraceRecord {
  long outer_index = 0;
  long inner_index = 0;
  double bias_norm = 0;     // ||probs - pi_hat||_inf
  double objective = 0;     // unbiased objective
  double angle = 0;         // max over players of angle(dV_i, 1), radians
  double canosec_norm = 0;  // ||canonical section||_inf
  double mu_norm = 0;       // ||mu||_inf
};

struct SolveResult {
  SolveStatus status = SolveStatus::max_iterations;
  Policy policy;
  ValueFunction value;      // policy_value of the returned policy
  double eps_achieved = 0;  // ||canonical section at policy_value||_inf
  long inner_steps_total = 0;
  long outer_steps_total = 0;
};

/**
 * Mutable iteration state of one line search: the point (policy, mu, V), the
 * per-player DP shift m, and the tensors evaluated at that point. A solver
 * instance is single-threaded; independent instances share nothing.
 */
struct SolverState {
  Policy policy;  // logits-backed, strictly interior
  BarrierParameter mu;
  ValueFunction value;
  Vec m;  // per-player DP shift, fixed across the run

  // Evaluation caches at (policy, mu, value); refreshed every inner step.
  Vec stage_u;      // stage utility at V + m*1
  Vec dev_u;        // [state][player][action]
  Vec dev_u_pairs;  // [state][player][player][action][action]
  DualQuantities dual;
  Vec grad;  // projected gradient in logit space
  Vec dv;    // [state][player], D(V + m*1) - V

  // Diagnostics from the last evaluation.
  double bias_norm = 0;
  double dual_regret_gap = 0;  // ||r - r_hat||_inf
  double angle_max = 0;
  double objective = 0;
  double canosec_norm = 0;  // from the frozen stage utility
  double true_canosec_norm = 0;  // at V = policy_value, set by the outer check

  long outer_index = 0;
  long inner_steps_total = 0;
  long outer_steps_total = 0;
  int fiber_retries = 0;

  // Trust-region state for the hop length: eta shrinks when a hop breaks
  // inner convergence and recovers after a streak of clean hops.
  double eta_current = 0;
  int hop_streak = 0;

  // Last inner-converged point, kept so a failed hop can be rolled back
  // before escaping along the fiber.
  bool has_checkpoint = false;
  Vec chk_logits;
  Vec chk_value;
  Vec chk_mu;

  std::vector<TraceRecord> trace;
};

enum class InnerOutcome {
  converged,
  stalled,   // bias stopped improving; escape along the fiber and retry
  exhausted  // max_inner reached
};

// Builds the starting state: supplied (or uniform) policy, V = m*1,
// mu = mu_prime * probs.
SolverState make_initial_state(const DynamicGame& game, const SolveConfig& cfg,
                               const std::optional<Policy>& start = {});

/**
 * First iteration level: alternates one projected-gradient step on the
 * logits with one full DP replacement V <- D(V + m*1) until the primal-dual
 * bias, the dual regret gap, and the residual angle all pass tolerance
 * (single-state games skip the angle test). Emits one TraceRecord per step.
 * Reports a stall when the bias stops improving, which happens when a hop
 * lands too close to the fiber boundary and local convexity is lost.
 */
InnerOutcome inner_converge(const DynamicGame& game, SolverState& st,
                            const SolveConfig& cfg);

/**
 * Second iteration level: computes the bundle differential at the converged
 * point. Non-singular states hop fibers: mu <- (1-eta) mu with the policy
 * moved along X (relative step clipped to trust radius 0.5 in inf-norm).
 * A singular state instead moves along the fiber, mu <- mu + beta .* probs
 * with escalating beta, and re-enters the inner loop. Returns false after 8
 * failed escalations (numerical failure).
 */
bool outer_step(const DynamicGame& game, SolverState& st,
                const SolveConfig& cfg);

/**
 * Full line search. Loops inner_converge / outer_step until the canonical
 * section at V = policy_value drops to outer_tol_eps in sup norm.
 * Deterministic given (game, cfg, start).
 */
std::pair<SolveResult, std::vector<TraceRecord>> solve(
    const DynamicGame& game, const SolveConfig& cfg,
    const std::optional<Policy>& start = {});

// eps-perfect check: canonical section at V = policy_value, strictly below
// eps elementwise. The reported tensor localizes any violation. Gaps are
// mass-weighted (scaled by the policy), which is weaker than the unscaled
// eps-Nash convention for low-probability actions.
std::pair<bool, BarrierParameter> verify_epsilon_equilibrium(
    const DynamicGame& game, const Policy& policy, double eps);

// Samples policies with flat-Dirichlet rows and ranks them by the canonical
// section norm at their own policy value, ascending. Deterministic given
// the seed.
std::vector<std::pair<Policy, double>> scan_policy_space(
    const DynamicGame& game, int n_samples, std::uint64_t seed);

}  // namespace eqbundle
