#include "eqbundle/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "eqbundle/rng.hpp"

namespace eqbundle {

void SolveConfig::validate() const {
  if (!(mu_prime_factor > 0.0))
    throw std::invalid_argument("mu_prime_factor must be > 0");
  if (!(m_factor >= 0.0)) throw std::invalid_argument("m_factor must be >= 0");
  if (!(eta > 0.0 && eta < 1.0))
    throw std::invalid_argument("eta must be in (0,1)");
  if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be > 0");
  if (!(inner_tol_bias > 0.0))
    throw std::invalid_argument("inner_tol_bias must be > 0");
  if (!(inner_tol_angle > 0.0))
    throw std::invalid_argument("inner_tol_angle must be > 0");
  if (!(outer_tol_eps > 0.0))
    throw std::invalid_argument("outer_tol_eps must be > 0");
  if (!(singular_rcond > 0.0))
    throw std::invalid_argument("singular_rcond must be > 0");
  if (max_inner < 1) throw std::invalid_argument("max_inner must be >= 1");
  if (max_outer < 1) throw std::invalid_argument("max_outer must be >= 1");
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

namespace {

double inf_norm(const Vec& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

// Refreshes every cache and diagnostic of the state at its current point.
void evaluate(const DynamicGame& game, SolverState& st) {
  const int S = game.n_states, N = game.n_players, A = game.n_actions;

  ValueFunction shifted = st.value;
  for (int s = 0; s < S; ++s)
    for (int i = 0; i < N; ++i) shifted.at(s, i) += st.m[i];

  st.stage_u = stage_utility(game, shifted);
  st.dev_u = deviation_utility(game, st.policy, st.stage_u);
  st.dev_u_pairs = deviation_utility_pairs(game, st.policy, st.stage_u);
  st.dual = dual_from_deviation(st.policy, st.mu, st.dev_u);
  st.grad = projected_gradient(st.policy, st.dual, st.dev_u_pairs);

  st.dv.assign(static_cast<std::size_t>(S) * N, 0.0);
  st.bias_norm = 0.0;
  st.dual_regret_gap = 0.0;
  st.canosec_norm = 0.0;
  for (int s = 0; s < S; ++s) {
    for (int i = 0; i < N; ++i) {
      const std::size_t base = st.policy.idx(s, i, 0);
      double pr = 0.0, mx = st.dev_u[base];
      for (int a = 0; a < A; ++a) {
        pr += st.policy.probs[base + a] * st.dual.r[base + a];
        mx = std::max(mx, st.dev_u[base + a]);
        st.bias_norm = std::max(
            st.bias_norm, std::abs(st.policy.probs[base + a] - st.dual.pi_hat[base + a]));
        st.dual_regret_gap = std::max(
            st.dual_regret_gap, std::abs(st.dual.r[base + a] - st.dual.r_hat[base + a]));
      }
      for (int a = 0; a < A; ++a)
        st.canosec_norm =
            std::max(st.canosec_norm, st.policy.probs[base + a] * (mx - st.dev_u[base + a]));
      st.dv[static_cast<std::size_t>(s) * N + i] =
          st.dual.v[static_cast<std::size_t>(s) * N + i] - pr - st.value.at(s, i);
    }
  }

  st.objective = unbiased_objective(st.policy, st.dual);

  // angle(dV_i, 1) per player; a residual at the rounding-noise floor of V
  // counts as aligned, its direction carries no information there
  st.angle_max = 0.0;
  const double noise_floor = 1e-9 * (1.0 + inf_norm(st.value.values));
  for (int i = 0; i < N; ++i) {
    double dot = 0.0, norm2 = 0.0;
    for (int s = 0; s < S; ++s) {
      const double d = st.dv[static_cast<std::size_t>(s) * N + i];
      dot += d;
      norm2 += d * d;
    }
    norm2 = std::sqrt(norm2);
    if (norm2 < noise_floor * std::sqrt(double(S))) continue;
    const double c = std::clamp(dot / (norm2 * std::sqrt(double(S))), -1.0, 1.0);
    st.angle_max = std::max(st.angle_max, std::acos(c));
  }
}

void emit_trace(SolverState& st, long inner_index) {
  TraceRecord rec;
  rec.outer_index = st.outer_index;
  rec.inner_index = inner_index;
  rec.bias_norm = st.bias_norm;
  rec.objective = st.objective;
  rec.angle = st.angle_max;
  rec.canosec_norm = st.canosec_norm;
  rec.mu_norm = inf_norm(st.mu.mu);
  st.trace.push_back(rec);
}

// Row-wise recentering; softmax is invariant to per-row constants, this only
// keeps the stored logits bounded.
void recenter_rows(Policy& p, Vec& logits) {
  for (int s = 0; s < p.n_states; ++s)
    for (int i = 0; i < p.n_players; ++i) {
      const std::size_t base = p.idx(s, i, 0);
      double mx = logits[base];
      for (int a = 1; a < p.n_actions; ++a) mx = std::max(mx, logits[base + a]);
      for (int a = 0; a < p.n_actions; ++a) logits[base + a] -= mx;
    }
}

}  // namespace

SolverState make_initial_state(const DynamicGame& game, const SolveConfig& cfg,
                               const std::optional<Policy>& start) {
  cfg.validate();
  SolverState st;
  if (start) {
    if (start->n_states != game.n_states || start->n_players != game.n_players ||
        start->n_actions != game.n_actions)
      throw std::invalid_argument("starting policy shape does not match game");
    st.policy = *start;
    if (!st.policy.logits) {
      Vec logits(st.policy.probs.size());
      for (std::size_t k = 0; k < logits.size(); ++k) {
        if (!(st.policy.probs[k] > 0.0))
          throw std::invalid_argument("starting policy must be strictly interior");
        logits[k] = std::log(st.policy.probs[k]);
      }
      st.policy.set_logits(std::move(logits));
    }
  } else {
    st.policy = Policy::uniform(game.n_states, game.n_players, game.n_actions);
  }

  const double u_norm = inf_norm(game.utility);
  st.m.assign(game.n_players, cfg.m_factor * u_norm / (1.0 - game.gamma));
  st.value = ValueFunction::constant(game.n_states, game.n_players, st.m);

  ValueFunction shifted = st.value;
  for (int s = 0; s < game.n_states; ++s)
    for (int i = 0; i < game.n_players; ++i) shifted.at(s, i) += st.m[i];
  double u_scale = inf_norm(stage_utility(game, shifted));
  if (u_scale == 0.0) u_scale = 1.0;
  st.mu = initial_barrier(st.policy, cfg.mu_prime_factor * u_scale);
  st.eta_current = cfg.eta;
  return st;
}

InnerOutcome inner_converge(const DynamicGame& game, SolverState& st,
                            const SolveConfig& cfg) {
  constexpr long kStallWindow = 600;
  double best_bias = std::numeric_limits<double>::infinity();
  long best_step = 0;
  for (long k = 0; k < cfg.max_inner; ++k) {
    evaluate(game, st);
    emit_trace(st, k);
    ++st.inner_steps_total;

    const double scale = 1.0 + inf_norm(st.stage_u);
    const bool bias_ok = st.bias_norm < cfg.inner_tol_bias;
    const bool gap_ok = st.dual_regret_gap < cfg.inner_tol_bias * scale;
    const bool angle_ok = game.n_states == 1 || st.angle_max < cfg.inner_tol_angle;
    if (bias_ok && gap_ok && angle_ok) return InnerOutcome::converged;

    if (st.bias_norm < 0.7 * best_bias) {
      best_bias = st.bias_norm;
      best_step = k;
    } else if (k - best_step > kStallWindow || st.bias_norm > 1e3 * best_bias + 1.0) {
      return InnerOutcome::stalled;
    }

    // The objective curvature in logit space scales with probs .* r (= mu on
    // the bundle), so the raw gradient step is preconditioned by it;
    // step_size then acts as a scale-free contraction factor at every
    // barrier level.
    Vec logits = *st.policy.logits;
    for (std::size_t j = 0; j < logits.size(); ++j)
      logits[j] -= cfg.step_size * st.grad[j] / (st.policy.probs[j] * st.dual.r[j]);
    recenter_rows(st.policy, logits);
    st.policy.set_logits(std::move(logits));
    for (std::size_t j = 0; j < st.value.values.size(); ++j)
      st.value.values[j] += st.dv[j];
  }
  return InnerOutcome::exhausted;
}

bool escape_along_fiber(const DynamicGame& game, SolverState& st) {
  // Slide along the fiber: neither the policy nor the canonical section
  // moves, but the point leaves the degenerate region. Escalates beta,
  // doubling on each consecutive retry; eight failures in a row give up.
  const int S = game.n_states, N = game.n_players, A = game.n_actions;
  const long finished_inner = st.trace.empty() ? 0 : st.trace.back().inner_index;
  ++st.outer_steps_total;
  ++st.fiber_retries;
  if (st.fiber_retries > 8) {
    emit_trace(st, finished_inner);
    ++st.outer_index;
    return false;
  }
  Vec beta(N, 0.0);
  for (int i = 0; i < N; ++i) {
    double row_max = 0.0;
    for (int s = 0; s < S; ++s) {
      double sum = 0.0;
      for (int a = 0; a < A; ++a) sum += st.mu.at(s, i, a);
      row_max = std::max(row_max, sum / A);
    }
    beta[i] = 0.5 * static_cast<double>(1L << (st.fiber_retries - 1)) * row_max;
  }
  st.mu = canonical_descent_step(st.mu, st.policy, Vec(N, 0.0), beta);
  emit_trace(st, finished_inner);
  ++st.outer_index;
  return true;
}

bool outer_step(const DynamicGame& game, SolverState& st,
                const SolveConfig& cfg) {
  const int S = game.n_states, N = game.n_players, A = game.n_actions;
  const long finished_inner = st.trace.empty() ? 0 : st.trace.back().inner_index;

  std::vector<BundleDifferential> bd;
  bd.reserve(S);
  double worst_rcond = std::numeric_limits<double>::infinity();
  for (int s = 0; s < S; ++s) {
    bd.push_back(bundle_differential(game, st.policy, st.dual, st.dev_u_pairs,
                                     st.mu, s));
    worst_rcond = std::min(worst_rcond, bd.back().condition_estimate);
  }

  if (worst_rcond < cfg.singular_rcond) return escape_along_fiber(game, st);

  // A hop can land badly; keep the converged point so the caller can roll
  // back and escape along the fiber instead.
  st.has_checkpoint = true;
  st.chk_logits = *st.policy.logits;
  st.chk_value = st.value.values;
  st.chk_mu = st.mu.mu;

  ++st.outer_steps_total;

  // The canonical-section part of mu shrinks slower than (1-eta) whenever
  // the tangent under-delivers, so the dual fiber coordinate v would drain
  // toward the boundary where the bundle degenerates and inner convergence
  // breaks. Top v up so the best-action barrier entry v * pi_best stays at
  // twice the row norm of the canonical section; the target decays with the
  // section itself, and moving along the fiber changes neither the policy
  // nor the canonical section.
  Vec beta(N, 0.0);
  for (int i = 0; i < N; ++i) {
    for (int s = 0; s < S; ++s) {
      double mx_dev = st.dev_u[st.policy.idx(s, i, 0)];
      int best_a = 0;
      for (int a = 1; a < A; ++a)
        if (st.dev_u[st.policy.idx(s, i, a)] > mx_dev) {
          mx_dev = st.dev_u[st.policy.idx(s, i, a)];
          best_a = a;
        }
      double row_canosec = 0.0;
      for (int a = 0; a < A; ++a)
        row_canosec = std::max(row_canosec,
                               st.policy.p(s, i, a) *
                                   (mx_dev - st.dev_u[st.policy.idx(s, i, a)]));
      const double v_fiber =
          st.dual.v[static_cast<std::size_t>(s) * N + i] - mx_dev;
      const double needed = 2.0 * row_canosec / st.policy.p(s, i, best_a);
      beta[i] = std::max(beta[i], needed - (1.0 - st.eta_current) * v_fiber);
    }
    beta[i] = std::max(beta[i], 0.0);
  }
  const BarrierParameter mu_next =
      canonical_descent_step(st.mu, st.policy, Vec(N, st.eta_current), beta);

  // Hop fibers, with the policy following the bundle tangent for the actual
  // relative barrier change.
  Vec dlogpi(st.policy.probs.size(), 0.0);
  Eigen::VectorXd dmu_rel(N * A);
  for (int s = 0; s < S; ++s) {
    for (int i = 0; i < N; ++i)
      for (int a = 0; a < A; ++a) {
        const std::size_t k = st.policy.idx(s, i, a);
        dmu_rel(i * A + a) = mu_next.mu[k] / st.mu.mu[k] - 1.0;
      }
    Eigen::VectorXd dpi = bd[s].dlogpi_dlogmu * dmu_rel;
    for (int i = 0; i < N; ++i)
      for (int a = 0; a < A; ++a)
        dlogpi[st.policy.idx(s, i, a)] = dpi(i * A + a);
  }
  const double mx = inf_norm(dlogpi);
  if (mx > 0.5)
    for (double& x : dlogpi) x *= 0.5 / mx;  // first-order step; keep it trusted

  Vec logits = *st.policy.logits;
  for (std::size_t k = 0; k < logits.size(); ++k) logits[k] += dlogpi[k];
  recenter_rows(st.policy, logits);
  st.policy.set_logits(std::move(logits));
  st.mu = mu_next;

  emit_trace(st, finished_inner);
  ++st.outer_index;
  return true;
}

std::pair<SolveResult, std::vector<TraceRecord>> solve(
    const DynamicGame& game, const SolveConfig& cfg,
    const std::optional<Policy>& start) {
  SolverState st = make_initial_state(game, cfg, start);
  SolveStatus status = SolveStatus::max_iterations;
  bool last_was_hop = false;

  const double eta_floor = cfg.eta / 64.0;
  for (long t = 0; t < cfg.max_outer; ++t) {
    const InnerOutcome rc = inner_converge(game, st, cfg);
    if (rc == InnerOutcome::stalled && st.has_checkpoint) {
      // The previous hop broke inner convergence: roll it back, then either
      // shorten the hop or, once eta is at its floor, fatten the fiber.
      st.policy.set_logits(st.chk_logits);
      st.value.values = st.chk_value;
      st.mu.mu = st.chk_mu;
      last_was_hop = false;
      st.hop_streak = 0;
      if (st.eta_current > eta_floor) {
        st.eta_current *= 0.5;
      } else {
        evaluate(game, st);
        if (!escape_along_fiber(game, st)) {
          status = SolveStatus::numerical_failure;
          break;
        }
      }
      continue;
    }
    if (rc != InnerOutcome::converged) {
      status = SolveStatus::max_iterations;
      break;
    }
    if (last_was_hop) {
      st.fiber_retries = 0;
      if (++st.hop_streak >= 3) {
        st.eta_current = std::min(cfg.eta, st.eta_current * 1.3);
        st.hop_streak = 0;
      }
    }

    const ValueFunction vpi = policy_value(game, st.policy);
    const BarrierParameter mubar = canonical_section(game, st.policy, vpi);
    st.true_canosec_norm = inf_norm(mubar.mu);
    if (st.true_canosec_norm <= cfg.outer_tol_eps) {
      status = SolveStatus::converged;
      break;
    }
    const int retries_before = st.fiber_retries;
    if (!outer_step(game, st, cfg)) {
      status = SolveStatus::numerical_failure;
      break;
    }
    last_was_hop = st.fiber_retries == retries_before;  // escapes increment it
  }

  SolveResult res;
  res.status = status;
  res.policy = st.policy;
  res.value = policy_value(game, st.policy);
  res.eps_achieved = inf_norm(canonical_section(game, st.policy, res.value).mu);
  res.inner_steps_total = st.inner_steps_total;
  res.outer_steps_total = st.outer_steps_total;
  return {std::move(res), std::move(st.trace)};
}

std::pair<bool, BarrierParameter> verify_epsilon_equilibrium(
    const DynamicGame& game, const Policy& policy, double eps) {
  const ValueFunction vpi = policy_value(game, policy);
  BarrierParameter mubar = canonical_section(game, policy, vpi);
  bool ok = true;
  for (double x : mubar.mu)
    if (!(x < eps)) ok = false;
  return {ok, std::move(mubar)};
}

std::vector<std::pair<Policy, double>> scan_policy_space(
    const DynamicGame& game, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  Rng rng(seed);
  std::vector<std::pair<Policy, double>> out;
  out.reserve(n_samples);
  for (int k = 0; k < n_samples; ++k) {
    Vec probs;
    probs.reserve(static_cast<std::size_t>(game.n_states) * game.n_players *
                  game.n_actions);
    for (int s = 0; s < game.n_states; ++s)
      for (int i = 0; i < game.n_players; ++i) {
        Vec row = rng.dirichlet_flat(game.n_actions);
        probs.insert(probs.end(), row.begin(), row.end());
      }
    Policy p = Policy::from_probs(game.n_states, game.n_players,
                                  game.n_actions, std::move(probs));
    const ValueFunction vpi = policy_value(game, p);
    const double norm = inf_norm(canonical_section(game, p, vpi).mu);
    out.emplace_back(std::move(p), norm);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  return out;
}

}  // namespace eqbundle
