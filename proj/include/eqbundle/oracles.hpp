#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "eqbundle/game.hpp"

namespace eqbundle::oracles {

// Reference implementations used by the test suites. Everything here is
// written as plain explicit loops, independent of the production
// contraction and solver paths, and capped at desk scale.

struct BruteForceContractions {
  Vec joint;         // [state][joint_action]
  Vec dev_u;         // [state][player][action]
  Vec dev_u_pairs;   // [state][player][player][action][action]
};

// All three contractions by direct enumeration of joint actions.
// Refuses games with more than 1e6 joint actions.
BruteForceContractions brute_force_contractions(const DynamicGame& game,
                                                const Policy& policy,
                                                const Vec& stage_u);

// Single-player value iteration V <- max_a(u + gamma T V), stopping at
// ||dV||_inf < tol*(1-gamma)/gamma. Returns the value iterate and the greedy
// policy (lowest action index on ties). Throws on multi-player input.
std::pair<ValueFunction, Policy> value_iteration(const DynamicGame& game,
                                                 double tol);

struct NashScanResult {
  std::vector<Policy> equilibria;
  bool degenerate = false;  // every grid point below tolerance
};

/**
 * Dense best-response-gap scan for static 2-player games with at most 3
 * actions: evaluates the gap on a simplex grid, locally refines every grid
 * minimum by shrinking coordinate search, keeps refined points below
 * refine_tol, and merges points closer than 10 grid steps in inf-norm.
 * A game whose every grid point is already below tolerance is reported as a
 * degenerate continuum instead of a count.
 */
NashScanResult grid_nash_scan(const DynamicGame& game, int resolution,
                              double refine_tol);

// Central difference (f(x + h d) - f(x - h d)) / (2h).
double finite_difference_directional(const std::function<double(const Vec&)>& f,
                                     const Vec& point, const Vec& direction,
                                     double h);

}  // namespace eqbundle::oracles
