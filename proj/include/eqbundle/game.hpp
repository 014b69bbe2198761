#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace eqbundle {

using Vec = std::vector<double>;

/**
 * Finite discounted stochastic game with a uniform action count across
 * players and states.
 *
 * Joint actions are flattened row-major with player 0 as the slowest-varying
 * digit: A = a_0 * n_actions^(N-1) + ... + a_{N-1}. The utility tensor is
 * indexed [state][joint_action][player] and the transition tensor
 * [state][joint_action][next_state]; every transition row is a probability
 * distribution over next states.
 *
 * Instances are immutable after construction and safe to share across
 * threads.
 */
struct DynamicGame {
  int n_players = 0;
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.0;
  Vec utility;
  Vec transition;

  DynamicGame() = default;
  DynamicGame(int players, int states, int actions, double gamma_,
              Vec utility_, Vec transition_);

  int joint_count() const { return n_joint_; }

  double u(int s, int A, int i) const {
    return utility[(static_cast<std::size_t>(s) * n_joint_ + A) * n_players + i];
  }
  double t(int s, int A, int s2) const {
    return transition[(static_cast<std::size_t>(s) * n_joint_ + A) * n_states + s2];
  }

  // Action of player i inside joint index A.
  int joint_digit(int A, int i) const { return (A / strides_[i]) % n_actions; }

  // Validates counts, gamma, tensor shapes, and row stochasticity
  // (tolerance 1e-12). Throws std::invalid_argument naming the offending
  // index on failure.
  void validate() const;

 private:
  int n_joint_ = 0;
  std::vector<int> strides_;
  void init_layout();
  friend DynamicGame load_game(const std::string&);
};

/**
 * Behavior policy: one probability row over actions per (state, player).
 * The solver keeps policies in logit form, probs = softmax(logits) per row,
 * which guarantees strict interiority; plain probability data (possibly on
 * the simplex boundary) is also valid.
 */
struct Policy {
  int n_states = 0;
  int n_players = 0;
  int n_actions = 0;
  Vec probs;                   // [state][player][action]
  std::optional<Vec> logits;   // same layout; present on solver-internal policies

  static Policy uniform(int states, int players, int actions);
  static Policy from_probs(int states, int players, int actions, Vec probs);
  static Policy from_logits(int states, int players, int actions, Vec logits);

  // Replaces the logits and recomputes probs row-wise.
  void set_logits(Vec new_logits);

  std::size_t idx(int s, int i, int a) const {
    return (static_cast<std::size_t>(s) * n_players + i) * n_actions + a;
  }
  double p(int s, int i, int a) const { return probs[idx(s, i, a)]; }

  // Row sums within 1e-12 of 1, entries >= 0 (> 0 when logits present).
  void validate() const;
};

struct ValueFunction {
  int n_states = 0;
  int n_players = 0;
  Vec values;  // [state][player]

  static ValueFunction zeros(int states, int players);
  // V[s][i] = per_player[i] for every state.
  static ValueFunction constant(int states, int players, const Vec& per_player);

  std::size_t idx(int s, int i) const {
    return static_cast<std::size_t>(s) * n_players + i;
  }
  double at(int s, int i) const { return values[idx(s, i)]; }
  double& at(int s, int i) { return values[idx(s, i)]; }
};

// Nonnegative barrier vector, one entry per (state, player, action).
struct BarrierParameter {
  int n_states = 0;
  int n_players = 0;
  int n_actions = 0;
  Vec mu;

  std::size_t idx(int s, int i, int a) const {
    return (static_cast<std::size_t>(s) * n_players + i) * n_actions + a;
  }
  double at(int s, int i, int a) const { return mu[idx(s, i, a)]; }
  double& at(int s, int i, int a) { return mu[idx(s, i, a)]; }
};

/**
 * Samples a game: utilities i.i.d. uniform on [0,1], each transition row
 * flat-Dirichlet. Deterministic given the seed.
 */
DynamicGame generate_random_game(int n_players, int n_states, int n_actions,
                                 double gamma, std::uint64_t seed);

// JSON game file round trip. load_game re-validates all invariants and
// reports malformed input with the offending index in the message.
DynamicGame load_game(const std::string& path);
void save_game(const DynamicGame& game, const std::string& path);

Policy load_policy(const std::string& path);
void save_policy(const Policy& policy, const std::string& path);

}  // namespace eqbundle
