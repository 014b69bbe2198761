#include "eqbundle/game.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "eqbundle/rng.hpp"

namespace eqbundle {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

long long ipow(int base, int exp) {
  long long r = 1;
  for (int k = 0; k < exp; ++k) r *= base;
  return r;
}

}  // namespace

void DynamicGame::init_layout() {
  long long joint = ipow(n_actions, n_players);
  if (joint > (1LL << 30)) fail("joint action space too large");
  n_joint_ = static_cast<int>(joint);
  strides_.assign(n_players, 1);
  for (int i = n_players - 2; i >= 0; --i)
    strides_[i] = strides_[i + 1] * n_actions;
}

DynamicGame::DynamicGame(int players, int states, int actions, double gamma_,
                         Vec utility_, Vec transition_)
    : n_players(players),
      n_states(states),
      n_actions(actions),
      gamma(gamma_),
      utility(std::move(utility_)),
      transition(std::move(transition_)) {
  init_layout();
  validate();
}

void DynamicGame::validate() const {
  if (n_players < 1 || n_states < 1 || n_actions < 1)
    fail("player/state/action counts must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    std::ostringstream os;
    os << "gamma must be in [0,1), got " << gamma;
    fail(os.str());
  }
  const std::size_t ju = static_cast<std::size_t>(n_states) * n_joint_ * n_players;
  const std::size_t jt = static_cast<std::size_t>(n_states) * n_joint_ * n_states;
  if (utility.size() != ju) fail("utility tensor has wrong shape");
  if (transition.size() != jt) fail("transition tensor has wrong shape");
  for (double x : utility)
    if (!std::isfinite(x)) fail("utility tensor has non-finite entry");
  for (int s = 0; s < n_states; ++s) {
    for (int A = 0; A < n_joint_; ++A) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        double p = t(s, A, s2);
        if (!(p >= 0.0)) {
          std::ostringstream os;
          os << "transition[" << s << "][" << A << "][" << s2
             << "] is negative or non-finite: " << p;
          fail(os.str());
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "transition row [state=" << s << "][joint_action=" << A
           << "] sums to " << sum << ", expected 1 within 1e-12";
        fail(os.str());
      }
    }
  }
}

Policy Policy::uniform(int states, int players, int actions) {
  Policy p;
  p.n_states = states;
  p.n_players = players;
  p.n_actions = actions;
  p.probs.assign(static_cast<std::size_t>(states) * players * actions,
                 1.0 / actions);
  p.logits = Vec(p.probs.size(), 0.0);
  return p;
}

Policy Policy::from_probs(int states, int players, int actions, Vec probs) {
  Policy p;
  p.n_states = states;
  p.n_players = players;
  p.n_actions = actions;
  p.probs = std::move(probs);
  p.validate();
  return p;
}

Policy Policy::from_logits(int states, int players, int actions, Vec logits) {
  Policy p;
  p.n_states = states;
  p.n_players = players;
  p.n_actions = actions;
  p.probs.resize(static_cast<std::size_t>(states) * players * actions);
  p.set_logits(std::move(logits));
  return p;
}

void Policy::set_logits(Vec new_logits) {
  if (new_logits.size() != probs.size()) fail("logits tensor has wrong shape");
  logits = std::move(new_logits);
  const Vec& sig = *logits;
  for (int s = 0; s < n_states; ++s) {
    for (int i = 0; i < n_players; ++i) {
      const std::size_t base = idx(s, i, 0);
      double mx = sig[base];
      for (int a = 1; a < n_actions; ++a) mx = std::max(mx, sig[base + a]);
      double sum = 0.0;
      for (int a = 0; a < n_actions; ++a) {
        probs[base + a] = std::exp(sig[base + a] - mx);
        sum += probs[base + a];
      }
      for (int a = 0; a < n_actions; ++a) probs[base + a] /= sum;
    }
  }
}

void Policy::validate() const {
  const std::size_t want =
      static_cast<std::size_t>(n_states) * n_players * n_actions;
  if (probs.size() != want) fail("policy probs tensor has wrong shape");
  for (int s = 0; s < n_states; ++s) {
    for (int i = 0; i < n_players; ++i) {
      double sum = 0.0;
      for (int a = 0; a < n_actions; ++a) {
        double x = p(s, i, a);
        if (!(x >= 0.0)) {
          std::ostringstream os;
          os << "probs[" << s << "][" << i << "][" << a
             << "] is negative or non-finite: " << x;
          fail(os.str());
        }
        if (logits && x <= 0.0) fail("logits-backed policy must be interior");
        sum += x;
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "policy row [state=" << s << "][player=" << i << "] sums to "
           << sum << ", expected 1 within 1e-12";
        fail(os.str());
      }
    }
  }
}

ValueFunction ValueFunction::zeros(int states, int players) {
  ValueFunction v;
  v.n_states = states;
  v.n_players = players;
  v.values.assign(static_cast<std::size_t>(states) * players, 0.0);
  return v;
}

ValueFunction ValueFunction::constant(int states, int players,
                                      const Vec& per_player) {
  ValueFunction v = zeros(states, players);
  for (int s = 0; s < states; ++s)
    for (int i = 0; i < players; ++i) v.at(s, i) = per_player[i];
  return v;
}

DynamicGame generate_random_game(int n_players, int n_states, int n_actions,
                                 double gamma, std::uint64_t seed) {
  if (n_players < 1 || n_states < 1 || n_actions < 1)
    fail("player/state/action counts must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    std::ostringstream os;
    os << "gamma must be in [0,1), got " << gamma;
    fail(os.str());
  }
  Rng rng(seed);
  const long long joint = ipow(n_actions, n_players);
  Vec utility(static_cast<std::size_t>(n_states) * joint * n_players);
  for (auto& x : utility) x = rng.uniform01();
  Vec transition;
  transition.reserve(static_cast<std::size_t>(n_states) * joint * n_states);
  for (long long row = 0; row < static_cast<long long>(n_states) * joint; ++row) {
    Vec d = rng.dirichlet_flat(n_states);
    transition.insert(transition.end(), d.begin(), d.end());
  }
  return DynamicGame(n_players, n_states, n_actions, gamma, std::move(utility),
                     std::move(transition));
}

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

DynamicGame load_game(const std::string& path) {
  json j = read_json_file(path);
  DynamicGame g;
  try {
    g.n_players = j.at("players").get<int>();
    g.n_states = j.at("states").get<int>();
    g.n_actions = j.at("actions").get<int>();
    g.gamma = j.at("gamma").get<double>();
  } catch (const json::exception& e) {
    throw std::runtime_error("bad game header in " + path + ": " + e.what());
  }
  if (g.n_players < 1 || g.n_states < 1 || g.n_actions < 1)
    throw std::invalid_argument("player/state/action counts must be positive");
  g.init_layout();
  const int J = g.joint_count();
  auto expect_array = [&](const json& node, std::size_t n, const char* what,
                          int s, int A) {
    if (!node.is_array() || node.size() != n) {
      std::ostringstream os;
      os << "bad " << what << " shape at [state=" << s
         << "][joint_action=" << A << "] in " << path;
      throw std::runtime_error(os.str());
    }
  };
  const json& ju = j.at("utility");
  const json& jt = j.at("transition");
  if (!ju.is_array() || static_cast<int>(ju.size()) != g.n_states)
    throw std::runtime_error("utility must have one entry per state");
  if (!jt.is_array() || static_cast<int>(jt.size()) != g.n_states)
    throw std::runtime_error("transition must have one entry per state");
  g.utility.reserve(static_cast<std::size_t>(g.n_states) * J * g.n_players);
  g.transition.reserve(static_cast<std::size_t>(g.n_states) * J * g.n_states);
  for (int s = 0; s < g.n_states; ++s) {
    expect_array(ju[s], J, "utility", s, -1);
    expect_array(jt[s], J, "transition", s, -1);
    for (int A = 0; A < J; ++A) {
      expect_array(ju[s][A], g.n_players, "utility row", s, A);
      expect_array(jt[s][A], g.n_states, "transition row", s, A);
      for (int i = 0; i < g.n_players; ++i)
        g.utility.push_back(ju[s][A][i].get<double>());
      for (int s2 = 0; s2 < g.n_states; ++s2)
        g.transition.push_back(jt[s][A][s2].get<double>());
    }
  }
  g.validate();
  return g;
}

void save_game(const DynamicGame& game, const std::string& path) {
  json ju = json::array();
  json jt = json::array();
  for (int s = 0; s < game.n_states; ++s) {
    json su = json::array(), st = json::array();
    for (int A = 0; A < game.joint_count(); ++A) {
      json ru = json::array(), rt = json::array();
      for (int i = 0; i < game.n_players; ++i) ru.push_back(game.u(s, A, i));
      for (int s2 = 0; s2 < game.n_states; ++s2) rt.push_back(game.t(s, A, s2));
      su.push_back(std::move(ru));
      st.push_back(std::move(rt));
    }
    ju.push_back(std::move(su));
    jt.push_back(std::move(st));
  }
  json j{{"players", game.n_players},
         {"states", game.n_states},
         {"actions", game.n_actions},
         {"gamma", game.gamma},
         {"utility", std::move(ju)},
         {"transition", std::move(jt)}};
  write_json_file(j, path);
}

Policy load_policy(const std::string& path) {
  json j = read_json_file(path);
  const json& jp = j.at("probs");
  if (!jp.is_array() || jp.empty() || !jp[0].is_array() || jp[0].empty() ||
      !jp[0][0].is_array())
    throw std::runtime_error("policy probs must be a [states][players][actions] array");
  const int S = static_cast<int>(jp.size());
  const int N = static_cast<int>(jp[0].size());
  const int A = static_cast<int>(jp[0][0].size());
  Vec probs;
  probs.reserve(static_cast<std::size_t>(S) * N * A);
  for (int s = 0; s < S; ++s) {
    if (static_cast<int>(jp[s].size()) != N)
      throw std::runtime_error("ragged policy probs at state " + std::to_string(s));
    for (int i = 0; i < N; ++i) {
      if (static_cast<int>(jp[s][i].size()) != A)
        throw std::runtime_error("ragged policy probs at state " +
                                 std::to_string(s) + ", player " +
                                 std::to_string(i));
      for (int a = 0; a < A; ++a) probs.push_back(jp[s][i][a].get<double>());
    }
  }
  return Policy::from_probs(S, N, A, std::move(probs));
}

void save_policy(const Policy& policy, const std::string& path) {
  json jp = json::array();
  for (int s = 0; s < policy.n_states; ++s) {
    json sp = json::array();
    for (int i = 0; i < policy.n_players; ++i) {
      json row = json::array();
      for (int a = 0; a < policy.n_actions; ++a) row.push_back(policy.p(s, i, a));
      sp.push_back(std::move(row));
    }
    jp.push_back(std::move(sp));
  }
  write_json_file(json{{"probs", std::move(jp)}}, path);
}

}  // namespace eqbundle
