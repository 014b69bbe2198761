// Command-line surface for the equilibrium solver: generate | solve | verify
// | scan | batch. All data files are JSON; traces are JSON lines. Exit codes:
// 0 success, 1 non-converged / failed verification, 2 usage or file errors.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eqbundle/game.hpp"
#include "eqbundle/solver.hpp"

using nlohmann::json;
using namespace eqbundle;

namespace {

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("BUNDLE_SOLVE_LOG");
  if (!env) return LogLevel::info;
  const std::string v(env);
  if (v == "error") return LogLevel::error;
  if (v == "debug") return LogLevel::debug;
  return LogLevel::info;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) std::cerr << msg << '\n';
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) std::cerr << msg << '\n';
}

json policy_to_json(const Policy& p) {
  json jp = json::array();
  for (int s = 0; s < p.n_states; ++s) {
    json sp = json::array();
    for (int i = 0; i < p.n_players; ++i) {
      json row = json::array();
      for (int a = 0; a < p.n_actions; ++a) row.push_back(p.p(s, i, a));
      sp.push_back(std::move(row));
    }
    jp.push_back(std::move(sp));
  }
  return jp;
}

json values_to_json(const ValueFunction& v) {
  json jv = json::array();
  for (int s = 0; s < v.n_states; ++s) {
    json row = json::array();
    for (int i = 0; i < v.n_players; ++i) row.push_back(v.at(s, i));
    jv.push_back(std::move(row));
  }
  return jv;
}

void write_result(const SolveResult& res, const std::string& path) {
  json j{{"status", to_string(res.status)},
         {"eps_achieved", res.eps_achieved},
         {"probs", policy_to_json(res.policy)},
         {"values", values_to_json(res.value)},
         {"inner_steps_total", res.inner_steps_total},
         {"outer_steps_total", res.outer_steps_total}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write result file: " + path);
  out << j.dump(2) << '\n';
}

void write_trace(const std::vector<TraceRecord>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  for (const TraceRecord& r : trace) {
    json j{{"outer_index", r.outer_index}, {"inner_index", r.inner_index},
           {"bias_norm", r.bias_norm},     {"objective", r.objective},
           {"angle", r.angle},             {"canosec_norm", r.canosec_norm},
           {"mu_norm", r.mu_norm}};
    out << j.dump() << '\n';
  }
}

struct GameShapeFlags {
  int players = 2;
  int states = 1;
  int actions = 2;
  double gamma = 0.0;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--players", players, "number of players");
    cmd->add_option("--states", states, "number of states");
    cmd->add_option("--actions", actions, "actions per player");
    cmd->add_option("--gamma", gamma, "discount factor in [0,1)");
    cmd->add_option("--seed", seed, "generator seed");
  }

  bool check() const {
    if (players < 1 || states < 1 || actions < 1) {
      std::cerr << "players/states/actions must be >= 1\n";
      return false;
    }
    if (!(gamma >= 0.0 && gamma < 1.0)) {
      std::cerr << "gamma must be in [0,1), got " << gamma << '\n';
      return false;
    }
    return true;
  }
};

struct SolveFlags {
  SolveConfig cfg;
  std::optional<Policy> start;

  void attach(CLI::App* cmd) {
    cmd->add_option("--eps,--outer-tol-eps", cfg.outer_tol_eps,
                    "target canonical-section norm");
    cmd->add_option("--eta", cfg.eta, "barrier decrement per outer step");
    cmd->add_option("--step,--step-size", cfg.step_size, "logit gradient step");
    cmd->add_option("--mu-prime-factor", cfg.mu_prime_factor,
                    "initial barrier scale factor");
    cmd->add_option("--m-factor", cfg.m_factor, "DP shift scale factor");
    cmd->add_option("--inner-tol-bias", cfg.inner_tol_bias,
                    "primal-dual bias tolerance");
    cmd->add_option("--inner-tol-angle", cfg.inner_tol_angle,
                    "residual angle tolerance (radians)");
    cmd->add_option("--singular-rcond", cfg.singular_rcond,
                    "reciprocal condition number flagged singular");
    cmd->add_option("--max-inner", cfg.max_inner, "inner step cap per run");
    cmd->add_option("--max-outer", cfg.max_outer, "outer step cap");
    cmd->add_option("--seed", cfg.seed, "solver seed");
  }
};

int run_solve_command(const std::string& game_path, const SolveFlags& flags,
                      const std::string& out_path, const std::string& trace_path,
                      const std::string& policy_out, const std::string& start_path) {
  const DynamicGame game = load_game(game_path);
  std::optional<Policy> start;
  if (!start_path.empty()) start = load_policy(start_path);
  const auto t0 = std::chrono::steady_clock::now();
  auto [res, trace] = solve(game, flags.cfg, start);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!out_path.empty()) write_result(res, out_path);
  if (!trace_path.empty()) write_trace(trace, trace_path);
  if (!policy_out.empty()) save_policy(res.policy, policy_out);

  log_info("solve " + game_path + ": " + to_string(res.status) +
           ", eps_achieved=" + std::to_string(res.eps_achieved) + ", inner_steps=" +
           std::to_string(res.inner_steps_total) + ", outer_steps=" +
           std::to_string(res.outer_steps_total) + ", " + std::to_string(secs) + " s");
  std::cout << to_string(res.status) << " eps_achieved=" << res.eps_achieved
            << '\n';
  return res.status == SolveStatus::converged ? 0 : 1;
}

int run_verify_command(const std::string& game_path, const std::string& policy_path,
                       double eps) {
  const DynamicGame game = load_game(game_path);
  const Policy policy = load_policy(policy_path);
  if (policy.n_states != game.n_states || policy.n_players != game.n_players ||
      policy.n_actions != game.n_actions) {
    std::cerr << "policy shape does not match game\n";
    return 2;
  }
  auto [ok, mubar] = verify_epsilon_equilibrium(game, policy, eps);
  double worst = 0.0;
  int ws = 0, wi = 0, wa = 0;
  for (int s = 0; s < mubar.n_states; ++s)
    for (int i = 0; i < mubar.n_players; ++i)
      for (int a = 0; a < mubar.n_actions; ++a)
        if (mubar.at(s, i, a) > worst) {
          worst = mubar.at(s, i, a);
          ws = s;
          wi = i;
          wa = a;
        }
  std::cout << (ok ? "epsilon-perfect" : "not epsilon-perfect") << " at eps=" << eps
            << "; max violation " << worst << " at state " << ws << " player " << wi
            << " action " << wa << '\n';
  return ok ? 0 : 1;
}

int run_scan_command(const std::string& game_path, int samples,
                     std::uint64_t seed, int top) {
  const DynamicGame game = load_game(game_path);
  auto ranked = scan_policy_space(game, samples, seed);
  const int show = std::min<int>(top, static_cast<int>(ranked.size()));
  for (int k = 0; k < show; ++k) {
    json row{{"rank", k},
             {"canosec_norm", ranked[k].second},
             {"probs", policy_to_json(ranked[k].first)}};
    std::cout << row.dump() << '\n';
  }
  return 0;
}

int run_batch_command(GameShapeFlags shape, int count, double eps,
                      std::uint64_t base_seed, int jobs,
                      const std::string& out_path) {
  struct GameRecord {
    std::uint64_t seed = 0;
    SolveStatus status = SolveStatus::max_iterations;
    long outer_steps = 0;
    long inner_steps = 0;
    double eps_achieved = 0;
    double wall_seconds = 0;
  };
  std::vector<GameRecord> records(count);
  std::atomic<int> next{0};

  auto worker = [&]() {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= count) return;
      GameRecord& rec = records[k];
      // documented derivation: per-game seed = base ^ (index * 0x9E3779B9)
      rec.seed = base_seed ^ (static_cast<std::uint64_t>(k) * 0x9E3779B9ULL);
      const DynamicGame game = generate_random_game(
          shape.players, shape.states, shape.actions, shape.gamma, rec.seed);
      SolveConfig cfg;
      cfg.outer_tol_eps = eps;
      cfg.seed = rec.seed;
      const auto t0 = std::chrono::steady_clock::now();
      auto [res, trace] = solve(game, cfg);
      rec.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rec.status = res.status;
      rec.outer_steps = res.outer_steps_total;
      rec.inner_steps = res.inner_steps_total;
      rec.eps_achieved = res.eps_achieved;
      log_debug("batch game " + std::to_string(k) + ": " + to_string(res.status));
    }
  };

  const int n_threads = std::max(1, std::min(jobs, count > 0 ? count : 1));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int n_converged = 0;
  json games = json::array();
  for (const GameRecord& rec : records) {
    if (rec.status == SolveStatus::converged) ++n_converged;
    games.push_back(json{{"seed", rec.seed},
                         {"status", to_string(rec.status)},
                         {"outer_steps", rec.outer_steps},
                         {"inner_steps", rec.inner_steps},
                         {"eps_achieved", rec.eps_achieved},
                         {"wall_seconds", rec.wall_seconds}});
  }
  json summary{{"n_games", count},
               {"n_converged", n_converged},
               {"eps", eps},
               {"games", std::move(games)}};
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write summary file: " + out_path);
    out << summary.dump(2) << '\n';
  }
  std::cout << "converged " << n_converged << "/" << count << '\n';
  return n_converged == count ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"epsilon-perfect equilibrium solver for finite dynamic games"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write a random game file");
  GameShapeFlags gen_shape;
  gen_shape.attach(gen);
  std::string gen_out = "game.json";
  gen->add_option("-o,--out", gen_out, "output path");

  // solve
  auto* slv = app.add_subcommand("solve", "run the line search on one game");
  std::string slv_game, slv_out = "result.json", slv_trace, slv_policy, slv_start;
  slv->add_option("--game", slv_game, "game file")->required();
  SolveFlags slv_flags;
  slv_flags.attach(slv);
  slv->add_option("-o,--out", slv_out, "result JSON path");
  slv->add_option("--trace", slv_trace, "JSONL trace path");
  slv->add_option("--policy-out", slv_policy, "write the final policy");
  slv->add_option("--start", slv_start, "starting policy file");

  // verify
  auto* ver = app.add_subcommand("verify", "check a policy for eps-perfection");
  std::string ver_game, ver_policy;
  double ver_eps = 1e-4;
  ver->add_option("--game", ver_game, "game file")->required();
  ver->add_option("--policy", ver_policy, "policy file")->required();
  ver->add_option("--eps", ver_eps, "tolerance");

  // scan
  auto* scn = app.add_subcommand("scan", "rank sampled policies by section norm");
  std::string scn_game;
  int scn_samples = 1000, scn_top = 10;
  std::uint64_t scn_seed = 0;
  scn->add_option("--game", scn_game, "game file")->required();
  scn->add_option("--samples", scn_samples, "number of sampled policies");
  scn->add_option("--seed", scn_seed, "sampling seed");
  scn->add_option("--top", scn_top, "entries to print");

  // batch
  auto* bat = app.add_subcommand("batch", "generate and solve many games");
  GameShapeFlags bat_shape;
  bat_shape.attach(bat);
  int bat_count = 10, bat_jobs = 1;
  double bat_eps = 1e-3;
  std::string bat_out = "summary.json";
  bat->add_option("--count", bat_count, "number of games");
  bat->add_option("--eps", bat_eps, "target tolerance");
  bat->add_option("--jobs", bat_jobs, "concurrent solves");
  bat->add_option("-o,--out", bat_out, "summary JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) {
      if (!gen_shape.check()) return 2;
      const DynamicGame game =
          generate_random_game(gen_shape.players, gen_shape.states,
                               gen_shape.actions, gen_shape.gamma, gen_shape.seed);
      save_game(game, gen_out);
      std::cout << gen_out << " players=" << game.n_players
                << " states=" << game.n_states << " actions=" << game.n_actions
                << " gamma=" << game.gamma << '\n';
      return 0;
    }
    if (slv->parsed())
      return run_solve_command(slv_game, slv_flags, slv_out, slv_trace, slv_policy,
                               slv_start);
    if (ver->parsed()) return run_verify_command(ver_game, ver_policy, ver_eps);
    if (scn->parsed())
      return run_scan_command(scn_game, scn_samples, scn_seed, scn_top);
    if (bat->parsed()) {
      if (!bat_shape.check()) return 2;
      if (bat_count < 0) {
        std::cerr << "count must be >= 0\n";
        return 2;
      }
      return run_batch_command(bat_shape, bat_count, bat_eps, bat_shape.seed,
                               bat_jobs, bat_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
