#include "dockeq/game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "dockeq/kernels.hpp"

namespace dockeq {

using nlohmann::json;

void GameConfig::validate() const
{
  if (steps < 1)
    throw InputError("game: steps must be >= 1");
  if (!(eta0 > 0.0))
    throw InputError("game: eta0 must be positive");
  if (!(eta_exponent >= 0.0))
    throw InputError("game: eta_exponent must be >= 0");
  if (!(convergence_tol >= 0.0))
    throw InputError("game: convergence_tol must be >= 0");
  penalty.validate();
}

double GameConfig::eta(int round) const
{
  return eta0 * std::pow(static_cast<double>(std::max(round, 1)), -eta_exponent);
}

namespace {

constexpr int kMaxHalvings = 10;

TangentVector chain_gradient(const AssemblyState& s, std::size_t chain, const Potential& f, const GameConfig& cfg)
{
  TangentVector g = riemannian_grad(f, s, chain, cfg.grad_backend);
  if (cfg.penalty.lambda > 0.0) {
    const TangentVector p = penalty_grad(s, chain, cfg.penalty);
    g.omega += cfg.penalty.lambda * p.omega;
    g.vel += cfg.penalty.lambda * p.vel;
  }
  return g;
}

RigidAction step_action(const TangentVector& g, double eta)
{
  return {axis_angle_to_matrix(-eta * g.omega), {-eta * g.vel}};
}

struct Objective
{
  double potential;
  double penalty;
  double total;
};

Objective objective(const AssemblyState& s, const Potential& f, const GameConfig& cfg)
{
  const double e = f.evaluate(s);
  const double p = distance_penalty(s, cfg.penalty);
  return {e, p, e + cfg.penalty.lambda * p};
}

[[noreturn]] void fail_nonfinite(const AssemblyState& s, int round, std::size_t chain)
{
  throw GameError("game: non-finite gradient for chain " + std::to_string(chain) + " ('" + s.chains[chain].id +
                      "') at round " + std::to_string(round),
                  s, round);
}

} // namespace

JointTangent game_gradient(const AssemblyState& s, const Potential& f, const GameConfig& cfg)
{
  JointTangent g = JointTangent::zero(s.num_chains());
  for (std::size_t i = 0; i < s.num_chains(); ++i)
    if (i != s.fixed_index)
      g.v[i] = chain_gradient(s, i, f, cfg);
  return g;
}

GameTrajectory play_game(const AssemblyState& init, const Potential& f, const GameConfig& cfg)
{
  cfg.validate();
  init.validate();
  const std::size_t n = init.num_chains();

  GameTrajectory traj;
  traj.init = init;
  traj.actions.push_back(JointAction::identity(n));
  AssemblyState cur = init;
  Objective obj = objective(cur, f, cfg);
  if (!std::isfinite(obj.total))
    throw GameError("game: non-finite objective at the initial state", cur, 0);
  traj.energies.emplace_back(obj.potential, obj.penalty);
  JointAction total = JointAction::identity(n);

  for (int round = 1; round <= cfg.steps; ++round) {
    const double eta = cfg.eta(round);
    double max_norm = 0.0;

    if (cfg.update_mode == UpdateMode::simultaneous) {
      const JointTangent g = game_gradient(cur, f, cfg);
      for (std::size_t i = 0; i < n; ++i) {
        if (!g.v[i].finite())
          fail_nonfinite(cur, round, i);
        max_norm = std::max(max_norm, g.v[i].norm());
      }
      if (max_norm < cfg.convergence_tol) {
        traj.converged = true;
      } else {
        double step = eta;
        for (int h = 0; h <= kMaxHalvings; ++h) {
          JointAction a = JointAction::identity(n);
          for (std::size_t i = 0; i < n; ++i)
            if (i != cur.fixed_index)
              a.actions[i] = step_action(g.v[i], step);
          AssemblyState trial = apply_joint(a, cur);
          const Objective to = objective(trial, f, cfg);
          if (!cfg.backtracking || to.total <= obj.total) {
            for (std::size_t i = 0; i < n; ++i)
              total.actions[i] = compose(a.actions[i], total.actions[i]);
            cur = std::move(trial);
            obj = to;
            break;
          }
          step *= 0.5;
        }
      }
    } else {
      // the convergence test uses the tangents at the start of the round
      bool first = true;
      for (std::size_t i = 0; i < n; ++i) {
        if (i == cur.fixed_index)
          continue;
        const TangentVector g = chain_gradient(cur, i, f, cfg);
        if (!g.finite())
          fail_nonfinite(cur, round, i);
        if (first) {
          max_norm = game_gradient(cur, f, cfg).max_norm();
          first = false;
          if (max_norm < cfg.convergence_tol) {
            traj.converged = true;
            break;
          }
        }
        double step = eta;
        for (int h = 0; h <= kMaxHalvings; ++h) {
          const RigidAction a = step_action(g, step);
          AssemblyState trial = cur;
          trial.chains[i].coords = apply_action(a, cur.chains[i].coords);
          const Objective to = objective(trial, f, cfg);
          if (!cfg.backtracking || to.total <= obj.total) {
            total.actions[i] = compose(a, total.actions[i]);
            cur = std::move(trial);
            obj = to;
            break;
          }
          step *= 0.5;
        }
      }
    }

    if (!std::isfinite(obj.total))
      throw GameError("game: non-finite objective at round " + std::to_string(round), cur, round);
    traj.actions.push_back(total);
    traj.energies.emplace_back(obj.potential, obj.penalty);
    traj.rounds_used = round;
    if (traj.converged)
      break;
  }
  // the fixed chain is carried over untouched rather than recomputed
  traj.final_state = cur;
  return traj;
}

EquilibriumSet enumerate_equilibria(const AssemblyState& base, const Potential& f, const GameConfig& cfg,
                                    std::size_t n_games, const InitNoise& noise, const igso3::Table* table)
{
  cfg.validate();
  if (n_games < 1)
    throw InputError("enumerate_equilibria: n_games must be >= 1");
  DecoyOptions opt;
  opt.count = n_games;
  opt.tr_scale = noise.tr_scale;
  opt.rot_mode = noise.rot_mode;
  opt.rot_sigma = noise.rot_sigma;
  opt.seed = cfg.seed;
  const DecoySet starts = generate_decoys(base, opt, table);

  std::vector<std::optional<GameTrajectory>> results(n_games);
  std::vector<std::string> errors(n_games);
  const auto ng = static_cast<std::ptrdiff_t>(n_games);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t g = 0; g < ng; ++g) {
    const auto k = static_cast<std::size_t>(g);
    try {
      results[k] = play_game(starts.decoy_state(k), f, cfg);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }

  EquilibriumSet out;
  std::vector<std::size_t> ok;
  for (std::size_t k = 0; k < n_games; ++k) {
    if (results[k])
      ok.push_back(k);
    else
      out.failures.push_back({k, errors[k]});
  }
  std::stable_sort(ok.begin(), ok.end(), [&](std::size_t a, std::size_t b) {
    return results[a]->final_potential() < results[b]->final_potential();
  });
  for (auto k : ok) {
    out.games.push_back(std::move(*results[k]));
    out.game_index.push_back(k);
  }
  return out;
}

std::vector<Cluster> cluster_states(const std::vector<AssemblyState>& states, const std::vector<double>& energies,
                                    double rmsd_radius)
{
  if (states.empty())
    throw InputError("cluster: need at least one state");
  if (energies.size() != states.size())
    throw InputError("cluster: energies and states differ in length");
  if (!(rmsd_radius >= 0.0))
    throw InputError("cluster: radius must be >= 0");
  std::vector<std::size_t> order(states.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return energies[a] < energies[b]; });

  std::vector<Cluster> clusters;
  for (auto k : order) {
    bool placed = false;
    for (auto& c : clusters) {
      if (std::isinf(rmsd_radius) || complex_rmsd(states[k], c.representative) <= rmsd_radius) {
        c.members.push_back(k);
        placed = true;
        break;
      }
    }
    if (!placed)
      clusters.push_back({states[k], energies[k], {k}});
  }
  return clusters;
}

std::vector<Cluster> cluster_equilibria(const std::vector<GameTrajectory>& trajs, double rmsd_radius)
{
  std::vector<AssemblyState> states;
  std::vector<double> energies;
  for (const auto& t : trajs) {
    states.push_back(t.final_state);
    energies.push_back(t.final_potential());
  }
  return cluster_states(states, energies, rmsd_radius);
}

json clusters_to_json(const std::vector<Cluster>& clusters)
{
  json out = json::array();
  for (const auto& c : clusters)
    out.push_back({{"count", c.count()},
                   {"energy", c.energy},
                   {"members", c.members},
                   {"representative", assembly_to_json(c.representative)}});
  return out;
}

void write_trajectory_jsonl(const GameTrajectory& traj, std::ostream& os)
{
  for (std::size_t r = 0; r < traj.actions.size(); ++r) {
    json line;
    line["round"] = r;
    json acts = json::array();
    for (std::size_t i = 0; i < traj.actions[r].size(); ++i)
      if (i != traj.init.fixed_index)
        acts.push_back(action_to_json(i, traj.actions[r].actions[i]));
    line["actions"] = std::move(acts);
    line["potential"] = traj.energies[r].first;
    line["penalty"] = traj.energies[r].second;
    os << line.dump() << '\n';
  }
}

double chain_contact_distance(const AssemblyState& s, std::size_t a, std::size_t b)
{
  return kernels::omp::min_distance(s.chains.at(a).coords, s.chains.at(b).coords).dist;
}

} // namespace dockeq
