#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dockeq/assembly.hpp"
#include "dockeq/errors.hpp"
#include "dockeq/potential.hpp"
#include "dockeq/structio.hpp"

namespace dockeq {

enum class UpdateMode { simultaneous, round_robin };

struct GameConfig
{
  int steps = 60;
  double eta0 = 1.0;
  double eta_exponent = 0.5; ///< eta(t) = eta0 * t^-eta_exponent, t = 1, 2, ...
  GamePenaltyParams penalty;
  UpdateMode update_mode = UpdateMode::simultaneous;
  GradBackend grad_backend = GradBackend::analytic;
  double convergence_tol = 1e-4;
  bool backtracking = true;  ///< halve eta (max 10 times) until the objective does not increase
  std::uint64_t seed = 0;

  void validate() const;
  double eta(int round) const;
};

/// Cumulative actions relative to the initial state, one entry per round
/// (entry 0 is the identity), with (potential, penalty) after each round.
struct GameTrajectory
{
  AssemblyState init;
  std::vector<JointAction> actions;
  std::vector<std::pair<double, double>> energies;
  AssemblyState final_state;
  bool converged = false;
  int rounds_used = 0;

  AssemblyState state(std::size_t round) const { return apply_joint(actions.at(round), init); }
  double final_potential() const { return energies.back().first; }
  /// f + lambda * penalty at `round`.
  double objective(std::size_t round, double lambda) const
  {
    return energies.at(round).first + lambda * energies.at(round).second;
  }
};

/// Raised when a gradient turns non-finite; carries the state at that round.
class GameError : public NumericalError
{
public:
  GameError(const std::string& what, AssemblyState snapshot, int round)
      : NumericalError(what), snapshot_(std::move(snapshot)), round_(round)
  {
  }

  const AssemblyState& snapshot() const { return snapshot_; }
  int round() const { return round_; }

private:
  AssemblyState snapshot_;
  int round_;
};

/// Descent of every mobile chain on f + lambda * penalty. Simultaneous mode
/// computes all tangents at the current state and applies them together;
/// round-robin updates chains one by one in index order. Rotations are
/// exponential-map steps about the chain's current centroid. Stops early when
/// the largest tangent norm drops below convergence_tol.
GameTrajectory play_game(const AssemblyState& init, const Potential& f, const GameConfig& cfg);

/// Per-chain tangent of f + lambda * penalty (zero for the fixed chain).
JointTangent game_gradient(const AssemblyState& s, const Potential& f, const GameConfig& cfg);

struct InitNoise
{
  double tr_scale = 4.0;
  RotMode rot_mode = RotMode::uniform;
  double rot_sigma = 0.5;
};

struct GameFailure
{
  std::size_t game = 0;
  std::string message;
};

struct EquilibriumSet
{
  std::vector<GameTrajectory> games; ///< sorted by final potential, ascending
  std::vector<std::size_t> game_index; ///< original game number of games[k]
  std::vector<GameFailure> failures;
};

/// n_games independent games from randomised placements of `base` (decoy
/// machinery seeded with cfg.seed). Games run in parallel; a failing game is
/// recorded and the rest continue. `table` is needed for RotMode::igso3.
EquilibriumSet enumerate_equilibria(const AssemblyState& base, const Potential& f, const GameConfig& cfg,
                                    std::size_t n_games, const InitNoise& noise,
                                    const igso3::Table* table = nullptr);

struct Cluster
{
  AssemblyState representative;
  double energy = 0.0;
  std::vector<std::size_t> members;

  std::size_t count() const { return members.size(); }
};

inline constexpr double kInfiniteRadius = std::numeric_limits<double>::infinity();

/// Greedy clustering: states are visited in order of increasing energy and
/// join the first cluster whose representative is within `rmsd_radius`
/// (complex C-RMSD), otherwise they open a new cluster. Members index into
/// the input.
std::vector<Cluster> cluster_states(const std::vector<AssemblyState>& states, const std::vector<double>& energies,
                                    double rmsd_radius);

std::vector<Cluster> cluster_equilibria(const std::vector<GameTrajectory>& trajs, double rmsd_radius);

nlohmann::json clusters_to_json(const std::vector<Cluster>& clusters);

/// One JSON line per round: {"round", "actions": [{"chain","q","R","t"}], "potential", "penalty"}.
void write_trajectory_jsonl(const GameTrajectory& traj, std::ostream& os);

/// Smallest residue distance between two chains.
double chain_contact_distance(const AssemblyState& s, std::size_t a, std::size_t b);

} // namespace dockeq
