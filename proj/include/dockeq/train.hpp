#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dockeq/potential.hpp"
#include "dockeq/structio.hpp"

namespace dockeq {

struct TrainOptions
{
  enum class Method { gd, adam };

  Method method = Method::adam;
  int steps = 400;
  double learning_rate = 0.01;  ///< adam step; for gd, 0 picks a safe step from the data
  std::size_t batch_size = 0;   ///< 0 = full batch
  double weight_decay = 0.0;
  double holdout_fraction = 0.25;
  std::uint64_t seed = 0;
};

struct TrainReport
{
  std::vector<double> loss_curve; ///< training loss before each step, plus the final value
  std::size_t train_pairs = 0;
  std::size_t heldout_pairs = 0;
  double train_accuracy = 0.0;
  double heldout_accuracy = 0.0;
  int step_halvings = 0;          ///< gd only
};

/// Ordered decoy pair within one decoy set: `high` has the larger true energy.
struct DecoyPair
{
  std::size_t set = 0;
  std::size_t high = 0;
  std::size_t low = 0;
};

/// All unordered decoy pairs of each set whose true energies differ by more
/// than `tie_tol`, ordered by true energy.
std::vector<DecoyPair> make_ranking_pairs(std::span<const DecoySet> sets, double tie_tol = 1e-6);

/// Fits the surrogate weights with the pairwise logistic ranking loss. Pairs
/// are formed within each decoy set; whole decoy sets are held out for the
/// accuracy estimate (or pairs, if there is a single set). Throws InputError
/// when there are fewer than 2 scored decoys or no pair with distinct energies.
SurrogatePotential train_surrogate(std::span<const DecoySet> sets, const SurrogatePotential& init,
                                   const TrainOptions& opt, TrainReport* report = nullptr);

/// Materialised state pairs, for ranking_loss and surrogate_vs_truth_report.
std::vector<StatePair> to_state_pairs(std::span<const DecoySet> sets, std::span<const DecoyPair> pairs);

/// Fraction of pairs where f(high) > f(low).
double pairwise_accuracy(const Potential& f, std::span<const StatePair> pairs);

} // namespace dockeq
