#pragma once

#include <cstdint>

#include "dockeq/assembly.hpp"
#include "dockeq/game.hpp"
#include "dockeq/potential.hpp"
#include "dockeq/rng.hpp"

namespace dockeq {

/// Compact self-avoiding C-alpha trace: consecutive residues 3.8 Angstrom
/// apart, non-neighbours at least `min_gap` apart, centred at the origin.
ChainStructure random_chain(std::size_t residues, Rng& rng, const std::string& id, double min_gap = 4.0);

struct SyntheticOptions
{
  std::size_t chains = 2;
  std::size_t residues_per_chain = 20;
  bool random_restypes = true;
  std::uint64_t seed = 0;
};

/// Random chains placed side by side around the first one, not minimised.
AssemblyState random_assembly(const SyntheticOptions& opt);

/// Random assembly relaxed into the lowest of several contact-potential
/// equilibria, so the result sits at a local minimum of `f`.
AssemblyState docked_assembly(const SyntheticOptions& opt, const Potential& f, int starts = 8);

} // namespace dockeq
