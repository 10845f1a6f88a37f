#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dockeq/assembly.hpp"
#include "dockeq/igso3.hpp"
#include "dockeq/potential.hpp"

namespace dockeq {

// Assembly JSON:
//   { "chains": [ { "id": str, "coords": [[x,y,z], ...], "restypes": [int, ...] } ],
//     "fixed": str | int }
// "restypes" defaults to the unknown class (20); "fixed" defaults to the
// largest chain. Loaded assemblies are shifted so the fixed chain centroid is
// the origin.

AssemblyState assembly_from_json(const nlohmann::json& j, const std::string& source = "<json>");
nlohmann::json assembly_to_json(const AssemblyState& s);
AssemblyState load_assembly_json(const std::filesystem::path& path);
void save_assembly_json(const AssemblyState& s, const std::filesystem::path& path);

/// Index in [0, 20] of a three-letter residue name; 20 for anything unknown.
int residue_type_index(std::string_view name);

/// C-alpha records of the first model of a fixed-column PDB file, one chain
/// per chain identifier. Alternate locations keep the highest occupancy.
AssemblyState parse_pdb_calpha(std::istream& in, const std::string& source = "<pdb>");
AssemblyState load_pdb_calpha(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

/// How decoy rotations are drawn: not at all, Haar-uniform, or IGSO(3)(rot_sigma).
enum class RotMode { none, uniform, igso3 };

struct DecoyOptions
{
  std::size_t count = 20;
  double tr_scale = 4.0; ///< std of each translation component, Angstrom
  RotMode rot_mode = RotMode::uniform;
  double rot_sigma = 0.5; ///< IGSO(3) sigma when rot_mode = igso3
  std::uint64_t seed = 0;
};

/// Random roto-translations of a base assembly, with optional energies.
struct DecoySet
{
  AssemblyState base;
  std::vector<JointAction> decoys;
  std::vector<std::optional<double>> energies;

  std::size_t size() const { return decoys.size(); }
  AssemblyState decoy_state(std::size_t j) const { return apply_joint(decoys.at(j), base); }
  bool scored() const;
};

/// Decoy j uses stream `Rng(seed).split(j)`, so decoys can be generated in
/// parallel and the result does not depend on the thread count. `table` is
/// required for RotMode::igso3.
DecoySet generate_decoys(const AssemblyState& base, const DecoyOptions& opt,
                         const igso3::Table* table = nullptr);

/// energies[j] = f(decoy_state(j)).
void score_decoys(DecoySet& ds, const Potential& f);

// Decoy JSON-lines: one decoy per line,
//   {"index": j, "actions": [{"chain": i, "q": [w,x,y,z], "R": [9 numbers, row-major],
//                             "t": [x,y,z]}, ...],
//    "energy": number | null}
// listing the mobile chains only. "R" is optional on input; when present it
// must agree with "q" and is taken as the exact rotation.

void write_decoys_jsonl(const DecoySet& ds, std::ostream& os);
DecoySet read_decoys_jsonl(std::istream& is, const AssemblyState& base, const std::string& source = "<jsonl>");
void save_decoys(const DecoySet& ds, const std::filesystem::path& path);
DecoySet load_decoys(const std::filesystem::path& path, const AssemblyState& base);

/// JSON of one chain action as written in decoy and trajectory files.
nlohmann::json action_to_json(std::size_t chain, const RigidAction& a);
RigidAction action_from_json(const nlohmann::json& j);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

} // namespace dockeq
