#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dockeq/game.hpp"
#include "dockeq/potential.hpp"
#include "dockeq/sampler.hpp"
#include "dockeq/schedule.hpp"
#include "dockeq/structio.hpp"
#include "dockeq/train.hpp"

namespace dockeq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitPartial = 4;

enum class PotentialKind { contact, surrogate };

struct SurrogateArch
{
  std::size_t bins = 32;
  double max_distance = 40.0;
  bool restype_channels = false;
};

struct DecoySource
{
  std::filesystem::path assembly;
  std::filesystem::path decoys;
};

struct Igso3Settings
{
  int rows = 64;
  int resolution = igso3::kDefaultOmegaResolution;
  int l_max = igso3::kDefaultLMax;
  std::optional<std::filesystem::path> cache;
};

/// Everything a subcommand needs, parsed from a "v1" JSON config plus flags.
/// Relative paths in the config are resolved against the config's directory.
struct RunConfig
{
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "out";
  int jobs = 0; ///< 0 = all logical cores

  std::vector<std::filesystem::path> assemblies;

  PotentialKind potential = PotentialKind::contact;
  ContactParams contact;
  std::optional<std::filesystem::path> surrogate_path;

  NoiseSchedule schedule;
  Igso3Settings igso3;

  DecoyOptions decoys;

  TrainOptions train;
  SurrogateArch arch;
  std::vector<DecoySource> train_sets;
  std::optional<std::filesystem::path> train_manifest;

  GameConfig game;
  std::size_t n_games = 20;
  InitNoise init_noise;
  double cluster_radius = 2.0;

  SamplerConfig sampler;
  std::vector<std::filesystem::path> oracle_modes;
  std::vector<double> oracle_weights;
  double gibbs_temperature = 1.0;

  std::vector<std::filesystem::path> metrics_pred;
  std::optional<std::filesystem::path> metrics_truth;
};

/// Parses a v1 config object. Unknown keys and type mismatches are InputErrors.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

/// The shipped defaults as a v1 config object (seed left at 0).
nlohmann::json default_config();

// Each command validates its inputs before writing anything and returns an exit code.
int cmd_decoys(const RunConfig& cfg);
int cmd_train_potential(const RunConfig& cfg);
int cmd_equilibrate(const RunConfig& cfg);
int cmd_sample(const RunConfig& cfg);
int cmd_score(const RunConfig& cfg);
int cmd_metrics(const RunConfig& cfg);

/// Entry point of the dockeq tool.
int run(int argc, char** argv);

} // namespace dockeq::cli
