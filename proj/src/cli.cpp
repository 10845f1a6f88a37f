#include "dockeq/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <omp.h>

#include "CLI11.hpp"

#include "dockeq/errors.hpp"

namespace dockeq::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Strict reader for one config object: typed lookups with defaults, and an
/// error for any key that was never looked up.
class Section
{
public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path))
  {
    if (!j_.is_object())
      throw InputError("config: '" + path_ + "' must be an object");
  }

  ~Section() = default;

  bool has(const std::string& key)
  {
    used_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  T get(const std::string& key, T fallback)
  {
    if (!has(key))
      return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw InputError("config: '" + path_ + "." + key + "' has the wrong type");
    }
  }

  Section sub(const std::string& key)
  {
    used_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, path_ + "." + key);
  }

  const json& raw(const std::string& key)
  {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const
  {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k))
        throw InputError("config: unknown key '" + path_ + "." + k + "'");
  }

private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

fs::path resolve(const fs::path& base, const std::string& p)
{
  const fs::path q(p);
  return q.is_absolute() ? q : base / q;
}

std::vector<fs::path> path_list(Section& s, const std::string& key, const fs::path& base)
{
  std::vector<fs::path> out;
  for (const auto& p : s.get<std::vector<std::string>>(key, {}))
    out.push_back(resolve(base, p));
  return out;
}

RotMode parse_rot_mode(const std::string& s)
{
  if (s == "none")
    return RotMode::none;
  if (s == "uniform")
    return RotMode::uniform;
  if (s == "igso3")
    return RotMode::igso3;
  throw InputError("config: rot_mode must be none, uniform or igso3, got '" + s + "'");
}

std::string rot_mode_name(RotMode m)
{
  return m == RotMode::none ? "none" : m == RotMode::uniform ? "uniform" : "igso3";
}

void require_file(const fs::path& p, const std::string& what)
{
  if (!fs::is_regular_file(p))
    throw InputError(what + " not found: " + p.string());
}

AssemblyState load_assembly(const fs::path& p)
{
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pdb" || ext == ".ent")
    return load_pdb_calpha(p);
  return load_assembly_json(p);
}

std::unique_ptr<Potential> make_potential(const RunConfig& cfg)
{
  if (cfg.potential == PotentialKind::surrogate)
    return std::make_unique<SurrogatePotential>(SurrogatePotential::load(*cfg.surrogate_path));
  return std::make_unique<ContactPotential>(cfg.contact);
}

igso3::Table make_table(const RunConfig& cfg)
{
  auto grid = cfg.schedule.rot_sigma_grid(cfg.igso3.rows);
  if (cfg.igso3.cache)
    return igso3::Table::load_or_build(*cfg.igso3.cache, std::move(grid), cfg.igso3.resolution, cfg.igso3.l_max);
  return igso3::Table::build(std::move(grid), cfg.igso3.resolution, cfg.igso3.l_max);
}

void apply_jobs(const RunConfig& cfg)
{
  if (cfg.jobs > 0)
    omp_set_num_threads(cfg.jobs);
}

void require_seed(const RunConfig& cfg)
{
  if (!cfg.seed)
    throw InputError("a seed is required (config \"seed\", --seed or DOCKEQ_SEED)");
}

void require_potential(const RunConfig& cfg)
{
  cfg.contact.validate();
  if (cfg.potential == PotentialKind::surrogate) {
    if (!cfg.surrogate_path)
      throw InputError("config: potential.kind = surrogate needs potential.surrogate");
    require_file(*cfg.surrogate_path, "surrogate model");
  }
}

std::vector<AssemblyState> load_inputs(const RunConfig& cfg)
{
  if (cfg.assemblies.empty())
    throw InputError("config: input.assemblies is empty");
  std::vector<AssemblyState> out;
  for (const auto& p : cfg.assemblies) {
    require_file(p, "assembly");
    out.push_back(load_assembly(p));
  }
  return out;
}

std::string padded(std::size_t k)
{
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", k);
  return buf;
}

void write_json(const fs::path& p, const json& j)
{
  write_file_atomic(p, j.dump(2) + "\n");
}

} // namespace

// ---------------------------------------------------------------------------

json default_config()
{
  const RunConfig d;
  const ContactParams c;
  const NoiseSchedule s;
  const GameConfig g;
  const SamplerConfig sc;
  const TrainOptions t;
  const SurrogateArch a;
  return {
      {"version", "v1"},
      {"seed", 0},
      {"out", d.out.string()},
      {"jobs", 0},
      {"input", {{"assemblies", json::array()}}},
      {"potential",
       {{"kind", "contact"},
        {"contact",
         {{"well_depth", c.well_depth},
          {"contact_radius", c.contact_radius},
          {"repulsion_radius", c.repulsion_radius},
          {"repulsion_strength", c.repulsion_strength}}}}},
      {"schedule",
       {{"sigma_min_tr", s.sigma_min_tr},
        {"sigma_max_tr", s.sigma_max_tr},
        {"sigma_min_rot", s.sigma_min_rot},
        {"sigma_max_rot", s.sigma_max_rot}}},
      {"igso3", {{"rows", d.igso3.rows}, {"resolution", d.igso3.resolution}, {"l_max", d.igso3.l_max}}},
      {"decoys",
       {{"count", d.decoys.count},
        {"tr_scale", d.decoys.tr_scale},
        {"rot_mode", rot_mode_name(d.decoys.rot_mode)},
        {"rot_sigma", d.decoys.rot_sigma}}},
      {"train",
       {{"method", "adam"},
        {"steps", t.steps},
        {"learning_rate", t.learning_rate},
        {"batch_size", t.batch_size},
        {"weight_decay", t.weight_decay},
        {"holdout_fraction", t.holdout_fraction},
        {"bins", a.bins},
        {"max_distance", a.max_distance},
        {"restype_channels", a.restype_channels}}},
      {"game",
       {{"steps", g.steps},
        {"eta0", g.eta0},
        {"eta_exponent", g.eta_exponent},
        {"lambda", g.penalty.lambda},
        {"d_ths", g.penalty.d_ths},
        {"update_mode", "simultaneous"},
        {"grad_backend", "analytic"},
        {"convergence_tol", g.convergence_tol},
        {"backtracking", g.backtracking},
        {"n_games", d.n_games},
        {"init_noise",
         {{"tr_scale", d.init_noise.tr_scale},
          {"rot_mode", rot_mode_name(d.init_noise.rot_mode)},
          {"rot_sigma", d.init_noise.rot_sigma}}},
        {"cluster_radius", d.cluster_radius}}},
      {"sampler",
       {{"n_steps", sc.n_steps},
        {"n_samples", sc.n_samples},
        {"noise_on_final_step", sc.noise_on_final_step},
        {"stochastic", sc.stochastic},
        {"cluster_radius", sc.cluster_radius},
        {"score", "oracle"},
        {"modes", json::array()},
        {"weights", json::array()},
        {"temperature", d.gibbs_temperature}}},
  };
}

RunConfig parse_config(const json& j, const fs::path& base_dir)
{
  Section top(j, "config");
  const auto version = top.get<std::string>("version", "");
  if (version != "v1")
    throw InputError("config: \"version\" must be \"v1\", got '" + version + "'");

  RunConfig cfg;
  if (top.has("seed"))
    cfg.seed = top.get<std::uint64_t>("seed", 0);
  if (top.has("out"))
    cfg.out = resolve(base_dir, top.get<std::string>("out", "out"));
  cfg.jobs = top.get<int>("jobs", 0);
  if (cfg.jobs < 0)
    throw InputError("config: jobs must be >= 0");

  {
    auto in = top.sub("input");
    cfg.assemblies = path_list(in, "assemblies", base_dir);
    in.finish();
  }
  {
    auto p = top.sub("potential");
    const auto kind = p.get<std::string>("kind", "contact");
    if (kind == "contact")
      cfg.potential = PotentialKind::contact;
    else if (kind == "surrogate")
      cfg.potential = PotentialKind::surrogate;
    else
      throw InputError("config: potential.kind must be contact or surrogate, got '" + kind + "'");
    auto c = p.sub("contact");
    cfg.contact.well_depth = c.get("well_depth", cfg.contact.well_depth);
    cfg.contact.contact_radius = c.get("contact_radius", cfg.contact.contact_radius);
    cfg.contact.repulsion_radius = c.get("repulsion_radius", cfg.contact.repulsion_radius);
    cfg.contact.repulsion_strength = c.get("repulsion_strength", cfg.contact.repulsion_strength);
    c.finish();
    if (p.has("surrogate"))
      cfg.surrogate_path = resolve(base_dir, p.get<std::string>("surrogate", ""));
    p.finish();
    cfg.contact.validate();
  }
  {
    auto s = top.sub("schedule");
    cfg.schedule.sigma_min_tr = s.get("sigma_min_tr", cfg.schedule.sigma_min_tr);
    cfg.schedule.sigma_max_tr = s.get("sigma_max_tr", cfg.schedule.sigma_max_tr);
    cfg.schedule.sigma_min_rot = s.get("sigma_min_rot", cfg.schedule.sigma_min_rot);
    cfg.schedule.sigma_max_rot = s.get("sigma_max_rot", cfg.schedule.sigma_max_rot);
    s.finish();
    cfg.schedule.validate();
  }
  {
    auto s = top.sub("igso3");
    cfg.igso3.rows = s.get("rows", cfg.igso3.rows);
    cfg.igso3.resolution = s.get("resolution", cfg.igso3.resolution);
    cfg.igso3.l_max = s.get("l_max", cfg.igso3.l_max);
    if (s.has("cache"))
      cfg.igso3.cache = resolve(base_dir, s.get<std::string>("cache", ""));
    s.finish();
    if (cfg.igso3.rows < 2 || cfg.igso3.resolution < 256 || cfg.igso3.l_max < 1)
      throw InputError("config: igso3 needs rows >= 2, resolution >= 256, l_max >= 1");
  }
  {
    auto d = top.sub("decoys");
    cfg.decoys.count = d.get("count", cfg.decoys.count);
    cfg.decoys.tr_scale = d.get("tr_scale", cfg.decoys.tr_scale);
    cfg.decoys.rot_mode = parse_rot_mode(d.get<std::string>("rot_mode", rot_mode_name(cfg.decoys.rot_mode)));
    cfg.decoys.rot_sigma = d.get("rot_sigma", cfg.decoys.rot_sigma);
    d.finish();
    if (cfg.decoys.count < 1 || !(cfg.decoys.tr_scale >= 0.0) || !(cfg.decoys.rot_sigma > 0.0))
      throw InputError("config: decoys need count >= 1, tr_scale >= 0, rot_sigma > 0");
  }
  {
    auto t = top.sub("train");
    const auto method = t.get<std::string>("method", "adam");
    if (method == "adam")
      cfg.train.method = TrainOptions::Method::adam;
    else if (method == "gd")
      cfg.train.method = TrainOptions::Method::gd;
    else
      throw InputError("config: train.method must be adam or gd, got '" + method + "'");
    cfg.train.steps = t.get("steps", cfg.train.steps);
    cfg.train.learning_rate = t.get("learning_rate", cfg.train.learning_rate);
    cfg.train.batch_size = t.get("batch_size", cfg.train.batch_size);
    cfg.train.weight_decay = t.get("weight_decay", cfg.train.weight_decay);
    cfg.train.holdout_fraction = t.get("holdout_fraction", cfg.train.holdout_fraction);
    cfg.arch.bins = t.get("bins", cfg.arch.bins);
    cfg.arch.max_distance = t.get("max_distance", cfg.arch.max_distance);
    cfg.arch.restype_channels = t.get("restype_channels", cfg.arch.restype_channels);
    if (t.has("sets")) {
      const json& sets = t.raw("sets");
      if (!sets.is_array())
        throw InputError("config: train.sets must be an array");
      for (std::size_t k = 0; k < sets.size(); ++k) {
        Section e(sets[k], "train.sets[" + std::to_string(k) + "]");
        if (!e.has("assembly") || !e.has("decoys"))
          throw InputError("config: train.sets[" + std::to_string(k) + "] needs assembly and decoys");
        cfg.train_sets.push_back({resolve(base_dir, e.get<std::string>("assembly", "")),
                                  resolve(base_dir, e.get<std::string>("decoys", ""))});
        e.finish();
      }
    }
    if (t.has("manifest"))
      cfg.train_manifest = resolve(base_dir, t.get<std::string>("manifest", ""));
    t.finish();
    if (cfg.train.steps < 0 || !(cfg.train.holdout_fraction >= 0.0 && cfg.train.holdout_fraction < 1.0) ||
        cfg.arch.bins < 2 || !(cfg.arch.max_distance > 0.0) || !(cfg.train.weight_decay >= 0.0))
      throw InputError("config: invalid train settings");
  }
  {
    auto g = top.sub("game");
    cfg.game.steps = g.get("steps", cfg.game.steps);
    cfg.game.eta0 = g.get("eta0", cfg.game.eta0);
    cfg.game.eta_exponent = g.get("eta_exponent", cfg.game.eta_exponent);
    cfg.game.penalty.lambda = g.get("lambda", cfg.game.penalty.lambda);
    cfg.game.penalty.d_ths = g.get("d_ths", cfg.game.penalty.d_ths);
    const auto mode = g.get<std::string>("update_mode", "simultaneous");
    if (mode == "simultaneous")
      cfg.game.update_mode = UpdateMode::simultaneous;
    else if (mode == "round_robin")
      cfg.game.update_mode = UpdateMode::round_robin;
    else
      throw InputError("config: game.update_mode must be simultaneous or round_robin");
    const auto backend = g.get<std::string>("grad_backend", "analytic");
    if (backend == "analytic")
      cfg.game.grad_backend = GradBackend::analytic;
    else if (backend == "finite_diff")
      cfg.game.grad_backend = GradBackend::finite_diff;
    else
      throw InputError("config: game.grad_backend must be analytic or finite_diff");
    cfg.game.convergence_tol = g.get("convergence_tol", cfg.game.convergence_tol);
    cfg.game.backtracking = g.get("backtracking", cfg.game.backtracking);
    cfg.n_games = g.get("n_games", cfg.n_games);
    auto n = g.sub("init_noise");
    cfg.init_noise.tr_scale = n.get("tr_scale", cfg.init_noise.tr_scale);
    cfg.init_noise.rot_mode = parse_rot_mode(n.get<std::string>("rot_mode", rot_mode_name(cfg.init_noise.rot_mode)));
    cfg.init_noise.rot_sigma = n.get("rot_sigma", cfg.init_noise.rot_sigma);
    n.finish();
    cfg.cluster_radius = g.get("cluster_radius", cfg.cluster_radius);
    g.finish();
    cfg.game.validate();
    if (cfg.n_games < 1 || !(cfg.cluster_radius >= 0.0) || !(cfg.init_noise.tr_scale >= 0.0))
      throw InputError("config: game needs n_games >= 1, cluster_radius >= 0, init_noise.tr_scale >= 0");
  }
  {
    auto s = top.sub("sampler");
    cfg.sampler.n_steps = s.get("n_steps", cfg.sampler.n_steps);
    cfg.sampler.n_samples = s.get("n_samples", cfg.sampler.n_samples);
    cfg.sampler.noise_on_final_step = s.get("noise_on_final_step", cfg.sampler.noise_on_final_step);
    cfg.sampler.stochastic = s.get("stochastic", cfg.sampler.stochastic);
    cfg.sampler.cluster_radius = s.get("cluster_radius", cfg.sampler.cluster_radius);
    const auto score = s.get<std::string>("score", "oracle");
    if (score != "oracle" && score != "gibbs")
      throw InputError("config: sampler.score must be oracle or gibbs");
    cfg.oracle_modes = path_list(s, "modes", base_dir);
    cfg.oracle_weights = s.get<std::vector<double>>("weights", {});
    cfg.gibbs_temperature = s.get("temperature", cfg.gibbs_temperature);
    if (score == "gibbs")
      cfg.oracle_modes.clear();
    else if (cfg.oracle_modes.empty())
      cfg.oracle_modes = {fs::path()}; // placeholder: the input assembly
    s.finish();
    cfg.sampler.validate();
    if (!(cfg.gibbs_temperature > 0.0))
      throw InputError("config: sampler.temperature must be positive");
  }
  {
    auto m = top.sub("metrics");
    cfg.metrics_pred = path_list(m, "pred", base_dir);
    if (m.has("truth"))
      cfg.metrics_truth = resolve(base_dir, m.get<std::string>("truth", ""));
    m.finish();
  }
  top.finish();
  return cfg;
}

RunConfig load_config(const fs::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw InputError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

// ---------------------------------------------------------------------------

int cmd_decoys(const RunConfig& cfg)
{
  require_seed(cfg);
  require_potential(cfg);
  const auto inputs = load_inputs(cfg);
  const auto f = make_potential(cfg);
  std::optional<igso3::Table> table;
  if (cfg.decoys.rot_mode == RotMode::igso3)
    table = make_table(cfg);
  apply_jobs(cfg);

  const fs::path dir = cfg.out / "decoys";
  fs::create_directories(dir);
  json manifest = {{"sets", json::array()}};
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    DecoyOptions opt = cfg.decoys;
    opt.seed = splitmix64(*cfg.seed ^ splitmix64(k));
    DecoySet ds = generate_decoys(inputs[k], opt, table ? &*table : nullptr);
    score_decoys(ds, *f);
    const fs::path file = dir / (padded(k) + "_" + cfg.assemblies[k].stem().string() + ".jsonl");
    save_decoys(ds, file);
    manifest["sets"].push_back({{"assembly", fs::absolute(cfg.assemblies[k]).string()},
                                {"decoys", fs::absolute(file).string()}});
    std::cout << "wrote " << ds.size() << " decoys to " << file.string() << '\n';
  }
  write_json(dir / "manifest.json", manifest);
  return kExitOk;
}

int cmd_train_potential(const RunConfig& cfg)
{
  require_seed(cfg);
  std::vector<DecoySource> sources = cfg.train_sets;
  if (cfg.train_manifest) {
    require_file(*cfg.train_manifest, "decoy manifest");
    std::ifstream in(*cfg.train_manifest);
    json m;
    try {
      m = json::parse(in);
      for (const auto& e : m.at("sets"))
        sources.push_back({e.at("assembly").get<std::string>(), e.at("decoys").get<std::string>()});
    } catch (const json::exception& e) {
      throw InputError("decoy manifest " + cfg.train_manifest->string() + ": " + e.what());
    }
  }
  if (sources.empty())
    throw InputError("train-potential: no decoy sets (train.sets or train.manifest)");
  std::vector<DecoySet> sets;
  for (const auto& s : sources) {
    require_file(s.assembly, "assembly");
    require_file(s.decoys, "decoy file");
    DecoySet ds = load_decoys(s.decoys, load_assembly(s.assembly));
    if (!ds.scored())
      throw InputError("decoy file " + s.decoys.string() + " has unscored decoys");
    sets.push_back(std::move(ds));
  }
  apply_jobs(cfg);

  TrainOptions opt = cfg.train;
  opt.seed = *cfg.seed;
  const SurrogatePotential init(cfg.arch.bins, cfg.arch.max_distance, cfg.arch.restype_channels);
  TrainReport rep;
  const SurrogatePotential model = train_surrogate(sets, init, opt, &rep);

  fs::create_directories(cfg.out);
  write_file_atomic(cfg.out / "surrogate.json", model.to_json().dump(1) + "\n");
  std::ostringstream curve;
  curve << "step,loss\n";
  for (std::size_t k = 0; k < rep.loss_curve.size(); ++k)
    curve << k << ',' << num(rep.loss_curve[k]) << '\n';
  write_file_atomic(cfg.out / "loss_curve.csv", curve.str());
  write_json(cfg.out / "train_report.json", {{"train_pairs", rep.train_pairs},
                                             {"heldout_pairs", rep.heldout_pairs},
                                             {"train_accuracy", rep.train_accuracy},
                                             {"heldout_accuracy", rep.heldout_accuracy},
                                             {"final_loss", rep.loss_curve.back()}});
  std::ostringstream txt;
  txt << "train_pairs " << rep.train_pairs << "\nheldout_pairs " << rep.heldout_pairs << "\ntrain_accuracy "
      << num(rep.train_accuracy) << "\nheldout_accuracy " << num(rep.heldout_accuracy) << '\n';
  write_file_atomic(cfg.out / "train_report.txt", txt.str());
  std::cout << txt.str();
  return kExitOk;
}

int cmd_equilibrate(const RunConfig& cfg)
{
  require_seed(cfg);
  require_potential(cfg);
  const auto inputs = load_inputs(cfg);
  const auto f = make_potential(cfg);
  std::optional<igso3::Table> table;
  if (cfg.init_noise.rot_mode == RotMode::igso3)
    table = make_table(cfg);
  apply_jobs(cfg);

  GameConfig gc = cfg.game;
  gc.seed = *cfg.seed;
  const EquilibriumSet eq =
      enumerate_equilibria(inputs.front(), *f, gc, cfg.n_games, cfg.init_noise, table ? &*table : nullptr);

  const fs::path dir = cfg.out / "games";
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << "game,round,potential,penalty,objective\n";
  for (std::size_t k = 0; k < eq.games.size(); ++k) {
    const auto& g = eq.games[k];
    std::ostringstream lines;
    write_trajectory_jsonl(g, lines);
    write_file_atomic(dir / ("game_" + padded(eq.game_index[k]) + ".jsonl"), lines.str());
    for (std::size_t r = 0; r < g.energies.size(); ++r)
      csv << eq.game_index[k] << ',' << r << ',' << num(g.energies[r].first) << ',' << num(g.energies[r].second)
          << ',' << num(g.objective(r, gc.penalty.lambda)) << '\n';
  }
  write_file_atomic(cfg.out / "energy.csv", csv.str());

  json failures = json::array();
  for (const auto& fl : eq.failures)
    failures.push_back({{"game", fl.game}, {"error", fl.message}});
  json summary = {{"n_games", cfg.n_games}, {"succeeded", eq.games.size()}, {"failures", failures}};
  if (!eq.games.empty()) {
    const auto clusters = cluster_equilibria(eq.games, cfg.cluster_radius);
    // members refer to positions in the sorted list; report game numbers instead
    json cj = clusters_to_json(clusters);
    for (auto& c : cj)
      for (auto& m : c["members"])
        m = eq.game_index[m.get<std::size_t>()];
    write_json(cfg.out / "clusters.json", cj);
    summary["best_potential"] = eq.games.front().final_potential();
  }
  write_json(cfg.out / "summary.json", summary);
  std::cout << eq.games.size() << "/" << cfg.n_games << " games finished\n";
  for (const auto& fl : eq.failures)
    std::cerr << "game " << fl.game << " failed: " << fl.message << '\n';
  return eq.games.empty() ? kExitPartial : kExitOk;
}

int cmd_sample(const RunConfig& cfg)
{
  require_seed(cfg);
  const auto inputs = load_inputs(cfg);
  const AssemblyState& base = inputs.front();
  std::unique_ptr<Potential> f;
  std::vector<AssemblyState> modes;
  if (cfg.oracle_modes.empty()) {
    require_potential(cfg);
    f = make_potential(cfg);
  } else {
    for (const auto& p : cfg.oracle_modes) {
      if (p.empty()) {
        modes.push_back(base);
        continue;
      }
      require_file(p, "oracle mode");
      modes.push_back(load_assembly(p));
    }
    if (!cfg.oracle_weights.empty() && cfg.oracle_weights.size() != modes.size())
      throw InputError("config: sampler.weights must have one entry per mode");
  }
  apply_jobs(cfg);

  std::optional<igso3::Table> table;
  std::unique_ptr<ScoreField> score;
  if (f) {
    score = std::make_unique<PotentialScoreField>(*f, cfg.gibbs_temperature);
  } else {
    table = make_table(cfg);
    auto w = cfg.oracle_weights.empty() ? std::vector<double>(modes.size(), 1.0) : cfg.oracle_weights;
    score = std::make_unique<MixtureOracle>(modes, w, *table, cfg.schedule);
  }

  SamplerConfig sc = cfg.sampler;
  sc.seed = *cfg.seed;
  const SampleSet out = sample_equilibria(*score, base, sc, cfg.schedule, f.get());

  const fs::path dir = cfg.out / "samples";
  fs::create_directories(dir);
  for (std::size_t k = 0; k < out.runs.size(); ++k) {
    std::ostringstream lines;
    write_diffusion_jsonl(out.runs[k], base.fixed_index, lines, f.get());
    write_file_atomic(dir / ("sample_" + padded(out.sample_index[k]) + ".jsonl"), lines.str());
  }
  json failures = json::array();
  for (const auto& fl : out.failures)
    failures.push_back({{"sample", fl.sample}, {"error", fl.message}});
  json summary = {{"n_samples", sc.n_samples}, {"succeeded", out.runs.size()}, {"failures", failures}};
  if (!out.clusters.empty()) {
    json cj = clusters_to_json(out.clusters);
    for (auto& c : cj)
      for (auto& m : c["members"])
        m = out.sample_index[m.get<std::size_t>()];
    write_json(cfg.out / "clusters.json", cj);
    std::size_t largest = 0;
    for (const auto& c : out.clusters)
      largest = std::max(largest, c.count());
    summary["largest_cluster_fraction"] = static_cast<double>(largest) / static_cast<double>(out.runs.size());
  }
  write_json(cfg.out / "summary.json", summary);
  std::cout << out.runs.size() << "/" << sc.n_samples << " samples finished, " << out.clusters.size()
            << " clusters\n";
  return out.runs.empty() ? kExitPartial : kExitOk;
}

int cmd_score(const RunConfig& cfg)
{
  require_potential(cfg);
  const auto inputs = load_inputs(cfg);
  const auto f = make_potential(cfg);
  apply_jobs(cfg);
  std::ostringstream csv;
  csv << "assembly,energy,penalty\n";
  for (std::size_t k = 0; k < inputs.size(); ++k)
    csv << cfg.assemblies[k].string() << ',' << num(f->evaluate(inputs[k])) << ','
        << num(distance_penalty(inputs[k], cfg.game.penalty)) << '\n';
  fs::create_directories(cfg.out);
  write_file_atomic(cfg.out / "scores.csv", csv.str());
  std::cout << csv.str();
  return kExitOk;
}

int cmd_metrics(const RunConfig& cfg)
{
  if (!cfg.metrics_truth)
    throw InputError("metrics: truth assembly missing (metrics.truth)");
  if (cfg.metrics_pred.empty())
    throw InputError("metrics: no predictions (metrics.pred)");
  require_file(*cfg.metrics_truth, "truth assembly");
  const AssemblyState truth = load_assembly(*cfg.metrics_truth);
  std::vector<double> rmsds, tms;
  std::vector<std::string> rows;
  for (const auto& p : cfg.metrics_pred) {
    require_file(p, "prediction");
    const AssemblyState pred = load_assembly(p);
    double r = 0.0;
    try {
      r = complex_rmsd(pred, truth);
    } catch (const InputError& e) {
      throw InputError("metrics: " + p.string() + " vs " + cfg.metrics_truth->string() + ": " + e.what());
    }
    std::string tm_text = "NA";
    if (pred.num_residues() >= 16) {
      const double tm = tm_score(pred, truth);
      tms.push_back(tm);
      tm_text = num(tm);
    }
    rmsds.push_back(r);
    rows.push_back(p.string() + "," + num(r) + "," + tm_text);
  }

  auto summary = [](std::vector<double> v, const char* what) -> std::string {
    if (v.empty())
      return "NA";
    if (std::string(what) == "mean") {
      double s = 0.0;
      for (double x : v)
        s += x;
      return num(s / static_cast<double>(v.size()));
    }
    if (std::string(what) == "median") {
      std::sort(v.begin(), v.end());
      const std::size_t n = v.size();
      return num(n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]));
    }
    double m = 0.0;
    for (double x : v)
      m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
      ss += (x - m) * (x - m);
    return num(std::sqrt(ss / static_cast<double>(v.size())));
  };

  std::ostringstream csv;
  csv << "prediction,c_rmsd,tm_score\n";
  for (const auto& r : rows)
    csv << r << '\n';
  for (const char* what : {"mean", "median", "std"})
    csv << what << ',' << summary(rmsds, what) << ',' << summary(tms, what) << '\n';
  fs::create_directories(cfg.out);
  write_file_atomic(cfg.out / "metrics.csv", csv.str());
  std::cout << csv.str();
  return kExitOk;
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv)
{
  CLI::App app{"Rigid multi-chain docking by gradient play and reverse diffusion"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "dockeq 1.0");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string out;
  app.add_option("--config", config_path, "v1 JSON config file")->envname("DOCKEQ_CONFIG");
  app.add_option("--seed", seed, "Random seed (overrides the config)")->envname("DOCKEQ_SEED");
  app.add_option("--jobs", jobs, "Worker threads (default: all cores)")->envname("DOCKEQ_JOBS");
  app.add_option("--out", out, "Output directory (overrides the config)")->envname("DOCKEQ_OUT");

  struct Entry
  {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&);
  };
  const Entry entries[] = {
      {"decoys", "Generate and score decoys for every input assembly", cmd_decoys},
      {"train-potential", "Fit the surrogate potential on scored decoys", cmd_train_potential},
      {"equilibrate", "Enumerate equilibria by gradient play", cmd_equilibrate},
      {"sample", "Sample equilibria by reverse diffusion", cmd_sample},
      {"score", "Energy of every input assembly", cmd_score},
      {"metrics", "C-RMSD and TM-score of predictions against a reference", cmd_metrics},
  };
  std::vector<CLI::App*> subs;
  for (const auto& e : entries)
    subs.push_back(app.add_subcommand(e.name, e.help));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    RunConfig cfg = config_path.empty() ? parse_config(default_config()) : load_config(config_path);
    if (config_path.empty())
      cfg.seed.reset();
    if (seed)
      cfg.seed = *seed;
    if (jobs) {
      if (*jobs < 0)
        throw InputError("--jobs must be >= 0");
      cfg.jobs = *jobs;
    }
    if (!out.empty())
      cfg.out = out;
    for (std::size_t k = 0; k < subs.size(); ++k)
      if (subs[k]->parsed())
        return entries[k].fn(cfg);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitInput;
}

} // namespace dockeq::cli
