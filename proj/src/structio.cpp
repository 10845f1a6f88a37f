#include "dockeq/structio.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "dockeq/errors.hpp"

namespace dockeq {

using nlohmann::json;

namespace {

std::string where(const std::string& source, const std::string& field)
{
  return source + ": " + field;
}

Vec3 parse_point(const json& p, const std::string& ctx)
{
  if (!p.is_array() || p.size() != 3)
    throw InputError(ctx + " must be an array of 3 numbers");
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    if (!p[k].is_number())
      throw InputError(ctx + " component " + std::to_string(k) + " is not a number");
    v[k] = p[k].get<double>();
  }
  if (!v.allFinite())
    throw InputError(ctx + " is not finite");
  return v;
}

} // namespace

AssemblyState assembly_from_json(const json& j, const std::string& source)
{
  if (!j.is_object() || !j.contains("chains") || !j["chains"].is_array())
    throw InputError(where(source, "missing \"chains\" array"));
  AssemblyState s;
  const auto& chains = j["chains"];
  for (std::size_t ci = 0; ci < chains.size(); ++ci) {
    const auto& c = chains[ci];
    const std::string ctx = "chains[" + std::to_string(ci) + "]";
    if (!c.is_object())
      throw InputError(where(source, ctx + " is not an object"));
    ChainStructure ch;
    if (!c.contains("id") || !c["id"].is_string())
      throw InputError(where(source, ctx + ".id missing or not a string"));
    ch.id = c["id"].get<std::string>();
    if (!c.contains("coords") || !c["coords"].is_array())
      throw InputError(where(source, ctx + ".coords missing or not an array"));
    const auto& coords = c["coords"];
    for (std::size_t r = 0; r < coords.size(); ++r)
      ch.coords.push_back(parse_point(coords[r], where(source, ctx + ".coords[" + std::to_string(r) + "]")));
    if (c.contains("restypes")) {
      const auto& rt = c["restypes"];
      if (!rt.is_array() || rt.size() != coords.size())
        throw InputError(where(source, ctx + ".restypes must be an array with one entry per residue"));
      for (std::size_t r = 0; r < rt.size(); ++r) {
        if (!rt[r].is_number_integer())
          throw InputError(where(source, ctx + ".restypes[" + std::to_string(r) + "] is not an integer"));
        const int v = rt[r].get<int>();
        if (v < 0 || v >= kNumResidueTypes)
          throw InputError(where(source, ctx + ".restypes[" + std::to_string(r) + "] out of range [0, 20]"));
        ch.restypes.push_back(v);
      }
    } else {
      ch.restypes.assign(ch.coords.size(), kUnknownResidue);
    }
    if (ch.coords.empty())
      throw InputError(where(source, ctx + ".coords is empty"));
    s.chains.push_back(std::move(ch));
  }
  if (s.chains.size() < 2)
    throw InputError(where(source, "need at least 2 chains"));

  if (!j.contains("fixed") || j["fixed"].is_null()) {
    s.fixed_index = default_fixed_index(s.chains);
  } else if (j["fixed"].is_number_integer()) {
    const auto f = j["fixed"].get<long long>();
    if (f < 0 || static_cast<std::size_t>(f) >= s.chains.size())
      throw InputError(where(source, "\"fixed\" index " + std::to_string(f) + " out of range"));
    s.fixed_index = static_cast<std::size_t>(f);
  } else if (j["fixed"].is_string()) {
    const auto id = j["fixed"].get<std::string>();
    auto it = std::find_if(s.chains.begin(), s.chains.end(), [&](const auto& c) { return c.id == id; });
    if (it == s.chains.end())
      throw InputError(where(source, "\"fixed\" names unknown chain '" + id + "'"));
    s.fixed_index = static_cast<std::size_t>(it - s.chains.begin());
  } else {
    throw InputError(where(source, "\"fixed\" must be a chain id or index"));
  }
  s.validate();
  s.normalize();
  return s;
}

json assembly_to_json(const AssemblyState& s)
{
  json chains = json::array();
  for (const auto& c : s.chains) {
    json coords = json::array();
    for (const auto& p : c.coords)
      coords.push_back({p.x(), p.y(), p.z()});
    chains.push_back({{"id", c.id}, {"coords", std::move(coords)}, {"restypes", c.restypes}});
  }
  return {{"chains", std::move(chains)}, {"fixed", s.fixed_index}};
}

AssemblyState load_assembly_json(const std::filesystem::path& path)
{
  std::ifstream is(path);
  if (!is)
    throw InputError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": malformed JSON: " + e.what());
  }
  return assembly_from_json(j, path.string());
}

void save_assembly_json(const AssemblyState& s, const std::filesystem::path& path)
{
  write_file_atomic(path, assembly_to_json(s).dump() + "\n");
}

// ---------------------------------------------------------------------------

int residue_type_index(std::string_view name)
{
  static constexpr std::array<std::string_view, 20> kNames = {
      "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE",
      "LEU", "LYS", "MET", "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL"};
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name)
      return static_cast<int>(i);
  return kUnknownResidue;
}

namespace {

std::string_view columns(std::string_view line, std::size_t first, std::size_t last)
{
  // 1-based inclusive PDB columns
  if (line.size() < first)
    return {};
  return line.substr(first - 1, std::min(last, line.size()) - first + 1);
}

std::string_view trim(std::string_view s)
{
  while (!s.empty() && s.front() == ' ')
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view field, const std::string& what, const std::string& source, std::size_t lineno)
{
  const auto t = trim(field);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v))
    throw InputError(source + ":" + std::to_string(lineno) + ": malformed " + what + " field '" +
                     std::string(field) + "'");
  return v;
}

} // namespace

AssemblyState parse_pdb_calpha(std::istream& in, const std::string& source)
{
  struct Residue
  {
    Vec3 x;
    double occupancy;
    int restype;
  };
  struct Chain
  {
    std::string id;
    std::vector<std::string> order;
    std::map<std::string, Residue> residues;
  };
  std::vector<Chain> chains;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view l = line;
    if (l.starts_with("ENDMDL"))
      break;
    if (!l.starts_with("ATOM  "))
      continue;
    if (trim(columns(l, 13, 16)) != "CA")
      continue;
    if (l.size() < 54)
      throw InputError(source + ":" + std::to_string(lineno) + ": ATOM record too short for coordinates");
    const std::string chain_id(columns(l, 22, 22));
    const std::string key(columns(l, 23, 27));
    Residue r;
    r.x = {parse_number(columns(l, 31, 38), "x", source, lineno),
           parse_number(columns(l, 39, 46), "y", source, lineno),
           parse_number(columns(l, 47, 54), "z", source, lineno)};
    const auto occ = trim(columns(l, 55, 60));
    r.occupancy = occ.empty() ? 1.0 : parse_number(occ, "occupancy", source, lineno);
    r.restype = residue_type_index(trim(columns(l, 18, 20)));

    auto it = std::find_if(chains.begin(), chains.end(), [&](const Chain& c) { return c.id == chain_id; });
    if (it == chains.end()) {
      chains.push_back({chain_id, {}, {}});
      it = chains.end() - 1;
    }
    auto found = it->residues.find(key);
    if (found == it->residues.end()) {
      it->order.push_back(key);
      it->residues.emplace(key, r);
    } else if (r.occupancy > found->second.occupancy) {
      found->second = r;
    }
  }

  if (chains.empty())
    throw InputError(source + ": no CA atoms");
  AssemblyState s;
  for (const auto& c : chains) {
    ChainStructure ch;
    ch.id = c.id == " " ? std::string("_") : c.id;
    for (const auto& k : c.order) {
      const auto& r = c.residues.at(k);
      ch.coords.push_back(r.x);
      ch.restypes.push_back(r.restype);
    }
    s.chains.push_back(std::move(ch));
  }
  if (s.chains.size() < 2)
    throw InputError(source + ": need at least 2 chains, found 1 ('" + s.chains[0].id + "')");
  s.fixed_index = default_fixed_index(s.chains);
  s.validate();
  s.normalize();
  return s;
}

AssemblyState load_pdb_calpha(const std::filesystem::path& path)
{
  std::ifstream is(path);
  if (!is)
    throw InputError("cannot open " + path.string());
  return parse_pdb_calpha(is, path.string());
}

// ---------------------------------------------------------------------------

bool DecoySet::scored() const
{
  return std::all_of(energies.begin(), energies.end(), [](const auto& e) { return e.has_value(); });
}

DecoySet generate_decoys(const AssemblyState& base, const DecoyOptions& opt, const igso3::Table* table)
{
  if (opt.count < 1)
    throw InputError("generate_decoys: count must be >= 1");
  if (!(opt.tr_scale >= 0.0))
    throw InputError("generate_decoys: tr_scale must be >= 0");
  if (opt.rot_mode == RotMode::igso3 && !table)
    throw InputError("generate_decoys: igso3 rotation mode needs an IGSO(3) table");

  DecoySet ds;
  ds.base = base;
  ds.decoys.resize(opt.count);
  ds.energies.assign(opt.count, std::nullopt);
  const Rng root(opt.seed);
  const auto n = static_cast<std::ptrdiff_t>(opt.count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    Rng rng = root.split(static_cast<std::uint64_t>(j));
    JointAction a = JointAction::identity(base.num_chains());
    for (std::size_t i = 0; i < base.num_chains(); ++i) {
      if (i == base.fixed_index)
        continue;
      if (opt.rot_mode == RotMode::uniform)
        a.actions[i].rot = rng.uniform_rotation();
      else if (opt.rot_mode == RotMode::igso3)
        a.actions[i].rot = table->sample_rotation(opt.rot_sigma, rng);
      if (opt.tr_scale > 0.0)
        a.actions[i].tr.v = opt.tr_scale * rng.normal3();
    }
    ds.decoys[static_cast<std::size_t>(j)] = std::move(a);
  }
  return ds;
}

void score_decoys(DecoySet& ds, const Potential& f)
{
  const auto n = static_cast<std::ptrdiff_t>(ds.size());
  ds.energies.assign(ds.size(), std::nullopt);
  std::vector<double> e(ds.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < n; ++j)
    e[static_cast<std::size_t>(j)] = f.evaluate(ds.decoy_state(static_cast<std::size_t>(j)));
  for (std::size_t j = 0; j < ds.size(); ++j)
    ds.energies[j] = e[j];
}

json action_to_json(std::size_t chain, const RigidAction& a)
{
  const auto q = a.rot.quaternion();
  json r = json::array();
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col)
      r.push_back(a.rot.m(row, col));
  // "R" carries the exact matrix; the quaternion alone does not round-trip bit for bit
  return {{"chain", chain},
          {"q", {q[0], q[1], q[2], q[3]}},
          {"R", std::move(r)},
          {"t", {a.tr.v.x(), a.tr.v.y(), a.tr.v.z()}}};
}

RigidAction action_from_json(const json& j)
{
  const auto& q = j.at("q");
  if (!q.is_array() || q.size() != 4)
    throw InputError("action.q must be [w, x, y, z]");
  for (const auto& v : q)
    if (!v.is_number())
      throw InputError("action.q must hold numbers");
  RigidAction a;
  a.rot = Rotation::from_quaternion(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
  if (j.contains("R")) {
    const auto& r = j.at("R");
    if (!r.is_array() || r.size() != 9)
      throw InputError("action.R must hold 9 numbers (row-major)");
    Mat3 m;
    for (int k = 0; k < 9; ++k) {
      if (!r[k].is_number())
        throw InputError("action.R must hold 9 numbers (row-major)");
      m(k / 3, k % 3) = r[k].get<double>();
    }
    if (!((m - a.rot.m).cwiseAbs().maxCoeff() <= 1e-9))
      throw InputError("action.R disagrees with action.q");
    a.rot.m = m;
  }
  a.tr.v = parse_point(j.at("t"), "action.t");
  return a;
}

void write_decoys_jsonl(const DecoySet& ds, std::ostream& os)
{
  for (std::size_t j = 0; j < ds.size(); ++j) {
    json actions = json::array();
    for (std::size_t i = 0; i < ds.decoys[j].size(); ++i)
      if (i != ds.base.fixed_index)
        actions.push_back(action_to_json(i, ds.decoys[j].actions[i]));
    json line = {{"index", j}, {"actions", std::move(actions)}};
    line["energy"] = ds.energies[j] ? json(*ds.energies[j]) : json(nullptr);
    os << line.dump() << '\n';
  }
}

DecoySet read_decoys_jsonl(std::istream& is, const AssemblyState& base, const std::string& source)
{
  DecoySet ds;
  ds.base = base;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    const std::string ctx = source + ":" + std::to_string(lineno);
    try {
      const json j = json::parse(line);
      JointAction a = JointAction::identity(base.num_chains());
      for (const auto& e : j.at("actions")) {
        const auto chain = e.at("chain").get<std::size_t>();
        if (chain >= base.num_chains() || chain == base.fixed_index)
          throw InputError("action for invalid chain " + std::to_string(chain));
        a.actions[chain] = action_from_json(e);
      }
      ds.decoys.push_back(std::move(a));
      const auto& en = j.at("energy");
      ds.energies.push_back(en.is_null() ? std::nullopt : std::optional<double>(en.get<double>()));
    } catch (const json::exception& e) {
      throw InputError(ctx + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(ctx + ": " + e.what());
    }
  }
  return ds;
}

void save_decoys(const DecoySet& ds, const std::filesystem::path& path)
{
  std::ostringstream os;
  write_decoys_jsonl(ds, os);
  write_file_atomic(path, os.str());
}

DecoySet load_decoys(const std::filesystem::path& path, const AssemblyState& base)
{
  std::ifstream is(path);
  if (!is)
    throw InputError("cannot open " + path.string());
  return read_decoys_jsonl(is, base, path.string());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents)
{
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os)
      throw InputError("cannot write " + tmp.string());
    os << contents;
    if (!os)
      throw InputError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

} // namespace dockeq
