#include "dockeq/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "dockeq/errors.hpp"
#include "dockeq/structio.hpp"

namespace dockeq {

using nlohmann::json;

MixtureOracle::MixtureOracle(std::vector<AssemblyState> modes, std::vector<double> weights,
                             const igso3::Table& table, NoiseSchedule sched)
    : modes_(std::move(modes)), weights_(std::move(weights)), table_(&table), sched_(sched)
{
  if (modes_.empty())
    throw InputError("mixture oracle: need at least one mode");
  if (weights_.size() != modes_.size())
    throw InputError("mixture oracle: one weight per mode required");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw InputError("mixture oracle: weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0))
    throw InputError("mixture oracle: weights sum to zero");
  for (double& w : weights_)
    w /= total;
  for (const auto& m : modes_) {
    m.validate();
    if (!m.same_layout(modes_.front()) || m.fixed_index != modes_.front().fixed_index)
      throw InputError("mixture oracle: modes differ in chain layout or fixed chain");
  }
  sched_.validate();
}

double MixtureOracle::mode_log_term(std::size_t k, const AssemblyState& s, double t, JointAction* rel) const
{
  const AssemblyState& m = modes_[k];
  const double s_rot = sched_.sigma_at(Component::rot, t);
  const double s_tr = sched_.sigma_at(Component::tr, t);
  double lp = 0.0;
  for (std::size_t i = 0; i < s.num_chains(); ++i) {
    if (i == m.fixed_index)
      continue;
    const RigidAction a = relative_action(m.chains[i], s.chains[i]);
    // density with respect to Haar measure, so f rather than the angle marginal
    lp += igso3::evaluate(rotation_angle(a.rot), s_rot, table_->l_max()).log_f;
    lp -= a.tr.v.squaredNorm() / (2.0 * s_tr * s_tr);
    if (rel)
      rel->actions[i] = a;
  }
  return lp;
}

namespace {

void check_time(double t)
{
  if (!(t > 0.0 && t <= 1.0))
    throw InputError("score: t must lie in (0, 1]");
}

} // namespace

std::vector<double> MixtureOracle::responsibilities(const AssemblyState& s, double t) const
{
  check_time(t);
  if (!s.same_layout(modes_.front()))
    throw InputError("mixture oracle: state chain sizes differ from the modes");
  std::vector<double> lw(modes_.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < modes_.size(); ++k) {
    lw[k] = weights_[k] > 0.0 ? std::log(weights_[k]) + mode_log_term(k, s, t, nullptr)
                              : -std::numeric_limits<double>::infinity();
    top = std::max(top, lw[k]);
  }
  if (!std::isfinite(top))
    throw NumericalError("mixture oracle: every mode has zero density at this state");
  double z = 0.0;
  for (double& v : lw) {
    v = std::exp(v - top);
    z += v;
  }
  for (double& v : lw)
    v /= z;
  return lw;
}

double MixtureOracle::log_density(const AssemblyState& s, double t) const
{
  check_time(t);
  if (!s.same_layout(modes_.front()))
    throw InputError("mixture oracle: state chain sizes differ from the modes");
  std::vector<double> lw(modes_.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < modes_.size(); ++k) {
    lw[k] = weights_[k] > 0.0 ? std::log(weights_[k]) + mode_log_term(k, s, t, nullptr)
                              : -std::numeric_limits<double>::infinity();
    top = std::max(top, lw[k]);
  }
  double z = 0.0;
  for (double v : lw)
    z += std::exp(v - top);
  return top + std::log(z);
}

JointTangent MixtureOracle::score(const AssemblyState& s, double t) const
{
  check_time(t);
  if (!s.same_layout(modes_.front()))
    throw InputError("mixture oracle: state chain sizes differ from the modes");
  const std::size_t n = s.num_chains();
  std::vector<double> lw(modes_.size(), -std::numeric_limits<double>::infinity());
  std::vector<JointAction> rel(modes_.size(), JointAction::identity(n));
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < modes_.size(); ++k) {
    if (weights_[k] <= 0.0)
      continue;
    lw[k] = std::log(weights_[k]) + mode_log_term(k, s, t, &rel[k]);
    top = std::max(top, lw[k]);
  }
  if (!std::isfinite(top))
    throw NumericalError("mixture oracle: every mode has zero density at this state");
  double z = 0.0;
  for (double& v : lw) {
    v = std::exp(v - top);
    z += v;
  }

  JointTangent out = JointTangent::zero(n);
  const std::size_t fixed = modes_.front().fixed_index;
  for (std::size_t k = 0; k < modes_.size(); ++k) {
    const double g = lw[k] / z;
    if (g == 0.0)
      continue;
    const JointTangent ks = kernel_score(rel[k], fixed, t, *table_, sched_);
    for (std::size_t i = 0; i < n; ++i) {
      out.v[i].omega += g * ks.v[i].omega;
      out.v[i].vel += g * ks.v[i].vel;
    }
  }
  return out;
}

PotentialScoreField::PotentialScoreField(const Potential& f, double temperature, GradBackend backend)
    : f_(&f), temperature_(temperature), backend_(backend)
{
  if (!(temperature > 0.0))
    throw InputError("potential score: temperature must be positive");
}

JointTangent PotentialScoreField::score(const AssemblyState& s, double) const
{
  JointTangent out = JointTangent::zero(s.num_chains());
  for (std::size_t i = 0; i < s.num_chains(); ++i) {
    if (i == s.fixed_index)
      continue;
    const TangentVector g = riemannian_grad(*f_, s, i, backend_);
    out.v[i].omega = -g.omega / temperature_;
    out.v[i].vel = -g.vel / temperature_;
  }
  return out;
}

// ---------------------------------------------------------------------------

DsmWeights dsm_weights(double t, const igso3::Table& table, const NoiseSchedule& sched)
{
  const double s_tr = sched.sigma_at(Component::tr, t);
  return {1.0 / table.expected_score_sq_norm(sched.sigma_at(Component::rot, t)), s_tr * s_tr / 3.0};
}

double dsm_loss(const PerturbationScore& s, std::span<const AssemblyState> data, std::span<const double> t_samples,
                const igso3::Table& table, const NoiseSchedule& sched, Rng& rng, int repeats)
{
  if (data.empty() || t_samples.empty())
    throw InputError("dsm_loss: need data and time samples");
  if (repeats < 1)
    throw InputError("dsm_loss: repeats must be >= 1");
  for (double t : t_samples)
    check_time(t);

  double total = 0.0;
  std::size_t count = 0;
  for (int r = 0; r < repeats; ++r)
    for (std::size_t d = 0; d < data.size(); ++d)
      for (double t : t_samples) {
        const Perturbation p = perturb(data[d], t, table, sched, rng);
        const JointTangent target = kernel_score(p.applied, data[d].fixed_index, t, table, sched);
        const JointTangent pred = s(p, d, t);
        const DsmWeights w = dsm_weights(t, table, sched);
        double l = 0.0;
        for (std::size_t i = 0; i < target.size(); ++i) {
          if (i == data[d].fixed_index)
            continue;
          l += w.rot * (pred.v[i].omega - target.v[i].omega).squaredNorm();
          l += w.tr * (pred.v[i].vel - target.v[i].vel).squaredNorm();
        }
        total += l;
        ++count;
      }
  return total / static_cast<double>(count);
}

double dsm_loss(const ScoreField& s, std::span<const AssemblyState> data, std::span<const double> t_samples,
                const igso3::Table& table, const NoiseSchedule& sched, Rng& rng, int repeats)
{
  const PerturbationScore wrapped = [&s](const Perturbation& p, std::size_t, double t) {
    return s.score(p.state, t);
  };
  return dsm_loss(wrapped, data, t_samples, table, sched, rng, repeats);
}

// ---------------------------------------------------------------------------

void SamplerConfig::validate() const
{
  if (n_steps < 1)
    throw InputError("sampler: n_steps must be >= 1");
  if (n_samples < 1)
    throw InputError("sampler: n_samples must be >= 1");
  if (!(cluster_radius >= 0.0))
    throw InputError("sampler: cluster_radius must be >= 0");
}

AssemblyState sample_prior(const AssemblyState& base, const NoiseSchedule& sched, Rng& rng)
{
  JointAction a = JointAction::identity(base.num_chains());
  for (std::size_t i = 0; i < base.num_chains(); ++i) {
    if (i == base.fixed_index)
      continue;
    a.actions[i].rot = rng.uniform_rotation();
    a.actions[i].tr.v = sched.sigma_max_tr * rng.normal3();
  }
  return apply_joint(a, base);
}

DiffusionTrajectory reverse_diffuse(const ScoreField& s, const AssemblyState& base,
                                    const std::optional<AssemblyState>& init, const SamplerConfig& cfg,
                                    const NoiseSchedule& sched, Rng& rng)
{
  cfg.validate();
  sched.validate();
  AssemblyState cur = init ? *init : sample_prior(base, sched, rng);
  if (!cur.same_layout(base))
    throw InputError("reverse_diffuse: initial state does not match the base layout");
  const std::size_t n = cur.num_chains();

  DiffusionTrajectory traj;
  traj.states.push_back(cur);
  traj.actions.push_back(JointAction::identity(n));
  JointAction total = JointAction::identity(n);
  const double dt = 1.0 / cfg.n_steps;

  for (int k = 0; k < cfg.n_steps; ++k) {
    const double t = 1.0 - k * dt;
    const JointTangent sc = s.score(cur, t);
    if (sc.size() != n || !sc.finite())
      throw NumericalError("reverse_diffuse: non-finite score at t = " + std::to_string(t) + " (step " +
                           std::to_string(k) + ")");
    const double g2r = sched.g2(Component::rot, t);
    const double g2t = sched.g2(Component::tr, t);
    const bool noise = cfg.stochastic && (k + 1 < cfg.n_steps || cfg.noise_on_final_step);
    JointAction a = JointAction::identity(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == cur.fixed_index)
        continue;
      Vec3 d_rot = g2r * dt * sc.v[i].omega;
      Vec3 d_tr = g2t * dt * sc.v[i].vel;
      if (noise) {
        d_rot += std::sqrt(g2r * dt) * rng.normal3();
        d_tr += std::sqrt(g2t * dt) * rng.normal3();
      }
      a.actions[i] = {axis_angle_to_matrix(d_rot), {d_tr}};
    }
    cur = apply_joint(a, cur);
    for (std::size_t i = 0; i < n; ++i)
      total.actions[i] = compose(a.actions[i], total.actions[i]);
    traj.states.push_back(cur);
    traj.actions.push_back(total);
  }
  return traj;
}

SampleSet sample_equilibria(const ScoreField& s, const AssemblyState& base, const SamplerConfig& cfg,
                            const NoiseSchedule& sched, const Potential* energy)
{
  cfg.validate();
  base.validate();
  const auto ns = static_cast<std::size_t>(cfg.n_samples);
  std::vector<std::optional<DiffusionTrajectory>> runs(ns);
  std::vector<std::string> errors(ns);
  const Rng root(cfg.seed);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(ns); ++j) {
    const auto k = static_cast<std::size_t>(j);
    Rng rng = root.split(k);
    try {
      runs[k] = reverse_diffuse(s, base, std::nullopt, cfg, sched, rng);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }

  SampleSet out;
  for (std::size_t k = 0; k < ns; ++k) {
    if (runs[k]) {
      out.runs.push_back(std::move(*runs[k]));
      out.sample_index.push_back(k);
    } else {
      out.failures.push_back({k, errors[k]});
    }
  }
  if (out.runs.empty())
    return out;

  std::vector<AssemblyState> finals;
  std::vector<double> energies;
  for (const auto& r : out.runs) {
    finals.push_back(r.final_state());
    energies.push_back(energy ? energy->evaluate(r.final_state()) : 0.0);
  }
  out.clusters = cluster_states(finals, energies, cfg.cluster_radius);
  return out;
}

void write_diffusion_jsonl(const DiffusionTrajectory& traj, std::size_t fixed_index, std::ostream& os,
                           const Potential* f)
{
  for (std::size_t r = 0; r < traj.actions.size(); ++r) {
    json line;
    line["round"] = r;
    json acts = json::array();
    for (std::size_t i = 0; i < traj.actions[r].size(); ++i)
      if (i != fixed_index)
        acts.push_back(action_to_json(i, traj.actions[r].actions[i]));
    line["actions"] = std::move(acts);
    line["potential"] = f ? json(f->evaluate(traj.states[r])) : json(nullptr);
    line["penalty"] = nullptr;
    os << line.dump() << '\n';
  }
}

} // namespace dockeq
