#include "dockeq/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dockeq/errors.hpp"
#include "dockeq/rng.hpp"

namespace dockeq {

std::vector<DecoyPair> make_ranking_pairs(std::span<const DecoySet> sets, double tie_tol)
{
  std::vector<DecoyPair> pairs;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const auto& e = sets[s].energies;
    for (std::size_t a = 0; a < e.size(); ++a)
      for (std::size_t b = a + 1; b < e.size(); ++b) {
        if (!e[a] || !e[b])
          continue;
        const double d = *e[a] - *e[b];
        if (std::abs(d) <= tie_tol)
          continue;
        pairs.push_back(d > 0.0 ? DecoyPair{s, a, b} : DecoyPair{s, b, a});
      }
  }
  return pairs;
}

std::vector<StatePair> to_state_pairs(std::span<const DecoySet> sets, std::span<const DecoyPair> pairs)
{
  std::vector<StatePair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs)
    out.push_back({sets[p.set].decoy_state(p.high), sets[p.set].decoy_state(p.low)});
  return out;
}

double pairwise_accuracy(const Potential& f, std::span<const StatePair> pairs)
{
  if (pairs.empty())
    return 0.0;
  std::size_t ok = 0;
  for (const auto& p : pairs)
    ok += f.evaluate(p.high) > f.evaluate(p.low);
  return static_cast<double>(ok) / static_cast<double>(pairs.size());
}

namespace {

double linear_accuracy(const std::vector<double>& w, const std::vector<std::vector<double>>& diffs)
{
  if (diffs.empty())
    return 0.0;
  std::size_t ok = 0;
  for (const auto& d : diffs)
    ok += std::inner_product(w.begin(), w.end(), d.begin(), 0.0) > 0.0;
  return static_cast<double>(ok) / static_cast<double>(diffs.size());
}

double regularised_loss(const std::vector<double>& w, const std::vector<std::vector<double>>& diffs,
                        double decay, std::vector<double>* grad)
{
  double l = ranking_loss_linear(w, diffs, grad);
  if (decay > 0.0) {
    for (std::size_t k = 0; k < w.size(); ++k) {
      l += 0.5 * decay * w[k] * w[k];
      if (grad)
        (*grad)[k] += decay * w[k];
    }
  }
  return l;
}

} // namespace

SurrogatePotential train_surrogate(std::span<const DecoySet> sets, const SurrogatePotential& init,
                                   const TrainOptions& opt, TrainReport* report)
{
  std::size_t scored = 0;
  for (const auto& s : sets)
    for (const auto& e : s.energies)
      scored += e.has_value();
  if (scored < 2)
    throw InputError("train_surrogate: need at least 2 scored decoys, got " + std::to_string(scored));
  const auto pairs = make_ranking_pairs(sets);
  if (pairs.empty())
    throw InputError("train_surrogate: all decoys have equal energy, no ranking signal");
  if (opt.steps < 0)
    throw InputError("train_surrogate: steps must be >= 0");

  // features of every decoy, computed once
  std::vector<std::vector<std::vector<double>>> feats(sets.size());
  for (std::size_t s = 0; s < sets.size(); ++s) {
    feats[s].resize(sets[s].size());
    const auto n = static_cast<std::ptrdiff_t>(sets[s].size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t j = 0; j < n; ++j)
      feats[s][static_cast<std::size_t>(j)] = init.features(sets[s].decoy_state(static_cast<std::size_t>(j)));
  }

  // hold out whole decoy sets, or pairs when there is only one set
  Rng rng(opt.seed);
  std::vector<bool> heldout_set(sets.size(), false);
  std::vector<bool> heldout_pair(pairs.size(), false);
  auto shuffled = [&](std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = n; i > 1; --i)
      std::swap(idx[i - 1], idx[rng.next_u64() % i]);
    return idx;
  };
  if (sets.size() >= 2) {
    const auto k = static_cast<std::size_t>(std::ceil(opt.holdout_fraction * static_cast<double>(sets.size())));
    const auto idx = shuffled(sets.size());
    for (std::size_t i = 0; i < std::min(k, sets.size() - 1); ++i)
      heldout_set[idx[i]] = true;
  } else {
    const auto k = static_cast<std::size_t>(std::ceil(opt.holdout_fraction * static_cast<double>(pairs.size())));
    const auto idx = shuffled(pairs.size());
    for (std::size_t i = 0; i < std::min(k, pairs.size() - 1); ++i)
      heldout_pair[idx[i]] = true;
  }

  std::vector<std::vector<double>> train, held;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pr = pairs[p];
    const auto& fh = feats[pr.set][pr.high];
    const auto& fl = feats[pr.set][pr.low];
    std::vector<double> d(fh.size());
    for (std::size_t k = 0; k < d.size(); ++k)
      d[k] = fh[k] - fl[k];
    (heldout_set[pr.set] || heldout_pair[p] ? held : train).push_back(std::move(d));
  }

  std::vector<double> w = init.weights();
  TrainReport rep;
  rep.train_pairs = train.size();
  rep.heldout_pairs = held.size();
  std::vector<double> grad;

  if (opt.method == TrainOptions::Method::gd) {
    double lr = opt.learning_rate;
    if (!(lr > 0.0)) {
      // the logistic loss gradient is (1/4) E[d d^T]-Lipschitz
      double m = 0.0;
      for (const auto& d : train)
        m += std::inner_product(d.begin(), d.end(), d.begin(), 0.0);
      m /= static_cast<double>(train.size());
      lr = 4.0 / (m + opt.weight_decay * 4.0 + 1e-300);
    }
    double loss = regularised_loss(w, train, opt.weight_decay, &grad);
    for (int step = 0; step < opt.steps; ++step) {
      rep.loss_curve.push_back(loss);
      std::vector<double> trial(w.size());
      double trial_loss = loss;
      for (int halving = 0; halving <= 30; ++halving) {
        for (std::size_t k = 0; k < w.size(); ++k)
          trial[k] = w[k] - lr * grad[k];
        trial_loss = regularised_loss(trial, train, opt.weight_decay, nullptr);
        if (trial_loss <= loss)
          break;
        lr *= 0.5;
        ++rep.step_halvings;
      }
      if (trial_loss > loss)
        break;
      w = std::move(trial);
      loss = regularised_loss(w, train, opt.weight_decay, &grad);
    }
    rep.loss_curve.push_back(loss);
  } else {
    // Adam, full batch or shuffled mini-batches
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    std::vector<double> m(w.size(), 0.0), v(w.size(), 0.0);
    const std::size_t bs = opt.batch_size == 0 ? train.size() : std::min(opt.batch_size, train.size());
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = train.size();
    std::vector<std::vector<double>> batch;
    for (int step = 0; step < opt.steps; ++step) {
      rep.loss_curve.push_back(regularised_loss(w, train, opt.weight_decay, nullptr));
      if (bs == train.size()) {
        regularised_loss(w, train, opt.weight_decay, &grad);
      } else {
        if (cursor + bs > order.size()) {
          for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.next_u64() % i]);
          cursor = 0;
        }
        batch.clear();
        for (std::size_t i = 0; i < bs; ++i)
          batch.push_back(train[order[cursor + i]]);
        cursor += bs;
        regularised_loss(w, batch, opt.weight_decay, &grad);
      }
      const double c1 = 1.0 - std::pow(b1, step + 1), c2 = 1.0 - std::pow(b2, step + 1);
      for (std::size_t k = 0; k < w.size(); ++k) {
        m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
        v[k] = b2 * v[k] + (1.0 - b2) * grad[k] * grad[k];
        w[k] -= opt.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
      }
    }
    rep.loss_curve.push_back(regularised_loss(w, train, opt.weight_decay, nullptr));
  }

  for (double x : w)
    if (!std::isfinite(x))
      throw NumericalError("train_surrogate: non-finite weight after training");

  rep.train_accuracy = linear_accuracy(w, train);
  rep.heldout_accuracy = linear_accuracy(w, held);
  SurrogatePotential out = init;
  out.set_weights(std::move(w));
  if (report)
    *report = std::move(rep);
  return out;
}

} // namespace dockeq
