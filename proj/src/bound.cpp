#include "dimco/bound.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace dimco {

void BoundInputs::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
  if (!(sample_size >= 1.0)) throw DomainError("sample size m must be >= 1");
  if (!(support_size >= 2.0)) throw DomainError("support size must be >= 2");
  if (!(label_count >= 1.0)) throw DomainError("label count must be >= 1");
}

double default_support_size(const CodeSpec& spec) {
  spec.validate();
  return std::pow(static_cast<double>(spec.k), static_cast<double>(spec.d));
}

double lemma1_bound(const BoundInputs& in) {
  in.validate();
  const double x = in.support_size, y = in.label_count, m = in.sample_size;
  return (3.0 * x + 2.0) * std::log(m) * std::sqrt(std::log(4.0 / in.delta)) / std::sqrt(2.0 * m) +
         ((y + 1.0) * (x + 1.0) - 4.0) / m;
}

GapTerms theorem1_gap(const BoundInputs& in, double c_vc, double c_mi) {
  in.validate();
  if (!in.vc_dim || !in.task_count) throw ArgumentError("the gap needs both a VC dimension and a task count");
  const double dv = *in.vc_dim, n = *in.task_count;
  if (!(dv > 0.0)) throw DomainError("VC dimension must be > 0");
  if (!(n > dv)) throw DomainError("task count must exceed the VC dimension");
  const double x = in.support_size, y = in.label_count, m = in.sample_size;
  GapTerms g;
  g.c_vc = c_vc;
  g.c_mi = c_mi;
  g.vc_term = c_vc * std::sqrt(dv / n * std::log(n / dv));
  g.mi_term = c_mi * (3.0 * x + 2.0) * std::log(m) * std::sqrt(std::log(4.0 / in.delta)) / std::sqrt(2.0 * m);
  g.count_term = c_mi * ((y + 1.0) * (x + 1.0) - 4.0) / m;
  g.total = g.vc_term + g.mi_term + g.count_term;
  return g;
}

void JointTable::validate() const {
  if (codes == 0 || labels == 0) throw DomainError("joint table needs at least one code and one label");
  if (probs.size() != static_cast<std::size_t>(codes) * labels) throw ShapeError("joint table size mismatch");
  double s = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw DomainError("joint table has a negative entry");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-9) throw DomainError("joint table sums to " + std::to_string(s));
}

double JointTable::mutual_information() const {
  validate();
  std::vector<double> px(codes, 0.0), py(labels, 0.0);
  for (std::uint32_t x = 0; x < codes; ++x) {
    for (std::uint32_t y = 0; y < labels; ++y) {
      px[x] += probs[x * labels + y];
      py[y] += probs[x * labels + y];
    }
  }
  double mi = 0.0;
  for (std::uint32_t x = 0; x < codes; ++x) {
    for (std::uint32_t y = 0; y < labels; ++y) {
      const double p = probs[x * labels + y];
      if (p > 0.0) mi += p * std::log(p / (px[x] * py[y]));
    }
  }
  return std::max(0.0, mi);
}

double plugin_mutual_information(std::uint32_t codes, std::uint32_t labels,
                                 const std::vector<std::uint64_t>& counts) {
  if (counts.size() != static_cast<std::size_t>(codes) * labels) throw ShapeError("count table size mismatch");
  std::vector<double> cx(codes, 0.0), cy(labels, 0.0);
  double total = 0.0;
  for (std::uint32_t x = 0; x < codes; ++x) {
    for (std::uint32_t y = 0; y < labels; ++y) {
      const double c = static_cast<double>(counts[x * labels + y]);
      cx[x] += c;
      cy[y] += c;
      total += c;
    }
  }
  if (total == 0.0) throw ArgumentError("plug-in MI of an empty sample");
  double mi = 0.0;
  for (std::uint32_t x = 0; x < codes; ++x) {
    for (std::uint32_t y = 0; y < labels; ++y) {
      const double c = static_cast<double>(counts[x * labels + y]);
      if (c > 0.0) mi += c / total * std::log(c * total / (cx[x] * cy[y]));
    }
  }
  return std::max(0.0, mi);
}

MonteCarloResult monte_carlo_verify(const JointTable& joint, std::uint64_t m, double delta,
                                    std::uint64_t trials, std::uint64_t seed) {
  joint.validate();
  if (trials < 100) throw ArgumentError("monte carlo verification needs at least 100 trials");
  if (m == 0) throw DomainError("sample size m must be >= 1");

  MonteCarloResult r;
  r.trials = trials;
  r.true_mi = joint.mutual_information();
  r.bound = lemma1_bound({static_cast<double>(joint.codes), static_cast<double>(joint.labels),
                          static_cast<double>(m), delta, std::nullopt, std::nullopt});

  std::vector<double> cdf(joint.probs.size());
  std::partial_sum(joint.probs.begin(), joint.probs.end(), cdf.begin());
  cdf.back() = 1.0;
  std::vector<std::uint64_t> counts(joint.probs.size());
  double dev_sum = 0.0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::uint64_t s = 0; s < m; ++s) {
      const double u = unit(rng);
      const auto cell = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      ++counts[std::min(cell, counts.size() - 1)];
    }
    const double dev = std::abs(r.true_mi - plugin_mutual_information(joint.codes, joint.labels, counts));
    r.max_deviation = std::max(r.max_deviation, dev);
    dev_sum += dev;
    if (dev > r.bound) ++r.violations;
  }
  r.mean_deviation = dev_sum / static_cast<double>(trials);
  r.violation_rate = static_cast<double>(r.violations) / static_cast<double>(trials);
  return r;
}

}  // namespace dimco
