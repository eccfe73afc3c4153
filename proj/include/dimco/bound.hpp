#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dimco/codes.hpp"

namespace dimco {

// Scenario for the finite-sample mutual-information bounds. The support size
// is the number of distinct codes, k^d for a k-way d-dimensional code; it is
// taken as an explicit input so other readings (e.g. d log k) can be studied.
struct BoundInputs {
  double support_size = 2.0;
  double label_count = 2.0;
  double sample_size = 1.0;
  double delta = 0.05;
  std::optional<double> vc_dim;
  std::optional<double> task_count;

  void validate() const;
};

double default_support_size(const CodeSpec& spec);  // k^d

// With probability >= 1 - delta over a sample of size m,
//   |I - I^| <= (3|X|+2) ln(m) sqrt(ln(4/delta)) / sqrt(2m) + ((|Y|+1)(|X|+1) - 4) / m.
double lemma1_bound(const BoundInputs& in);

struct GapTerms {
  double vc_term = 0.0;
  double mi_term = 0.0;
  double count_term = 0.0;
  double total = 0.0;
  double c_vc = 1.0;
  double c_mi = 1.0;
};

// The generalization gap's three terms with explicit multipliers for the
// hidden constants:
//   c_vc sqrt(d_vc / n ln(n / d_vc)) + c_mi * (the two terms of lemma1_bound).
GapTerms theorem1_gap(const BoundInputs& in, double c_vc = 1.0, double c_mi = 1.0);

// |X| x |Y| joint distribution table, row-major over codes.
struct JointTable {
  std::uint32_t codes = 0;
  std::uint32_t labels = 0;
  std::vector<double> probs;

  void validate() const;
  double mutual_information() const;  // nats
};

// Plug-in I^ from a |X| x |Y| table of counts.
double plugin_mutual_information(std::uint32_t codes, std::uint32_t labels,
                                 const std::vector<std::uint64_t>& counts);

struct MonteCarloResult {
  double true_mi = 0.0;
  double bound = 0.0;
  double max_deviation = 0.0;
  double mean_deviation = 0.0;
  std::uint64_t violations = 0;
  std::uint64_t trials = 0;
  double violation_rate = 0.0;
};

// Draws `trials` samples of size m from the joint and counts how often the
// plug-in estimate deviates from the true MI by more than lemma1_bound.
// Trial t uses its own RNG stream seeded from (seed, t).
MonteCarloResult monte_carlo_verify(const JointTable& joint, std::uint64_t m, double delta,
                                    std::uint64_t trials, std::uint64_t seed);

}  // namespace dimco
