#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dimco/matrix.hpp"

namespace dimco {

// N feature vectors of dimension D with labels in [0, C).
struct LabeledEmbeddings {
  std::uint32_t class_count = 0;
  Matrix data;
  std::vector<std::uint32_t> labels;

  std::size_t size() const noexcept { return data.rows; }
  std::size_t dim() const noexcept { return data.cols; }

  // Throws DomainError on non-finite data, ArgumentError on bad labels.
  void validate() const;
  LabeledEmbeddings subset(std::span<const std::size_t> indices) const;
  // Item indices grouped by label.
  std::vector<std::vector<std::size_t>> class_members() const;
};

// Gaussian clusters around centers drawn uniformly in [-center_scale, center_scale]^D.
struct SynthSpec {
  std::uint32_t classes = 5;
  std::uint32_t per_class = 100;
  std::uint32_t dim = 2;
  double spread = 0.05;
  double center_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthData {
  LabeledEmbeddings data;
  Matrix centers;  // classes x dim
};

// Items are emitted class by class, per_class items each.
SynthData gen_synth(const SynthSpec& spec);

// Deterministic per-class split: the first `train_per_class` members of each
// class (in a seeded shuffle) go to the first split, the rest to the second.
struct Split {
  LabeledEmbeddings train;
  LabeledEmbeddings test;
};
Split split_per_class(const LabeledEmbeddings& data, std::size_t train_per_class, std::uint64_t seed);

}  // namespace dimco
