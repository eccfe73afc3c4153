#include "dimco/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "dimco/errors.hpp"

namespace dimco {

void LabeledEmbeddings::validate() const {
  if (labels.size() != data.rows) {
    throw ShapeError("dataset has " + std::to_string(data.rows) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (std::size_t c = 0; c < data.data.size(); ++c) {
    if (!std::isfinite(data.data[c])) {
      throw DomainError("dataset value at row " + std::to_string(c / std::max<std::size_t>(1, data.cols)) +
                        " is not finite");
    }
  }
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] >= class_count) {
      throw ArgumentError("label " + std::to_string(labels[n]) + " of item " + std::to_string(n) +
                          " is outside [0, " + std::to_string(class_count) + ")");
    }
  }
}

LabeledEmbeddings LabeledEmbeddings::subset(std::span<const std::size_t> indices) const {
  LabeledEmbeddings out;
  out.class_count = class_count;
  out.data = Matrix(indices.size(), data.cols);
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= size()) {
      throw RangeError("subset index " + std::to_string(indices[r]) + " is outside [0, " +
                       std::to_string(size()) + ")");
    }
    const auto src = data.row(indices[r]);
    std::copy(src.begin(), src.end(), out.data.row(r).begin());
    out.labels.push_back(labels[indices[r]]);
  }
  return out;
}

std::vector<std::vector<std::size_t>> LabeledEmbeddings::class_members() const {
  std::vector<std::vector<std::size_t>> members(class_count);
  for (std::size_t n = 0; n < labels.size(); ++n) members.at(labels[n]).push_back(n);
  return members;
}

void SynthSpec::validate() const {
  if (classes == 0 || per_class == 0 || dim == 0) {
    throw ConfigError("synthetic data needs classes, per_class and dim >= 1");
  }
  if (!(spread >= 0.0) || !(center_scale > 0.0)) {
    throw ConfigError("synthetic data needs spread >= 0 and center_scale > 0");
  }
}

SynthData gen_synth(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> center(-spec.center_scale, spec.center_scale);
  std::normal_distribution<double> noise(0.0, 1.0);

  SynthData out;
  out.centers = Matrix(spec.classes, spec.dim);
  for (double& v : out.centers.data) v = center(rng);

  LabeledEmbeddings& d = out.data;
  d.class_count = spec.classes;
  d.data = Matrix(static_cast<std::size_t>(spec.classes) * spec.per_class, spec.dim);
  d.labels.reserve(d.data.rows);
  std::size_t r = 0;
  for (std::uint32_t c = 0; c < spec.classes; ++c) {
    for (std::uint32_t i = 0; i < spec.per_class; ++i, ++r) {
      for (std::uint32_t j = 0; j < spec.dim; ++j) d.data(r, j) = out.centers(c, j) + spec.spread * noise(rng);
      d.labels.push_back(c);
    }
  }
  return out;
}

Split split_per_class(const LabeledEmbeddings& data, std::size_t train_per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train_idx, test_idx;
  for (auto& members : data.class_members()) {
    std::shuffle(members.begin(), members.end(), rng);
    const std::size_t cut = std::min(train_per_class, members.size());
    train_idx.insert(train_idx.end(), members.begin(), members.begin() + cut);
    test_idx.insert(test_idx.end(), members.begin() + cut, members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {data.subset(train_idx), data.subset(test_idx)};
}

}  // namespace dimco
