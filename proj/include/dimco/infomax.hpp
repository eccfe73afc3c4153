#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "dimco/codes.hpp"

namespace dimco {

// A batch of per-item code distributions with their class labels.
struct LabeledProbBatch {
  CodeSpec spec;
  std::uint32_t class_count = 0;
  std::vector<ProbMatrix> items;
  std::vector<std::uint32_t> labels;

  void validate() const;
  std::size_t size() const noexcept { return items.size(); }
};

struct LossReport {
  double marginal_entropy = 0.0;
  double conditional_entropy = 0.0;
  double mutual_information = 0.0;
  double regularizer = 0.0;
  double total = 0.0;
  double lambda = 1.0;
  // Set when the regularizer was requested with an empty pair list.
  bool regularizer_skipped = false;
};

using DimPair = std::pair<std::uint32_t, std::uint32_t>;

// Shannon entropy -sum p ln p in nats, with 0 ln 0 = 0.
double categorical_entropy(std::span<const double> probs);

// H^(X~) = sum_i H(mean over the batch of row i).
double marginal_entropy_estimate(const LabeledProbBatch& batch);

// H^(X~|Y) = sum_y freq(y) H^(X~ | Y = y), class frequencies taken within the batch.
double conditional_entropy_estimate(const LabeledProbBatch& batch);

double mutual_information_estimate(const LabeledProbBatch& batch);

struct RegularizerValue {
  double value = 0.0;
  bool no_pairs = false;
};

// Mean over pairs (a, b) of KL(pbar_a (x) pbar_b || joint_ab), where joint_ab is
// the batch mean of per-item outer products p_a (x) p_b, clamped at kProbFloor.
RegularizerValue independence_regularizer(const LabeledProbBatch& batch,
                                          std::span<const DimPair> pairs);

// L = -I^ + lambda * L_ind.
LossReport total_loss(const LabeledProbBatch& batch, double lambda = 1.0,
                      std::span<const DimPair> pairs = {});

struct LossGradient {
  LossReport report;
  // d L / d logits, laid out like the input logits: item-major, then d x k row-major.
  std::vector<double> logits_grad;
};

// Exact gradient of total_loss(softmax(logits)) with respect to every logit.
// `logits` holds labels.size() consecutive d x k matrices.
LossGradient loss_gradient(const CodeSpec& spec, std::span<const double> logits,
                           std::span<const std::uint32_t> labels, std::uint32_t class_count,
                           double lambda, std::span<const DimPair> pairs);

// Builds a batch from stacked logits matrices.
LabeledProbBatch make_batch(const CodeSpec& spec, std::span<const double> logits,
                            std::span<const std::uint32_t> labels, std::uint32_t class_count);

// `count` distinct unordered dimension pairs, drawn uniformly without replacement
// (capped at d(d-1)/2).
std::vector<DimPair> sample_dim_pairs(std::uint32_t d, std::size_t count, std::mt19937_64& rng);

}  // namespace dimco
