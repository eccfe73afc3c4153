#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dimco/dataset.hpp"
#include "dimco/encoder.hpp"
#include "dimco/infomax.hpp"

namespace dimco {

struct TrainConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint32_t epochs = 100;
  std::uint32_t classes_per_batch = 10;
  std::uint32_t items_per_class = 10;
  double lambda = 1.0;
  // Regularizer pairs drawn per step; defaults to d.
  std::optional<std::uint32_t> ind_pairs_per_batch;
  std::uint64_t seed = 0;
  // Train on at most this many examples of each class.
  std::optional<std::uint32_t> per_class_limit;

  void validate(std::uint32_t class_count) const;
  std::size_t batch_size() const noexcept {
    return static_cast<std::size_t>(classes_per_batch) * items_per_class;
  }
};

// Indices of the training examples visible to the sampler, grouped by class.
// With a per-class limit only a seeded subset of each class is kept.
class ClassPools {
 public:
  ClassPools(const LabeledEmbeddings& data, std::optional<std::uint32_t> per_class_limit,
             std::mt19937_64& rng);

  const std::vector<std::vector<std::size_t>>& pools() const noexcept { return pools_; }
  // Classes with at least one visible example.
  const std::vector<std::uint32_t>& nonempty_classes() const noexcept { return nonempty_; }
  std::size_t visible_count() const noexcept { return visible_; }

 private:
  std::vector<std::vector<std::size_t>> pools_;
  std::vector<std::uint32_t> nonempty_;
  std::size_t visible_ = 0;
};

// classes_per_batch distinct classes, items_per_class items of each. Classes
// smaller than items_per_class are sampled with replacement.
std::vector<std::size_t> sample_balanced_batch(const ClassPools& pools, const TrainConfig& config,
                                               std::mt19937_64& rng);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam update in place. Throws TrainingError on non-finite gradients.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct EpochRecord {
  std::uint32_t epoch = 0;
  std::uint64_t step = 0;  // optimizer steps completed
  LossReport report;       // averaged over the epoch's steps
};

struct TrainResult {
  EncoderParams params;
  std::vector<EpochRecord> log;
  bool diverged = false;
  std::string diagnostic;
};

using EpochCallback = std::function<void(const EpochRecord&, const EncoderParams&)>;

TrainResult train(const LabeledEmbeddings& data, const EncoderConfig& encoder_config,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// One optimizer step's loss and parameter gradient on the given example indices.
struct StepGradient {
  LossReport report;
  std::vector<double> grad;
};
StepGradient batch_gradient(const EncoderParams& params, const LabeledEmbeddings& data,
                            std::span<const std::size_t> indices, double lambda,
                            std::span<const DimPair> pairs);

void write_train_log_header(std::ostream& out);
void write_train_log_record(std::ostream& out, const EpochRecord& record);

}  // namespace dimco
