#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dimco/codes.hpp"
#include "dimco/dataset.hpp"
#include "dimco/encoder.hpp"

namespace dimco {

// Support set of hard codes, optionally labeled.
struct CodeDatabase {
  PackedCodes packed;
  std::vector<std::uint32_t> labels;  // empty or packed.size() entries
  bool has_labels = true;

  const CodeSpec& spec() const noexcept { return packed.spec(); }
  std::size_t size() const noexcept { return packed.size(); }
  void validate() const;
};

CodeDatabase make_database(const CodeSpec& spec, std::span<const Codeword> words,
                           std::span<const std::uint32_t> labels);

// Codeword of every item: argmax of its encoded distributions.
CodeDatabase build_database(const EncoderParams& params, const LabeledEmbeddings& data);

struct Hit {
  std::size_t index = 0;
  double score = 0.0;
  bool operator==(const Hit&) const = default;
};

// Exact top-`count` support items by table score, descending; ties go to the
// lower index. `exclude` drops one database index (the query itself).
std::vector<Hit> query_topk(const CodeDatabase& db, const ScoreTable& query, std::size_t count,
                            std::optional<std::size_t> exclude = std::nullopt);
std::vector<Hit> query_topk(const CodeDatabase& db, const ProbMatrix& query, std::size_t count,
                            std::optional<std::size_t> exclude = std::nullopt);

std::vector<ScoreTable> log_prob_tables(std::span<const ProbMatrix> queries);

// Fraction of queries with at least one same-class item among their top K,
// for every K in `ks`. When `same_split` is set, query i is database item i
// and is excluded from its own neighbor list.
std::vector<double> recall_at(const CodeDatabase& db, std::span<const ScoreTable> queries,
                              std::span<const std::uint32_t> query_labels,
                              std::span<const std::size_t> ks, bool same_split);

// Majority vote over the k nearest support items; ties go to the lowest class id.
double knn_top1(const CodeDatabase& db, std::span<const ScoreTable> queries,
                std::span<const std::uint32_t> query_labels, std::size_t k_neighbors = 200,
                bool same_split = false);

struct EpisodeSpec {
  std::uint32_t ways = 5;
  std::uint32_t shots = 1;
  std::uint32_t queries_per_class = 15;
  std::uint32_t episodes = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FewShotResult {
  double mean_accuracy = 0.0;
  // Half-width 1.96 sigma / sqrt(episodes).
  double ci95 = 0.0;
  std::vector<double> episode_accuracy;
};

// Episodes over precomputed distributions. Each class codeword is the argmax
// of the mean of its shots' distributions; queries go to the class whose
// codeword they score highest.
FewShotResult fewshot_episodes(std::span<const ProbMatrix> encoded,
                               std::span<const std::uint32_t> labels, std::uint32_t class_count,
                               const EpisodeSpec& spec);
FewShotResult fewshot_episode(const EncoderParams& params, const LabeledEmbeddings& data,
                              const EpisodeSpec& spec);

// Metric order used by metric_correlation.
inline constexpr std::array<const char*, 5> kCheckpointMetricNames = {
    "mutual_information", "5way_1shot", "10way_1shot", "20way_1shot", "recall_at_1"};

struct CheckpointMetrics {
  std::array<double, 5> values{};
};

struct CheckpointEvalConfig {
  std::uint32_t episodes = 500;
  std::uint32_t queries_per_class = 5;
  // I^ is averaged over balanced batches of mi_classes x mi_items_per_class.
  std::uint32_t mi_batches = 500;
  std::uint32_t mi_classes = 5;
  std::uint32_t mi_items_per_class = 16;
  std::uint64_t seed = 0;
};

CheckpointMetrics evaluate_checkpoint(const EncoderParams& params, const LabeledEmbeddings& data,
                                      const CheckpointEvalConfig& config);

// Pearson correlation; nullopt when either series has zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

using CorrelationMatrix = std::array<std::array<std::optional<double>, 5>, 5>;

CorrelationMatrix metric_correlation(std::span<const CheckpointMetrics> checkpoints);

}  // namespace dimco
