#include "dimco/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "dimco/infomax.hpp"

namespace dimco {

void CodeDatabase::validate() const {
  if (has_labels && labels.size() != packed.size()) {
    throw ShapeError("code database has " + std::to_string(packed.size()) + " codes but " +
                     std::to_string(labels.size()) + " labels");
  }
  if (!has_labels && !labels.empty()) throw ShapeError("unlabeled code database carries labels");
}

CodeDatabase make_database(const CodeSpec& spec, std::span<const Codeword> words,
                           std::span<const std::uint32_t> labels) {
  CodeDatabase db{PackedCodes::pack(spec, words), {labels.begin(), labels.end()}, true};
  db.validate();
  return db;
}

CodeDatabase build_database(const EncoderParams& params, const LabeledEmbeddings& data) {
  data.validate();
  const CodeSpec& spec = params.config().spec;
  CodeDatabase db{PackedCodes(spec), data.labels, true};
  if (data.size() == 0) return db;
  for (const auto& p : encode_batch(params, data.data)) db.packed.push_back(argmax_codeword(p));
  return db;
}

namespace {

bool ranks_before(const Hit& a, const Hit& b) {
  return a.score > b.score || (a.score == b.score && a.index < b.index);
}

}  // namespace

std::vector<Hit> query_topk(const CodeDatabase& db, const ScoreTable& query, std::size_t count,
                            std::optional<std::size_t> exclude) {
  if (!(query.spec() == db.spec())) throw ShapeError("query table does not match database code spec");
  std::vector<Hit> hits;
  hits.reserve(db.size());
  Codeword word(db.spec().d);
  for (std::size_t n = 0; n < db.size(); ++n) {
    if (exclude && *exclude == n) continue;
    db.packed.unpack_into(n, word);
    hits.push_back({n, query.score(word)});
  }
  count = std::min(count, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(count), hits.end(),
                    ranks_before);
  hits.resize(count);
  return hits;
}

std::vector<Hit> query_topk(const CodeDatabase& db, const ProbMatrix& query, std::size_t count,
                            std::optional<std::size_t> exclude) {
  return query_topk(db, ScoreTable::log_probs(query), count, exclude);
}

std::vector<ScoreTable> log_prob_tables(std::span<const ProbMatrix> queries) {
  std::vector<ScoreTable> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(ScoreTable::log_probs(q));
  return out;
}

namespace {

void check_eval_inputs(const CodeDatabase& db, std::span<const ScoreTable> queries,
                       std::span<const std::uint32_t> query_labels, bool same_split) {
  db.validate();
  if (!db.has_labels) throw ArgumentError("evaluation needs a labeled code database");
  if (queries.empty()) throw ArgumentError("query split is empty");
  if (db.size() == 0) throw ArgumentError("database split is empty");
  if (queries.size() != query_labels.size()) throw ShapeError("queries and query labels differ in length");
  if (same_split && queries.size() != db.size()) {
    throw ShapeError("same-split evaluation needs one query per database item");
  }
}

}  // namespace

std::vector<double> recall_at(const CodeDatabase& db, std::span<const ScoreTable> queries,
                              std::span<const std::uint32_t> query_labels,
                              std::span<const std::size_t> ks, bool same_split) {
  check_eval_inputs(db, queries, query_labels, same_split);
  if (ks.empty()) return {};
  const std::size_t max_k = *std::max_element(ks.begin(), ks.end());
  std::vector<std::size_t> hits(ks.size(), 0);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto ranked = query_topk(db, queries[q], max_k,
                                   same_split ? std::optional<std::size_t>(q) : std::nullopt);
    // Rank of the first same-class item, or ranked.size() if none.
    std::size_t first = ranked.size();
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      if (db.labels[ranked[r].index] == query_labels[q]) {
        first = r;
        break;
      }
    }
    for (std::size_t i = 0; i < ks.size(); ++i) hits[i] += first < ks[i];
  }
  std::vector<double> out(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    out[i] = static_cast<double>(hits[i]) / static_cast<double>(queries.size());
  }
  return out;
}

double knn_top1(const CodeDatabase& db, std::span<const ScoreTable> queries,
                std::span<const std::uint32_t> query_labels, std::size_t k_neighbors,
                bool same_split) {
  check_eval_inputs(db, queries, query_labels, same_split);
  if (k_neighbors == 0) throw ArgumentError("k_neighbors must be >= 1");
  const std::uint32_t classes =
      1 + std::max(*std::max_element(db.labels.begin(), db.labels.end()),
                   *std::max_element(query_labels.begin(), query_labels.end()));
  std::vector<std::size_t> votes(classes);
  std::size_t correct = 0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto ranked = query_topk(db, queries[q], k_neighbors,
                                   same_split ? std::optional<std::size_t>(q) : std::nullopt);
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& h : ranked) ++votes[db.labels[h.index]];
    const auto winner = static_cast<std::uint32_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    correct += winner == query_labels[q];
  }
  return static_cast<double>(correct) / static_cast<double>(queries.size());
}

void EpisodeSpec::validate() const {
  if (ways < 2) throw ConfigError("episodes need ways >= 2");
  if (shots < 1) throw ConfigError("episodes need shots >= 1");
  if (queries_per_class < 1) throw ConfigError("episodes need queries_per_class >= 1");
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
}

namespace {

// Argmax of the mean of several distributions.
Codeword mean_codeword(std::span<const ProbMatrix> encoded, std::span<const std::size_t> items) {
  const CodeSpec& spec = encoded[items.front()].spec();
  std::vector<double> mean(spec.cells(), 0.0);
  for (auto idx : items) {
    const auto v = encoded[idx].values();
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += v[c];
  }
  Codeword w(spec.d);
  for (std::size_t i = 0; i < spec.d; ++i) {
    const auto first = mean.begin() + static_cast<std::ptrdiff_t>(i * spec.k);
    w[i] = static_cast<Symbol>(std::max_element(first, first + spec.k) - first);
  }
  return w;
}

}  // namespace

FewShotResult fewshot_episodes(std::span<const ProbMatrix> encoded,
                               std::span<const std::uint32_t> labels, std::uint32_t class_count,
                               const EpisodeSpec& spec) {
  spec.validate();
  if (encoded.size() != labels.size()) throw ShapeError("encoded items and labels differ in length");
  std::vector<std::vector<std::size_t>> members(class_count);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] >= class_count) throw ArgumentError("label out of range");
    members[labels[n]].push_back(n);
  }
  const std::size_t needed = static_cast<std::size_t>(spec.shots) + spec.queries_per_class;
  // Ordered by first appearance so that renaming class ids leaves episodes unchanged.
  std::vector<std::uint32_t> eligible;
  for (std::uint32_t c = 0; c < class_count; ++c) {
    if (members[c].size() >= needed) eligible.push_back(c);
  }
  std::sort(eligible.begin(), eligible.end(),
            [&](std::uint32_t a, std::uint32_t b) { return members[a].front() < members[b].front(); });
  if (eligible.size() < spec.ways) {
    throw ArgumentError("only " + std::to_string(eligible.size()) + " classes have " +
                        std::to_string(needed) + " items; " + std::to_string(spec.ways) +
                        "-way episodes are impossible");
  }

  std::mt19937_64 rng(spec.seed);
  FewShotResult result;
  result.episode_accuracy.reserve(spec.episodes);
  std::vector<Codeword> class_codes(spec.ways);
  std::vector<std::vector<std::size_t>> episode_queries(spec.ways);
  for (std::uint32_t e = 0; e < spec.episodes; ++e) {
    for (std::size_t i = 0; i < spec.ways; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, eligible.size() - 1);
      std::swap(eligible[i], eligible[pick(rng)]);
    }
    for (std::size_t w = 0; w < spec.ways; ++w) {
      auto& pool = members[eligible[w]];
      for (std::size_t j = 0; j < needed; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, pool.size() - 1);
        std::swap(pool[j], pool[pick(rng)]);
      }
      class_codes[w] = mean_codeword(encoded, std::span(pool).first(spec.shots));
      episode_queries[w].assign(pool.begin() + spec.shots, pool.begin() + static_cast<std::ptrdiff_t>(needed));
    }
    std::size_t correct = 0;
    for (std::size_t w = 0; w < spec.ways; ++w) {
      for (auto q : episode_queries[w]) {
        std::size_t best = 0;
        double best_score = log_prob_similarity(encoded[q], class_codes[0]);
        for (std::size_t c = 1; c < spec.ways; ++c) {
          const double s = log_prob_similarity(encoded[q], class_codes[c]);
          if (s > best_score) {
            best_score = s;
            best = c;
          }
        }
        correct += best == w;
      }
    }
    result.episode_accuracy.push_back(static_cast<double>(correct) /
                                      static_cast<double>(spec.ways * spec.queries_per_class));
  }
  const double n = static_cast<double>(spec.episodes);
  result.mean_accuracy =
      std::accumulate(result.episode_accuracy.begin(), result.episode_accuracy.end(), 0.0) / n;
  if (spec.episodes > 1) {
    double ss = 0.0;
    for (double a : result.episode_accuracy) ss += (a - result.mean_accuracy) * (a - result.mean_accuracy);
    result.ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return result;
}

FewShotResult fewshot_episode(const EncoderParams& params, const LabeledEmbeddings& data,
                              const EpisodeSpec& spec) {
  data.validate();
  const auto encoded = encode_batch(params, data.data);
  return fewshot_episodes(encoded, data.labels, data.class_count, spec);
}

CheckpointMetrics evaluate_checkpoint(const EncoderParams& params, const LabeledEmbeddings& data,
                                      const CheckpointEvalConfig& config) {
  data.validate();
  const auto encoded = encode_batch(params, data.data);
  CheckpointMetrics m;

  std::mt19937_64 rng(config.seed);
  auto members = data.class_members();
  std::vector<std::uint32_t> classes;
  for (std::uint32_t c = 0; c < members.size(); ++c) {
    if (!members[c].empty()) classes.push_back(c);
  }
  if (classes.size() < config.mi_classes) throw ArgumentError("too few classes for MI batches");
  double mi = 0.0;
  for (std::uint32_t b = 0; b < config.mi_batches; ++b) {
    LabeledProbBatch batch{params.config().spec, data.class_count, {}, {}};
    for (std::size_t i = 0; i < config.mi_classes; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, classes.size() - 1);
      std::swap(classes[i], classes[pick(rng)]);
      const auto& pool = members[classes[i]];
      std::uniform_int_distribution<std::size_t> item(0, pool.size() - 1);
      for (std::size_t j = 0; j < config.mi_items_per_class; ++j) {
        const std::size_t idx = pool[item(rng)];
        batch.items.push_back(encoded[idx]);
        batch.labels.push_back(data.labels[idx]);
      }
    }
    mi += mutual_information_estimate(batch);
  }
  m.values[0] = mi / std::max<std::uint32_t>(1, config.mi_batches);

  const std::array<std::uint32_t, 3> ways = {5, 10, 20};
  for (std::size_t i = 0; i < ways.size(); ++i) {
    EpisodeSpec es{ways[i], 1, config.queries_per_class, config.episodes, config.seed + 1 + i};
    m.values[1 + i] = fewshot_episodes(encoded, data.labels, data.class_count, es).mean_accuracy;
  }

  CodeDatabase db{PackedCodes(params.config().spec), data.labels, true};
  for (const auto& p : encoded) db.packed.push_back(argmax_codeword(p));
  const std::array<std::size_t, 1> k1 = {1};
  m.values[4] = recall_at(db, log_prob_tables(encoded), data.labels, k1, true)[0];
  return m;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("pearson: series differ in length");
  if (a.size() < 2) return std::nullopt;
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

CorrelationMatrix metric_correlation(std::span<const CheckpointMetrics> checkpoints) {
  if (checkpoints.size() < 3) throw ArgumentError("metric correlation needs at least 3 checkpoints");
  std::array<std::vector<double>, 5> series;
  for (const auto& c : checkpoints) {
    for (std::size_t i = 0; i < 5; ++i) series[i].push_back(c.values[i]);
  }
  CorrelationMatrix out;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      out[i][j] = pearson(series[i], series[j]);
      if (i == j && out[i][j]) out[i][j] = 1.0;
    }
  }
  return out;
}

}  // namespace dimco
