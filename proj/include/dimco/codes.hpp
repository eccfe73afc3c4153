#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dimco/errors.hpp"

namespace dimco {

// Probabilities are floored before any logarithm so that mismatches against
// (near) one-hot rows keep finite scores.
inline constexpr double kProbFloor = 1e-12;

using Symbol = std::uint32_t;

// A k-way d-dimensional code: d symbols, each drawn from {0, ..., k-1}.
struct CodeSpec {
  std::uint32_t k = 2;
  std::uint32_t d = 1;

  void validate() const;

  // ln |code space| = d ln k, in nats.
  double log_size() const;
  std::uint32_t bits_per_symbol() const;
  // Bytes occupied by one packed codeword (padded to a byte boundary).
  std::size_t bytes_per_code() const;
  std::size_t cells() const { return static_cast<std::size_t>(k) * d; }

  bool operator==(const CodeSpec&) const = default;
};

// Hard code of one input; length d, symbols < k.
using Codeword = std::vector<Symbol>;

void validate_codeword(const CodeSpec& spec, std::span<const Symbol> word);

// Row-stochastic d x k matrix of per-dimension categorical distributions.
//
// Every entry is floored at kProbFloor through the affine map
// p -> floor + (1 - k * floor) * p, which keeps rows exactly normalized and
// turns a one-hot row into (1 - (k-1) floor, floor, ..., floor).
class ProbMatrix {
 public:
  ProbMatrix() = default;

  // Row-wise softmax with max subtraction, followed by the floor map.
  static ProbMatrix from_logits(const CodeSpec& spec, std::span<const double> logits);
  // Validates non-negativity and row sums (1 +- 1e-9), then applies the floor map.
  static ProbMatrix from_probs(const CodeSpec& spec, std::span<const double> probs);
  static ProbMatrix uniform(const CodeSpec& spec);

  const CodeSpec& spec() const noexcept { return spec_; }
  double operator()(std::size_t dim, std::size_t symbol) const noexcept {
    return values_[dim * spec_.k + symbol];
  }
  std::span<const double> row(std::size_t dim) const noexcept {
    return {values_.data() + dim * spec_.k, spec_.k};
  }
  std::span<const double> values() const noexcept { return values_; }

 private:
  ProbMatrix(const CodeSpec& spec, std::vector<double> values)
      : spec_(spec), values_(std::move(values)) {}

  CodeSpec spec_;
  std::vector<double> values_;
};

// Unfloored softmax of each length-k row of `logits` into `out`.
void softmax_rows(const CodeSpec& spec, std::span<const double> logits, std::span<double> out);

// Per-dimension argmax; ties resolve to the lowest symbol.
Codeword argmax_codeword(const ProbMatrix& p);
Codeword argmax_codeword(const CodeSpec& spec, const ProbMatrix& p);

// sum_i ln p_{i, support_i}(query), in nats.
double log_prob_similarity(const ProbMatrix& query, std::span<const Symbol> support);

using DimSymbol = std::pair<std::uint32_t, Symbol>;

// Sum of ln p_{i,j}(query) over the given (dimension, symbol) pairs.
double partial_code_score(const ProbMatrix& query, std::span<const DimSymbol> assignment);

std::size_t hamming_distance(std::span<const Symbol> a, std::span<const Symbol> b);

// Bit-packed codewords. Each codeword occupies bytes_per_code() bytes; within
// that run, symbol i starts at bit i * bits_per_symbol, LSB first.
class PackedCodes {
 public:
  PackedCodes() = default;
  explicit PackedCodes(const CodeSpec& spec);

  static PackedCodes pack(const CodeSpec& spec, std::span<const Codeword> words);
  // Adopts an existing payload; its length must be count * bytes_per_code.
  static PackedCodes from_payload(const CodeSpec& spec, std::size_t count,
                                  std::vector<std::uint8_t> payload);

  void push_back(std::span<const Symbol> word);

  const CodeSpec& spec() const noexcept { return spec_; }
  std::size_t size() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }
  std::size_t bytes_per_code() const noexcept { return stride_; }
  std::span<const std::uint8_t> payload() const noexcept { return payload_; }

  Codeword unpack(std::size_t index) const;
  void unpack_into(std::size_t index, std::span<Symbol> out) const;

 private:
  void check_index(std::size_t index) const;

  CodeSpec spec_;
  std::size_t count_ = 0;
  std::size_t stride_ = 0;
  std::vector<std::uint8_t> payload_;
};

// Per-query d x k table; the score of a support codeword s is sum_i table(i, s_i),
// rounded once, so it does not depend on summation order.
// Every retrieval scorer (log-probability, Hamming, quantizer distances)
// reduces to one of these, so all methods share one ranking path.
class ScoreTable {
 public:
  ScoreTable() = default;
  ScoreTable(const CodeSpec& spec, std::vector<double> values);

  // table(i, j) = ln p_{i,j}(query).
  static ScoreTable log_probs(const ProbMatrix& query);
  // table(i, j) = -[j != word_i]; scores are negative Hamming distances.
  static ScoreTable hamming(const CodeSpec& spec, std::span<const Symbol> word);

  const CodeSpec& spec() const noexcept { return spec_; }
  double operator()(std::size_t dim, std::size_t symbol) const noexcept {
    return values_[dim * spec_.k + symbol];
  }
  double score(std::span<const Symbol> support) const;

 private:
  CodeSpec spec_;
  std::vector<double> values_;
};

}  // namespace dimco
