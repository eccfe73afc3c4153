#include "dimco/codes.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <string>

namespace dimco {

namespace {

double floor_map(double p, std::uint32_t k) {
  return kProbFloor + (1.0 - static_cast<double>(k) * kProbFloor) * p;
}

double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

// Correctly rounded running sum (Shewchuk partials with half-even final
// rounding). The result does not depend on the order of the terms, so equal
// multisets of table entries always produce equal scores.
class ExactSum {
 public:
  void add(double x) {
    std::size_t i = 0;
    for (std::size_t j = 0; j < n_; ++j) {
      double y = partials_[j];
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[i++] = lo;
      x = hi;
    }
    partials_[i] = x;
    n_ = i + 1;
  }

  double value() const {
    if (n_ == 0) return 0.0;
    std::size_t n = n_ - 1;
    double hi = partials_[n], lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials_[--n];
      hi = x + y;
      lo = y - (hi - x);
      if (lo != 0.0) break;
    }
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
      const double y = lo * 2.0;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

 private:
  // Nonoverlapping partials of finite doubles never exceed ~40 entries.
  std::array<double, 64> partials_{};
  std::size_t n_ = 0;
};

void check_size(const CodeSpec& spec, std::size_t n, const char* what) {
  if (n != spec.cells()) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(spec.cells()) +
                     " values for a " + std::to_string(spec.d) + "x" + std::to_string(spec.k) +
                     " matrix, got " + std::to_string(n));
  }
}

}  // namespace

void CodeSpec::validate() const {
  if (k < 2) throw ConfigError("code spec: k must be >= 2, got " + std::to_string(k));
  if (d < 1) throw ConfigError("code spec: d must be >= 1");
}

double CodeSpec::log_size() const { return d * std::log(static_cast<double>(k)); }

std::uint32_t CodeSpec::bits_per_symbol() const {
  return static_cast<std::uint32_t>(std::bit_width(k - 1));
}

std::size_t CodeSpec::bytes_per_code() const {
  return (static_cast<std::size_t>(d) * bits_per_symbol() + 7) / 8;
}

void validate_codeword(const CodeSpec& spec, std::span<const Symbol> word) {
  if (word.size() != spec.d) {
    throw ShapeError("codeword length " + std::to_string(word.size()) + " != d = " +
                     std::to_string(spec.d));
  }
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (word[i] >= spec.k) {
      throw DomainError("symbol " + std::to_string(word[i]) + " at dimension " +
                        std::to_string(i) + " is out of range for k = " + std::to_string(spec.k));
    }
  }
}

void softmax_rows(const CodeSpec& spec, std::span<const double> logits, std::span<double> out) {
  check_size(spec, logits.size(), "softmax");
  check_size(spec, out.size(), "softmax");
  const std::size_t k = spec.k;
  for (std::size_t i = 0; i < spec.d; ++i) {
    const double* l = logits.data() + i * k;
    double* o = out.data() + i * k;
    const double m = *std::max_element(l, l + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      o[j] = std::exp(l[j] - m);
      z += o[j];
    }
    for (std::size_t j = 0; j < k; ++j) o[j] /= z;
  }
}

ProbMatrix ProbMatrix::from_logits(const CodeSpec& spec, std::span<const double> logits) {
  spec.validate();
  check_size(spec, logits.size(), "logits");
  for (double v : logits) {
    if (!std::isfinite(v)) throw DomainError("logits must be finite");
  }
  std::vector<double> p(spec.cells());
  softmax_rows(spec, logits, p);
  for (double& v : p) v = floor_map(v, spec.k);
  return ProbMatrix(spec, std::move(p));
}

ProbMatrix ProbMatrix::from_probs(const CodeSpec& spec, std::span<const double> probs) {
  spec.validate();
  check_size(spec, probs.size(), "probabilities");
  std::vector<double> p(probs.begin(), probs.end());
  for (std::size_t i = 0; i < spec.d; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < spec.k; ++j) {
      const double v = p[i * spec.k + j];
      if (!(v >= 0.0)) {
        throw DomainError("probability row " + std::to_string(i) + " has a negative entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw DomainError("probability row " + std::to_string(i) + " sums to " +
                        std::to_string(sum));
    }
  }
  for (double& v : p) v = floor_map(v, spec.k);
  return ProbMatrix(spec, std::move(p));
}

ProbMatrix ProbMatrix::uniform(const CodeSpec& spec) {
  spec.validate();
  return ProbMatrix(spec, std::vector<double>(spec.cells(), 1.0 / spec.k));
}

Codeword argmax_codeword(const ProbMatrix& p) {
  const CodeSpec& spec = p.spec();
  Codeword word(spec.d);
  for (std::size_t i = 0; i < spec.d; ++i) {
    const auto row = p.row(i);
    // max_element returns the first maximum, which is the tie-break we want.
    word[i] = static_cast<Symbol>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return word;
}

Codeword argmax_codeword(const CodeSpec& spec, const ProbMatrix& p) {
  if (!(p.spec() == spec)) {
    throw ShapeError("probability matrix is " + std::to_string(p.spec().d) + "x" +
                     std::to_string(p.spec().k) + ", expected " + std::to_string(spec.d) + "x" +
                     std::to_string(spec.k));
  }
  return argmax_codeword(p);
}

double log_prob_similarity(const ProbMatrix& query, std::span<const Symbol> support) {
  validate_codeword(query.spec(), support);
  ExactSum s;
  for (std::size_t i = 0; i < support.size(); ++i) s.add(safe_log(query(i, support[i])));
  return s.value();
}

double partial_code_score(const ProbMatrix& query, std::span<const DimSymbol> assignment) {
  const CodeSpec& spec = query.spec();
  std::vector<bool> seen(spec.d, false);
  ExactSum s;
  for (const auto& [dim, sym] : assignment) {
    if (dim >= spec.d) {
      throw ArgumentError("dimension " + std::to_string(dim) + " out of range");
    }
    if (sym >= spec.k) {
      throw DomainError("symbol " + std::to_string(sym) + " out of range");
    }
    if (seen[dim]) throw ArgumentError("duplicate dimension " + std::to_string(dim));
    seen[dim] = true;
    s.add(safe_log(query(dim, sym)));
  }
  return s.value();
}

std::size_t hamming_distance(std::span<const Symbol> a, std::span<const Symbol> b) {
  if (a.size() != b.size()) {
    throw ShapeError("hamming distance between codewords of length " + std::to_string(a.size()) +
                     " and " + std::to_string(b.size()));
  }
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
  return n;
}

PackedCodes::PackedCodes(const CodeSpec& spec) : spec_(spec), stride_(spec.bytes_per_code()) {
  spec.validate();
}

PackedCodes PackedCodes::pack(const CodeSpec& spec, std::span<const Codeword> words) {
  PackedCodes out(spec);
  out.payload_.reserve(words.size() * out.stride_);
  for (const auto& w : words) out.push_back(w);
  return out;
}

PackedCodes PackedCodes::from_payload(const CodeSpec& spec, std::size_t count,
                                      std::vector<std::uint8_t> payload) {
  PackedCodes out(spec);
  if (payload.size() != count * out.stride_) {
    throw ShapeError("packed payload has " + std::to_string(payload.size()) + " bytes, expected " +
                     std::to_string(count * out.stride_));
  }
  out.count_ = count;
  out.payload_ = std::move(payload);
  return out;
}

void PackedCodes::push_back(std::span<const Symbol> word) {
  validate_codeword(spec_, word);
  const std::size_t base = payload_.size();
  payload_.resize(base + stride_, 0);
  const std::uint32_t bits = spec_.bits_per_symbol();
  std::size_t bit = 0;
  for (Symbol s : word) {
    std::uint64_t v = static_cast<std::uint64_t>(s) << (bit % 8);
    for (std::size_t byte = bit / 8; v != 0; ++byte, v >>= 8) {
      payload_[base + byte] |= static_cast<std::uint8_t>(v & 0xffu);
    }
    bit += bits;
  }
  ++count_;
}

void PackedCodes::check_index(std::size_t index) const {
  if (index >= count_) {
    throw RangeError("code index " + std::to_string(index) + " >= " + std::to_string(count_));
  }
}

Codeword PackedCodes::unpack(std::size_t index) const {
  Codeword w(spec_.d);
  unpack_into(index, w);
  return w;
}

void PackedCodes::unpack_into(std::size_t index, std::span<Symbol> out) const {
  check_index(index);
  if (out.size() != spec_.d) throw ShapeError("unpack buffer length != d");
  const std::uint8_t* run = payload_.data() + index * stride_;
  const std::uint32_t bits = spec_.bits_per_symbol();
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  std::size_t bit = 0;
  for (std::size_t i = 0; i < spec_.d; ++i, bit += bits) {
    const std::size_t first = bit / 8;
    const std::size_t last = std::min(stride_, (bit + bits + 7) / 8);
    std::uint64_t v = 0;
    for (std::size_t b = first; b < last; ++b) v |= std::uint64_t{run[b]} << (8 * (b - first));
    out[i] = static_cast<Symbol>((v >> (bit % 8)) & mask);
  }
}

ScoreTable::ScoreTable(const CodeSpec& spec, std::vector<double> values)
    : spec_(spec), values_(std::move(values)) {
  check_size(spec, values_.size(), "score table");
}

ScoreTable ScoreTable::log_probs(const ProbMatrix& query) {
  std::vector<double> t(query.values().size());
  std::transform(query.values().begin(), query.values().end(), t.begin(), safe_log);
  return ScoreTable(query.spec(), std::move(t));
}

ScoreTable ScoreTable::hamming(const CodeSpec& spec, std::span<const Symbol> word) {
  validate_codeword(spec, word);
  std::vector<double> t(spec.cells(), -1.0);
  for (std::size_t i = 0; i < spec.d; ++i) t[i * spec.k + word[i]] = 0.0;
  return ScoreTable(spec, std::move(t));
}

double ScoreTable::score(std::span<const Symbol> support) const {
  ExactSum s;
  for (std::size_t i = 0; i < support.size(); ++i) s.add(values_[i * spec_.k + support[i]]);
  return s.value();
}

}  // namespace dimco
