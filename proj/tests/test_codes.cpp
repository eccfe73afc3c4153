#include <cmath>
#include <numeric>
#include <random>

#include "dimco/codes.hpp"
#include "doctest.h"

using namespace dimco;

namespace {

ProbMatrix random_prob(const CodeSpec& spec, std::mt19937_64& rng, double scale = 2.0) {
  std::normal_distribution<double> z(0.0, scale);
  std::vector<double> l(spec.cells());
  for (double& v : l) v = z(rng);
  return ProbMatrix::from_logits(spec, l);
}

Codeword random_word(const CodeSpec& spec, std::mt19937_64& rng) {
  std::uniform_int_distribution<Symbol> s(0, spec.k - 1);
  Codeword w(spec.d);
  for (auto& x : w) x = s(rng);
  return w;
}

ProbMatrix one_hot(const CodeSpec& spec, const Codeword& w) {
  std::vector<double> p(spec.cells(), 0.0);
  for (std::size_t i = 0; i < spec.d; ++i) p[i * spec.k + w[i]] = 1.0;
  return ProbMatrix::from_probs(spec, p);
}

}  // namespace

TEST_CASE("code spec arithmetic") {
  CHECK(CodeSpec{16, 4}.bytes_per_code() == 2);
  CHECK(CodeSpec{2, 8}.bytes_per_code() == 1);
  CHECK(CodeSpec{5, 7}.bits_per_symbol() == 3);
  CHECK(CodeSpec{5, 7}.bytes_per_code() == 3);
  CHECK(CodeSpec{256, 3}.bits_per_symbol() == 8);
  CHECK(CodeSpec{257, 1}.bits_per_symbol() == 9);
  CHECK(CodeSpec{16, 4}.log_size() == doctest::Approx(4 * std::log(16.0)));
  CHECK_THROWS_AS(CodeSpec({1, 3}).validate(), ConfigError);
  CHECK_THROWS_AS(CodeSpec({3, 0}).validate(), ConfigError);
}

TEST_CASE("prob matrix rows are normalized and floored") {
  std::mt19937_64 rng(1);
  const CodeSpec spec{4, 3};
  const auto p = random_prob(spec, rng, 30.0);
  for (std::size_t i = 0; i < spec.d; ++i) {
    const auto r = p.row(i);
    CHECK(std::accumulate(r.begin(), r.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (double v : r) CHECK(v >= kProbFloor);
  }
  const std::vector<double> big{1000.0, 0.0};
  const auto q = ProbMatrix::from_logits({2, 1}, big);
  CHECK(q(0, 0) == doctest::Approx(1.0));
  CHECK(q(0, 1) >= kProbFloor);
  CHECK(std::isfinite(std::log(q(0, 1))));

  const std::vector<double> bad{0.5, 0.6};
  CHECK_THROWS_AS(ProbMatrix::from_probs({2, 1}, bad), DomainError);
  const std::vector<double> neg{1.5, -0.5};
  CHECK_THROWS_AS(ProbMatrix::from_probs({2, 1}, neg), DomainError);
  const std::vector<double> short_row{1.0};
  CHECK_THROWS_AS(ProbMatrix::from_probs({2, 1}, short_row), ShapeError);
}

TEST_CASE("argmax codeword") {
  const std::vector<double> a{0.2, 0.5, 0.3};
  CHECK(argmax_codeword(ProbMatrix::from_probs({3, 1}, a)) == Codeword{1});

  const std::vector<double> tie{0.5, 0.5, 0.5, 0.5};
  CHECK(argmax_codeword(ProbMatrix::from_probs({2, 2}, tie)) == Codeword{0, 0});

  const CodeSpec spec{4, 3};
  CHECK(argmax_codeword(one_hot(spec, {2, 0, 3})) == Codeword{2, 0, 3});

  CHECK_THROWS_AS(argmax_codeword(CodeSpec{4, 2}, one_hot(spec, {2, 0, 3})), ShapeError);
}

TEST_CASE("argmax is invariant to per-row logit shifts and probability rescaling") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z(0.0, 3.0);
  const CodeSpec spec{5, 4};
  for (int t = 0; t < 200; ++t) {
    std::vector<double> l(spec.cells());
    for (double& v : l) v = z(rng);
    const auto base = argmax_codeword(ProbMatrix::from_logits(spec, l));
    auto shifted = l;
    for (std::size_t i = 0; i < spec.d; ++i) {
      const double c = z(rng) * 10.0;
      for (std::size_t j = 0; j < spec.k; ++j) shifted[i * spec.k + j] += c;
    }
    CHECK(argmax_codeword(ProbMatrix::from_logits(spec, shifted)) == base);

    // Rescaling a row of probabilities then renormalizing.
    auto p = ProbMatrix::from_logits(spec, l);
    std::vector<double> scaled(p.values().begin(), p.values().end());
    for (std::size_t i = 0; i < spec.d; ++i) {
      const double c = std::exp(z(rng));
      double s = 0.0;
      for (std::size_t j = 0; j < spec.k; ++j) s += (scaled[i * spec.k + j] *= c);
      for (std::size_t j = 0; j < spec.k; ++j) scaled[i * spec.k + j] /= s;
    }
    CHECK(argmax_codeword(ProbMatrix::from_probs(spec, scaled)) == base);
  }
}

TEST_CASE("log-probability similarity") {
  const std::vector<double> rows{0.7, 0.3, 0.2, 0.8};
  const auto q = ProbMatrix::from_probs({2, 2}, rows);
  const Codeword support{0, 1};
  const double expected = std::log(0.7) + std::log(0.8);
  CHECK(expected == doctest::Approx(-0.57982).epsilon(1e-5));
  CHECK(std::abs(log_prob_similarity(q, support) - expected) < 1e-9);

  const CodeSpec spec{4, 3};
  const Codeword w{1, 3, 0};
  const double self = log_prob_similarity(one_hot(spec, w), w);
  CHECK(self <= 0.0);
  CHECK(self >= spec.d * std::log(1.0 - (spec.k - 1) * kProbFloor) - 1e-15);

  CHECK(log_prob_similarity(ProbMatrix::uniform(spec), w) == doctest::Approx(3 * std::log(0.25)));

  const Codeword out_of_range{1, 4, 0};
  CHECK_THROWS_AS(log_prob_similarity(one_hot(spec, w), out_of_range), DomainError);
  const Codeword too_short{1, 3};
  CHECK_THROWS_AS(log_prob_similarity(one_hot(spec, w), too_short), ShapeError);
}

TEST_CASE("similarity is equivariant under consistent symbol relabeling") {
  std::mt19937_64 rng(11);
  const CodeSpec spec{5, 3};
  for (int t = 0; t < 100; ++t) {
    const auto q = random_prob(spec, rng);
    const auto s = random_word(spec, rng);
    std::vector<std::vector<Symbol>> perm(spec.d, std::vector<Symbol>(spec.k));
    for (auto& p : perm) {
      std::iota(p.begin(), p.end(), 0u);
      std::shuffle(p.begin(), p.end(), rng);
    }
    std::vector<double> qp(spec.cells());
    Codeword sp(spec.d);
    for (std::size_t i = 0; i < spec.d; ++i) {
      for (std::size_t j = 0; j < spec.k; ++j) qp[i * spec.k + perm[i][j]] = q(i, j);
      sp[i] = perm[i][s[i]];
    }
    // qp already carries the floor, so re-flooring shifts it by O(floor).
    CHECK(log_prob_similarity(ProbMatrix::from_probs(spec, qp), sp) ==
          doctest::Approx(log_prob_similarity(q, s)).epsilon(1e-9));
  }
}

TEST_CASE("one-hot queries score by match count") {
  std::mt19937_64 rng(3);
  const CodeSpec spec{4, 6};
  const double hit = std::log(1.0 - (spec.k - 1) * kProbFloor);
  const double miss = std::log(kProbFloor);
  for (int t = 0; t < 100; ++t) {
    const auto qw = random_word(spec, rng);
    const auto q = one_hot(spec, qw);
    const auto s = random_word(spec, rng);
    const std::size_t h = hamming_distance(qw, s);
    const double m = static_cast<double>(spec.d - h);
    CHECK(log_prob_similarity(q, s) == doctest::Approx(m * hit + static_cast<double>(h) * miss).epsilon(1e-12));
  }
}

TEST_CASE("partial code score") {
  std::mt19937_64 rng(5);
  const CodeSpec spec{6, 4};
  const auto q = random_prob(spec, rng);
  CHECK(partial_code_score(q, {}) == 0.0);

  const auto w = argmax_codeword(q);
  std::vector<DimSymbol> full;
  for (std::uint32_t i = 0; i < spec.d; ++i) full.emplace_back(i, w[i]);
  CHECK(partial_code_score(q, full) == log_prob_similarity(q, w));

  const std::vector<DimSymbol> some{{1, 2}, {3, 5}};
  CHECK(partial_code_score(q, some) == doctest::Approx(std::log(q(1, 2)) + std::log(q(3, 5))));

  const std::vector<DimSymbol> dup{{1, 2}, {1, 3}};
  CHECK_THROWS_AS(partial_code_score(q, dup), ArgumentError);
  const std::vector<DimSymbol> bad_sym{{0, 6}};
  CHECK_THROWS_AS(partial_code_score(q, bad_sym), DomainError);
}

TEST_CASE("hamming distance") {
  const Codeword a{0, 1, 2};
  CHECK(hamming_distance(a, a) == 0);
  CHECK(hamming_distance(a, Codeword{0, 2, 2}) == 1);
  const Codeword z(8, 0), o(8, 1);
  CHECK(hamming_distance(z, o) == 8);
  CHECK_THROWS_AS(hamming_distance(a, Codeword{0, 1}), ShapeError);
}

TEST_CASE("packed codes round-trip against a plain array") {
  CHECK(PackedCodes::pack({16, 4}, std::vector<Codeword>{{1, 2, 3, 15}}).payload().size() == 2);
  CHECK(PackedCodes::pack({2, 8}, std::vector<Codeword>{{1, 0, 1, 0, 1, 0, 1, 1}}).payload().size() == 1);

  // LSB-first layout: symbols 1,2,3,15 with 4 bits each -> bytes 0x21, 0xF3.
  const auto packed = PackedCodes::pack({16, 4}, std::vector<Codeword>{{1, 2, 3, 15}});
  CHECK(packed.payload()[0] == 0x21);
  CHECK(packed.payload()[1] == 0xF3);

  std::mt19937_64 rng(99);
  for (const CodeSpec spec : {CodeSpec{5, 7}, CodeSpec{2, 13}, CodeSpec{300, 5}, CodeSpec{65535, 3}, CodeSpec{7, 1}}) {
    std::vector<Codeword> words;
    for (int i = 0; i < 1000; ++i) words.push_back(random_word(spec, rng));
    const auto pc = PackedCodes::pack(spec, words);
    REQUIRE(pc.size() == words.size());
    CHECK(pc.payload().size() == words.size() * ((spec.d * spec.bits_per_symbol() + 7) / 8));
    bool all = true;
    for (std::size_t i = 0; i < words.size(); ++i) all = all && pc.unpack(i) == words[i];
    CHECK(all);
  }
  CHECK_THROWS_AS(packed.unpack(1), RangeError);
  CHECK_THROWS_AS(PackedCodes::pack({4, 2}, std::vector<Codeword>{{1, 4}}), DomainError);
}

TEST_CASE("score tables reproduce the direct similarity") {
  std::mt19937_64 rng(17);
  const CodeSpec spec{8, 5};
  for (int t = 0; t < 50; ++t) {
    const auto q = random_prob(spec, rng);
    const auto s = random_word(spec, rng);
    CHECK(ScoreTable::log_probs(q).score(s) == log_prob_similarity(q, s));
    const auto w = random_word(spec, rng);
    CHECK(ScoreTable::hamming(spec, w).score(s) == -static_cast<double>(hamming_distance(w, s)));
  }
}
