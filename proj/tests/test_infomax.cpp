#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dimco/infomax.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace dimco;

namespace {

struct RandomBatch {
  CodeSpec spec;
  std::uint32_t classes;
  std::vector<double> logits;
  std::vector<std::uint32_t> labels;

  LabeledProbBatch batch() const { return make_batch(spec, logits, labels, classes); }

  oracle::Cube cube() const {
    oracle::Cube c;
    const std::size_t cells = spec.cells();
    for (std::size_t n = 0; n < labels.size(); ++n) {
      std::vector<oracle::Real> block(logits.begin() + static_cast<std::ptrdiff_t>(n * cells),
                                      logits.begin() + static_cast<std::ptrdiff_t>((n + 1) * cells));
      c.push_back(oracle::floored_softmax(block, spec.d, spec.k));
    }
    return c;
  }
};

RandomBatch random_batch(std::mt19937_64& rng, std::size_t n, CodeSpec spec, std::uint32_t classes,
                         double scale = 1.5) {
  RandomBatch b{spec, classes, {}, {}};
  std::normal_distribution<double> z(0.0, scale);
  std::uniform_int_distribution<std::uint32_t> lab(0, classes - 1);
  b.logits.resize(n * spec.cells());
  for (double& v : b.logits) v = z(rng);
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(lab(rng));
  return b;
}

LabeledProbBatch batch_of(CodeSpec spec, std::uint32_t classes, std::vector<std::vector<double>> rows,
                          std::vector<std::uint32_t> labels) {
  LabeledProbBatch b;
  b.spec = spec;
  b.class_count = classes;
  for (const auto& r : rows) b.items.push_back(ProbMatrix::from_probs(spec, r));
  b.labels = std::move(labels);
  return b;
}

}  // namespace

TEST_CASE("categorical entropy") {
  const std::vector<double> u{0.25, 0.25, 0.25, 0.25};
  CHECK(categorical_entropy(u) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(categorical_entropy(u) == doctest::Approx(1.38629).epsilon(1e-5));
  const std::vector<double> one{0.0, 1.0, 0.0};
  CHECK(categorical_entropy(one) == 0.0);
  const std::vector<double> half{0.5, 0.5, 0.0, 0.0};
  CHECK(categorical_entropy(half) == doctest::Approx(0.69315).epsilon(1e-5));

  const std::vector<double> neg{1.1, -0.1};
  CHECK_THROWS_AS(categorical_entropy(neg), DomainError);
  const std::vector<double> unnorm{0.5, 0.4};
  CHECK_THROWS_AS(categorical_entropy(unnorm), DomainError);

  std::mt19937_64 rng(2);
  std::gamma_distribution<double> g(0.5, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> p(6);
    for (double& v : p) v = g(rng);
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= s;
    const double h = categorical_entropy(p);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(6.0) + 1e-12);
  }
}

TEST_CASE("marginal entropy estimate") {
  const CodeSpec s1{2, 1};
  CHECK(marginal_entropy_estimate(batch_of(s1, 2, {{1, 0}, {1, 0}, {1, 0}}, {0, 1, 0})) ==
        doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::abs(marginal_entropy_estimate(batch_of(s1, 2, {{1, 0}, {0, 1}}, {0, 1})) - std::log(2.0)) < 1e-12);

  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto rb = random_batch(rng, 8, {3, 2}, 3);
    const double want = static_cast<double>(oracle::marginal_entropy(rb.cube()));
    CHECK(std::abs(marginal_entropy_estimate(rb.batch()) - want) <= 1e-12);
  }

  LabeledProbBatch empty;
  empty.spec = s1;
  empty.class_count = 2;
  CHECK_THROWS_AS(marginal_entropy_estimate(empty), ArgumentError);
}

TEST_CASE("conditional entropy estimate") {
  const CodeSpec s1{3, 1};
  CHECK(conditional_entropy_estimate(batch_of(s1, 2, {{1, 0, 0}, {0, 0, 1}, {1, 0, 0}}, {0, 1, 0})) ==
        doctest::Approx(0.0).epsilon(1e-9));

  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    auto rb = random_batch(rng, 8, {3, 2}, 3);
    const auto cube = rb.cube();
    CHECK(std::abs(conditional_entropy_estimate(rb.batch()) -
                   static_cast<double>(oracle::conditional_entropy(cube, rb.labels))) <= 1e-12);

    std::fill(rb.labels.begin(), rb.labels.end(), 2u);
    const auto single = rb.batch();
    CHECK(std::abs(conditional_entropy_estimate(single) - marginal_entropy_estimate(single)) <= 1e-12);
  }

  auto bad = batch_of(s1, 2, {{1, 0, 0}}, {2});
  CHECK_THROWS_AS(conditional_entropy_estimate(bad), ArgumentError);
}

TEST_CASE("mutual information estimate") {
  const CodeSpec s1{2, 1};
  const auto informative = batch_of(s1, 2, {{1, 0}, {0, 1}}, {0, 1});
  CHECK(std::abs(mutual_information_estimate(informative) - std::log(2.0)) < 1e-9);

  std::mt19937_64 rng(10);
  auto rb = random_batch(rng, 6, {4, 2}, 3);
  std::fill(rb.labels.begin(), rb.labels.end(), 1u);
  CHECK(std::abs(mutual_information_estimate(rb.batch())) < 1e-12);

  const std::vector<double> row{0.1, 0.6, 0.3, 0.3, 0.3, 0.4};
  const auto same = batch_of({3, 2}, 3, {row, row, row, row}, {0, 1, 2, 1});
  CHECK(std::abs(mutual_information_estimate(same)) < 1e-12);
}

TEST_CASE("estimator bounds and invariances") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 200; ++t) {
    const CodeSpec spec{2 + static_cast<std::uint32_t>(t % 4), 1 + static_cast<std::uint32_t>(t % 3)};
    const auto rb = random_batch(rng, 3 + static_cast<std::size_t>(t % 9), spec, 4, 3.0);
    const auto b = rb.batch();
    const double hx = marginal_entropy_estimate(b);
    const double hxy = conditional_entropy_estimate(b);
    const double mi = mutual_information_estimate(b);
    CHECK(hxy >= -1e-12);
    CHECK(hxy <= hx + 1e-12);
    CHECK(hx <= spec.d * std::log(static_cast<double>(spec.k)) + 1e-12);
    CHECK(mi == doctest::Approx(hx - hxy).epsilon(1e-14));

    // Per-dimension contribution never exceeds the label entropy.
    std::vector<double> freq(4, 0.0);
    for (auto y : rb.labels) freq[y] += 1.0 / static_cast<double>(rb.labels.size());
    CHECK(mi <= spec.d * categorical_entropy(freq) + 1e-12);

    // Item order.
    auto shuffled = b;
    std::vector<std::size_t> order(b.size());
    std::iota(order.begin(), order.end(), 0u);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); ++i) {
      shuffled.items[i] = b.items[order[i]];
      shuffled.labels[i] = b.labels[order[i]];
    }
    CHECK(mutual_information_estimate(shuffled) == doctest::Approx(mi).epsilon(1e-12));

    // Label renaming.
    auto renamed = b;
    for (auto& y : renamed.labels) y = 3 - y;
    CHECK(mutual_information_estimate(renamed) == doctest::Approx(mi).epsilon(1e-12));

    // Duplication.
    auto doubled = b;
    doubled.items.insert(doubled.items.end(), b.items.begin(), b.items.end());
    doubled.labels.insert(doubled.labels.end(), b.labels.begin(), b.labels.end());
    CHECK(marginal_entropy_estimate(doubled) == doctest::Approx(hx).epsilon(1e-12));
    CHECK(conditional_entropy_estimate(doubled) == doctest::Approx(hxy).epsilon(1e-12));
    if (spec.d >= 2) {
      const std::vector<DimPair> pairs{{0, 1}};
      CHECK(independence_regularizer(doubled, pairs).value ==
            doctest::Approx(independence_regularizer(b, pairs).value).epsilon(1e-10));
    }
  }
}

TEST_CASE("independence regularizer") {
  const CodeSpec s{2, 2};
  const std::vector<DimPair> p01{{0, 1}};
  const std::vector<double> flat{0.5, 0.5, 0.5, 0.5};
  CHECK(independence_regularizer(batch_of(s, 1, {flat, flat, flat}, {0, 0, 0}), p01).value ==
        doctest::Approx(0.0).epsilon(1e-15));

  const auto two = batch_of(s, 2, {{0.8, 0.2, 0.8, 0.2}, {0.2, 0.8, 0.2, 0.8}}, {0, 1});
  const double kl = 0.5 * std::log(0.25 / 0.34) + 0.5 * std::log(0.25 / 0.16);
  CHECK(kl == doctest::Approx(0.06938).epsilon(1e-4));
  CHECK(std::abs(independence_regularizer(two, p01).value - kl) < 1e-9);

  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto one = random_batch(rng, 1, {4, 3}, 2).batch();
    const std::vector<DimPair> p{{0, 2}, {1, 2}};
    CHECK(std::abs(independence_regularizer(one, p).value) < 1e-12);
  }

  for (int t = 0; t < 20; ++t) {
    const auto rb = random_batch(rng, 7, {3, 3}, 2, 3.0);
    const std::vector<DimPair> p{{0, 1}, {2, 0}};
    const auto cube = rb.cube();
    const double want =
        static_cast<double>((oracle::pair_kl(cube, 0, 1, oracle::kFloor) + oracle::pair_kl(cube, 2, 0, oracle::kFloor)) / 2);
    CHECK(std::abs(independence_regularizer(rb.batch(), p).value - want) <= 1e-12);
    CHECK(independence_regularizer(rb.batch(), p).value >= 0.0);
  }

  const auto none = independence_regularizer(two, {});
  CHECK(none.value == 0.0);
  CHECK(none.no_pairs);
  const std::vector<DimPair> self{{1, 1}};
  CHECK_THROWS_AS(independence_regularizer(two, self), ArgumentError);
  const std::vector<DimPair> out{{0, 2}};
  CHECK_THROWS_AS(independence_regularizer(two, out), ArgumentError);
}

TEST_CASE("total loss composition") {
  const auto informative = batch_of({2, 1}, 2, {{1, 0}, {0, 1}}, {0, 1});
  const auto r = total_loss(informative);
  CHECK(r.lambda == 1.0);
  CHECK(r.regularizer_skipped);
  CHECK(std::abs(r.total + std::log(2.0)) < 1e-9);

  std::mt19937_64 rng(31);
  for (int t = 0; t < 20; ++t) {
    const auto rb = random_batch(rng, 8, {3, 3}, 3);
    const std::vector<DimPair> pairs{{0, 1}, {1, 2}};
    const auto zero = total_loss(rb.batch(), 0.0, pairs);
    CHECK(zero.total == -zero.mutual_information);

    const double lambda = 0.7;
    const auto rep = total_loss(rb.batch(), lambda, pairs);
    CHECK(rep.mutual_information == rep.marginal_entropy - rep.conditional_entropy);
    CHECK(rep.total == doctest::Approx(-rep.mutual_information + lambda * rep.regularizer).epsilon(1e-15));
    std::vector<oracle::Real> l(rb.logits.begin(), rb.logits.end());
    const double want = static_cast<double>(oracle::loss_from_logits(l, 8, 3, 3, rb.labels, lambda, pairs));
    CHECK(std::abs(rep.total - want) <= 1e-12);
  }
  CHECK_THROWS_AS(total_loss(informative, -1.0), ArgumentError);
}

TEST_CASE("loss gradient matches central differences") {
  std::mt19937_64 rng(41);
  double worst = 0.0;
  for (int t = 0; t < 30; ++t) {
    const std::uint32_t k = 2 + static_cast<std::uint32_t>(t % 3);
    const std::uint32_t d = 1 + static_cast<std::uint32_t>((t / 3) % 3);
    const std::size_t n = 2 + static_cast<std::size_t>(t % 7);
    const auto rb = random_batch(rng, n, {k, d}, 3);
    std::vector<DimPair> pairs;
    if (d >= 2) pairs = sample_dim_pairs(d, d, rng);
    const double lambda = (t % 2 == 0) ? 1.0 : 0.3;

    const auto g = loss_gradient(rb.spec, rb.logits, rb.labels, 3, lambda, pairs);
    REQUIRE(g.logits_grad.size() == rb.logits.size());
    std::vector<oracle::Real> x(rb.logits.begin(), rb.logits.end());
    auto f = [&](const std::vector<oracle::Real>& v) {
      return oracle::loss_from_logits(v, n, d, k, rb.labels, lambda, pairs);
    };
    for (std::size_t idx = 0; idx < x.size(); ++idx) {
      const double fd = static_cast<double>(oracle::central_difference(f, x, idx, 1e-5L));
      worst = std::max(worst, oracle::relative_error(g.logits_grad[idx], fd, 1e-6));
    }
    CHECK(g.report.total == doctest::Approx(total_loss(rb.batch(), lambda, pairs).total).epsilon(1e-13));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("loss gradient stationarity and symmetry") {
  // Every class mean equals the overall mean: -I^ is stationary.
  const CodeSpec spec{3, 2};
  std::vector<double> block{0.3, -1.2, 0.4, 2.0, 0.1, -0.5};
  std::vector<double> logits;
  for (int i = 0; i < 6; ++i) logits.insert(logits.end(), block.begin(), block.end());
  const std::vector<std::uint32_t> labels{0, 1, 2, 0, 1, 2};
  const auto g = loss_gradient(spec, logits, labels, 3, 0.0, {});
  double norm = 0.0;
  for (double v : g.logits_grad) norm += v * v;
  CHECK(std::sqrt(norm) <= 1e-6);

  // Perfectly separated saturated codes sit at the maximum I^ = ln 2.
  const std::vector<double> sat{40.0, -40.0, -40.0, 40.0};
  const std::vector<std::uint32_t> two{0, 1};
  const auto gs = loss_gradient({2, 1}, sat, two, 2, 0.0, {});
  double ns = 0.0;
  for (double v : gs.logits_grad) ns += v * v;
  CHECK(std::sqrt(ns) <= 1e-6);
  CHECK(gs.report.mutual_information == doctest::Approx(std::log(2.0)).epsilon(1e-9));

  // Uniform logits, balanced labels: same-class items receive identical gradients.
  const CodeSpec s3{4, 3};
  const std::vector<double> zeros(8 * s3.cells(), 0.0);
  const std::vector<std::uint32_t> bal{0, 1, 2, 3, 0, 1, 2, 3};
  const std::vector<DimPair> pairs{{0, 1}, {1, 2}, {0, 2}};
  const auto gu = loss_gradient(s3, zeros, bal, 4, 1.0, pairs);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t c = 0; c < s3.cells(); ++c) {
      CHECK(gu.logits_grad[a * s3.cells() + c] == gu.logits_grad[(a + 4) * s3.cells() + c]);
    }
  }

  std::vector<double> bad = zeros;
  bad[3] = std::nan("");
  CHECK_THROWS_AS(loss_gradient(s3, bad, bal, 4, 1.0, pairs), DomainError);
}

TEST_CASE("dimension pair sampling") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const auto pairs = sample_dim_pairs(8, 8, rng);
    REQUIRE(pairs.size() == 8);
    for (const auto& [a, b] : pairs) {
      CHECK(a != b);
      CHECK(a < 8);
      CHECK(b < 8);
    }
    auto norm = pairs;
    for (auto& [a, b] : norm) {
      if (a > b) std::swap(a, b);
    }
    std::sort(norm.begin(), norm.end());
    CHECK(std::adjacent_find(norm.begin(), norm.end()) == norm.end());
  }
  CHECK(sample_dim_pairs(3, 10, rng).size() == 3);
  CHECK(sample_dim_pairs(1, 4, rng).empty());
}
