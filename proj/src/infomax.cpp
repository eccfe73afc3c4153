#include "dimco/infomax.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dimco {

namespace {

// Stacked probabilities of a batch: item n, dimension i, symbol j at
// probs[(n * d + i) * k + j].
struct FlatBatch {
  CodeSpec spec;
  std::size_t n = 0;
  std::span<const double> probs;
  std::span<const std::uint32_t> labels;
  std::uint32_t class_count = 0;

  const double* item_row(std::size_t item, std::size_t dim) const {
    return probs.data() + (item * spec.d + dim) * spec.k;
  }
};

double entropy_unchecked(const double* p, std::size_t k) {
  double h = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
  }
  return h;
}

double summed_entropy(const std::vector<double>& mean, const CodeSpec& spec) {
  double h = 0.0;
  for (std::size_t i = 0; i < spec.d; ++i) h += entropy_unchecked(mean.data() + i * spec.k, spec.k);
  return h;
}

struct BatchMeans {
  std::vector<double> overall;                   // d*k
  std::vector<std::vector<double>> per_class;    // C x d*k (empty when class absent)
  std::vector<std::size_t> class_sizes;
};

BatchMeans compute_means(const FlatBatch& b) {
  const std::size_t cells = b.spec.cells();
  BatchMeans m;
  m.overall.assign(cells, 0.0);
  m.per_class.assign(b.class_count, {});
  m.class_sizes.assign(b.class_count, 0);
  for (std::size_t n = 0; n < b.n; ++n) {
    const std::uint32_t y = b.labels[n];
    if (m.per_class[y].empty()) m.per_class[y].assign(cells, 0.0);
    const double* p = b.item_row(n, 0);
    for (std::size_t c = 0; c < cells; ++c) {
      m.overall[c] += p[c];
      m.per_class[y][c] += p[c];
    }
    ++m.class_sizes[y];
  }
  for (double& v : m.overall) v /= static_cast<double>(b.n);
  for (std::size_t y = 0; y < b.class_count; ++y) {
    for (double& v : m.per_class[y]) v /= static_cast<double>(m.class_sizes[y]);
  }
  return m;
}

double conditional_from_means(const BatchMeans& m, const FlatBatch& b) {
  double h = 0.0;
  for (std::size_t y = 0; y < b.class_count; ++y) {
    if (m.class_sizes[y] == 0) continue;
    const double freq = static_cast<double>(m.class_sizes[y]) / static_cast<double>(b.n);
    h += freq * summed_entropy(m.per_class[y], b.spec);
  }
  return h;
}

void check_pairs(const CodeSpec& spec, std::span<const DimPair> pairs) {
  for (const auto& [a, c] : pairs) {
    if (a >= spec.d || c >= spec.d) {
      throw ArgumentError("regularizer pair (" + std::to_string(a) + ", " + std::to_string(c) +
                          ") out of range for d = " + std::to_string(spec.d));
    }
    if (a == c) throw ArgumentError("regularizer pair uses the same dimension twice");
  }
}

// Product of marginals and plug-in joint for one dimension pair.
struct PairTables {
  std::vector<double> product;  // k x k
  std::vector<double> joint;    // k x k, unclamped
};

PairTables pair_tables(const FlatBatch& b, const std::vector<double>& mean, const DimPair& pr) {
  const std::size_t k = b.spec.k;
  PairTables t;
  t.product.resize(k * k);
  t.joint.assign(k * k, 0.0);
  const double* u = mean.data() + pr.first * k;
  const double* v = mean.data() + pr.second * k;
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t l = 0; l < k; ++l) t.product[j * k + l] = u[j] * v[l];
  }
  for (std::size_t n = 0; n < b.n; ++n) {
    const double* pa = b.item_row(n, pr.first);
    const double* pb = b.item_row(n, pr.second);
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t l = 0; l < k; ++l) t.joint[j * k + l] += pa[j] * pb[l];
    }
  }
  for (double& x : t.joint) x /= static_cast<double>(b.n);
  return t;
}

double kl_product_joint(const PairTables& t) {
  double kl = 0.0;
  for (std::size_t c = 0; c < t.product.size(); ++c) {
    const double p = t.product[c];
    if (p > 0.0) kl += p * (std::log(p) - std::log(std::max(t.joint[c], kProbFloor)));
  }
  return kl;
}

RegularizerValue regularizer_flat(const FlatBatch& b, const std::vector<double>& mean,
                                  std::span<const DimPair> pairs) {
  check_pairs(b.spec, pairs);
  if (pairs.empty()) return {0.0, true};
  double s = 0.0;
  for (const auto& pr : pairs) s += kl_product_joint(pair_tables(b, mean, pr));
  // Rounding can leave a value a few ulps below zero when product == joint.
  return {std::max(0.0, s / static_cast<double>(pairs.size())), false};
}

LossReport loss_flat(const FlatBatch& b, const BatchMeans& m, double lambda,
                     std::span<const DimPair> pairs) {
  if (!(lambda >= 0.0)) throw ArgumentError("lambda must be >= 0");
  LossReport r;
  r.lambda = lambda;
  r.marginal_entropy = summed_entropy(m.overall, b.spec);
  r.conditional_entropy = conditional_from_means(m, b);
  r.mutual_information = r.marginal_entropy - r.conditional_entropy;
  const RegularizerValue reg = regularizer_flat(b, m.overall, pairs);
  r.regularizer = reg.value;
  r.regularizer_skipped = reg.no_pairs;
  r.total = -r.mutual_information + lambda * r.regularizer;
  return r;
}

struct Flattened {
  std::vector<double> probs;
  FlatBatch view;
};

Flattened flatten(const LabeledProbBatch& batch) {
  batch.validate();
  Flattened f;
  f.probs.reserve(batch.size() * batch.spec.cells());
  for (const auto& p : batch.items) f.probs.insert(f.probs.end(), p.values().begin(), p.values().end());
  f.view = FlatBatch{batch.spec, batch.size(), f.probs, batch.labels, batch.class_count};
  return f;
}

}  // namespace

void LabeledProbBatch::validate() const {
  spec.validate();
  if (items.empty()) throw ArgumentError("batch is empty");
  if (labels.size() != items.size()) {
    throw ShapeError("batch has " + std::to_string(items.size()) + " items but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (const auto& p : items) {
    if (!(p.spec() == spec)) throw ShapeError("batch item does not match the batch code spec");
  }
  for (auto y : labels) {
    if (y >= class_count) {
      throw ArgumentError("label " + std::to_string(y) + " >= class count " +
                          std::to_string(class_count));
    }
  }
}

double categorical_entropy(std::span<const double> probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw DomainError("entropy: negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw DomainError("entropy: probabilities sum to " + std::to_string(sum));
  }
  return entropy_unchecked(probs.data(), probs.size());
}

double marginal_entropy_estimate(const LabeledProbBatch& batch) {
  const Flattened f = flatten(batch);
  return summed_entropy(compute_means(f.view).overall, batch.spec);
}

double conditional_entropy_estimate(const LabeledProbBatch& batch) {
  const Flattened f = flatten(batch);
  return conditional_from_means(compute_means(f.view), f.view);
}

double mutual_information_estimate(const LabeledProbBatch& batch) {
  const Flattened f = flatten(batch);
  const BatchMeans m = compute_means(f.view);
  return summed_entropy(m.overall, batch.spec) - conditional_from_means(m, f.view);
}

RegularizerValue independence_regularizer(const LabeledProbBatch& batch,
                                          std::span<const DimPair> pairs) {
  const Flattened f = flatten(batch);
  return regularizer_flat(f.view, compute_means(f.view).overall, pairs);
}

LossReport total_loss(const LabeledProbBatch& batch, double lambda,
                      std::span<const DimPair> pairs) {
  const Flattened f = flatten(batch);
  return loss_flat(f.view, compute_means(f.view), lambda, pairs);
}

LabeledProbBatch make_batch(const CodeSpec& spec, std::span<const double> logits,
                            std::span<const std::uint32_t> labels, std::uint32_t class_count) {
  const std::size_t cells = spec.cells();
  if (logits.size() != labels.size() * cells) {
    throw ShapeError("logits size does not match labels.size() * d * k");
  }
  LabeledProbBatch b{spec, class_count, {}, {labels.begin(), labels.end()}};
  b.items.reserve(labels.size());
  for (std::size_t n = 0; n < labels.size(); ++n) {
    b.items.push_back(ProbMatrix::from_logits(spec, logits.subspan(n * cells, cells)));
  }
  return b;
}

LossGradient loss_gradient(const CodeSpec& spec, std::span<const double> logits,
                           std::span<const std::uint32_t> labels, std::uint32_t class_count,
                           double lambda, std::span<const DimPair> pairs) {
  spec.validate();
  const std::size_t n = labels.size();
  const std::size_t k = spec.k;
  const std::size_t cells = spec.cells();
  if (n == 0) throw ArgumentError("batch is empty");
  if (logits.size() != n * cells) throw ShapeError("logits size does not match labels.size() * d * k");
  for (double v : logits) {
    if (!std::isfinite(v)) throw DomainError("non-finite logit");
  }
  for (auto y : labels) {
    if (y >= class_count) throw ArgumentError("label out of range");
  }
  check_pairs(spec, pairs);

  // q: plain softmax, p: floored probabilities the loss actually sees.
  std::vector<double> q(n * cells), p(n * cells);
  const double shrink = 1.0 - static_cast<double>(k) * kProbFloor;
  for (std::size_t item = 0; item < n; ++item) {
    softmax_rows(spec, logits.subspan(item * cells, cells), {q.data() + item * cells, cells});
  }
  for (std::size_t c = 0; c < p.size(); ++c) p[c] = kProbFloor + shrink * q[c];

  const FlatBatch fb{spec, n, p, labels, class_count};
  const BatchMeans m = compute_means(fb);

  LossGradient out;
  out.report = loss_flat(fb, m, lambda, pairs);

  // dL/dp, starting with the -I^ term: (ln pbar_ij - ln pbar^{y_n}_ij) / n.
  std::vector<double> gp(n * cells);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t item = 0; item < n; ++item) {
    const auto& cm = m.per_class[labels[item]];
    for (std::size_t c = 0; c < cells; ++c) {
      gp[item * cells + c] = (std::log(m.overall[c]) - std::log(cm[c])) * inv_n;
    }
  }

  if (!pairs.empty() && lambda > 0.0) {
    const double w = lambda / static_cast<double>(pairs.size());
    std::vector<double> g_prod(k * k), g_joint(k * k), row_a(k), row_b(k);
    for (const auto& pr : pairs) {
      const PairTables t = pair_tables(fb, m.overall, pr);
      for (std::size_t c = 0; c < k * k; ++c) {
        const double jc = std::max(t.joint[c], kProbFloor);
        g_prod[c] = std::log(t.product[c]) + 1.0 - std::log(jc);
        g_joint[c] = t.joint[c] > kProbFloor ? -t.product[c] / t.joint[c] : 0.0;
      }
      const double* u = m.overall.data() + pr.first * k;
      const double* v = m.overall.data() + pr.second * k;
      // Marginal paths are identical for every item.
      for (std::size_t j = 0; j < k; ++j) {
        double sa = 0.0;
        for (std::size_t l = 0; l < k; ++l) sa += g_prod[j * k + l] * v[l];
        row_a[j] = sa;
      }
      for (std::size_t l = 0; l < k; ++l) {
        double sb = 0.0;
        for (std::size_t j = 0; j < k; ++j) sb += g_prod[j * k + l] * u[j];
        row_b[l] = sb;
      }
      for (std::size_t item = 0; item < n; ++item) {
        const double* pa = fb.item_row(item, pr.first);
        const double* pb = fb.item_row(item, pr.second);
        double* ga = gp.data() + (item * spec.d + pr.first) * k;
        double* gb = gp.data() + (item * spec.d + pr.second) * k;
        for (std::size_t j = 0; j < k; ++j) {
          double s = row_a[j];
          for (std::size_t l = 0; l < k; ++l) s += g_joint[j * k + l] * pb[l];
          ga[j] += w * s * inv_n;
        }
        for (std::size_t l = 0; l < k; ++l) {
          double s = row_b[l];
          for (std::size_t j = 0; j < k; ++j) s += g_joint[j * k + l] * pa[j];
          gb[l] += w * s * inv_n;
        }
      }
    }
  }

  // Through the floor map and the row softmax.
  out.logits_grad.resize(n * cells);
  for (std::size_t r = 0; r < n * spec.d; ++r) {
    const double* qr = q.data() + r * k;
    const double* gr = gp.data() + r * k;
    double dot = 0.0;
    for (std::size_t j = 0; j < k; ++j) dot += qr[j] * gr[j];
    for (std::size_t j = 0; j < k; ++j) out.logits_grad[r * k + j] = shrink * qr[j] * (gr[j] - dot);
  }
  return out;
}

std::vector<DimPair> sample_dim_pairs(std::uint32_t d, std::size_t count, std::mt19937_64& rng) {
  std::vector<DimPair> all;
  for (std::uint32_t a = 0; a < d; ++a) {
    for (std::uint32_t b = a + 1; b < d; ++b) all.emplace_back(a, b);
  }
  count = std::min(count, all.size());
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(count);
  return all;
}

}  // namespace dimco
