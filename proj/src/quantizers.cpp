#include "dimco/quantizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace dimco {

namespace {

double sq_dist(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

std::size_t distinct_rows(const Matrix& points) {
  std::set<std::vector<double>> seen;
  for (std::size_t r = 0; r < points.rows; ++r) {
    seen.emplace(points.row(r).begin(), points.row(r).end());
  }
  return seen.size();
}

Matrix seed_plus_plus(const Matrix& points, std::uint32_t k, std::mt19937_64& rng) {
  const std::size_t n = points.rows, dim = points.cols;
  Matrix c(k, dim);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  const auto r0 = points.row(first(rng));
  std::copy(r0.begin(), r0.end(), c.row(0).begin());
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::uint32_t m = 1; m < k; ++m) {
    double total = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      best[p] = std::min(best[p], sq_dist(points.row(p).data(), c.row(m - 1).data(), dim));
      total += best[p];
    }
    std::size_t chosen = 0;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      chosen = n - 1;
      for (std::size_t p = 0; p < n; ++p) {
        acc += best[p];
        if (acc > target && best[p] > 0.0) {
          chosen = p;
          break;
        }
      }
    } else {
      chosen = first(rng);
    }
    const auto r = points.row(chosen);
    std::copy(r.begin(), r.end(), c.row(m).begin());
  }
  return c;
}

double assign(const Matrix& points, const Matrix& centroids, std::vector<std::uint32_t>& out,
              std::vector<double>& dist) {
  double inertia = 0.0;
  for (std::size_t p = 0; p < points.rows; ++p) {
    out[p] = nearest_centroid(centroids, points.row(p));
    dist[p] = sq_dist(points.row(p).data(), centroids.row(out[p]).data(), points.cols);
    inertia += dist[p];
  }
  return inertia;
}

}  // namespace

std::uint32_t nearest_centroid(const Matrix& centroids, std::span<const double> x) {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const double d = sq_dist(x.data(), centroids.row(c).data(), centroids.cols);
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::uint32_t>(c);
    }
  }
  return best;
}

KMeansResult kmeans(const Matrix& points, std::uint32_t k, std::uint64_t seed,
                    std::uint32_t max_iters, double tol) {
  if (k == 0) throw ArgumentError("kmeans: k must be >= 1");
  if (points.rows < k) {
    throw ArgumentError("kmeans: " + std::to_string(points.rows) + " points cannot fill " +
                        std::to_string(k) + " clusters");
  }
  KMeansResult res;
  if (distinct_rows(points) < k) {
    res.warnings.push_back("kmeans: fewer distinct points than clusters; centroids will repeat");
  }
  std::mt19937_64 rng(seed);
  res.centroids = seed_plus_plus(points, k, rng);
  const std::size_t dim = points.cols;
  res.assignment.assign(points.rows, 0);
  std::vector<double> dist(points.rows);
  std::vector<std::size_t> sizes(k);

  for (std::uint32_t it = 0; it < max_iters; ++it) {
    res.inertia_history.push_back(assign(points, res.centroids, res.assignment, dist));
    Matrix next(k, dim);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t p = 0; p < points.rows; ++p) {
      const auto c = res.assignment[p];
      ++sizes[c];
      for (std::size_t j = 0; j < dim; ++j) next(c, j) += points(p, j);
    }
    std::vector<bool> taken(points.rows, false);
    for (std::uint32_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) {
        for (std::size_t j = 0; j < dim; ++j) next(c, j) /= static_cast<double>(sizes[c]);
        continue;
      }
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t p = 0; p < points.rows; ++p) {
        if (!taken[p] && dist[p] > far_d) {
          far_d = dist[p];
          far = p;
        }
      }
      taken[far] = true;
      dist[far] = 0.0;
      std::copy(points.row(far).begin(), points.row(far).end(), next.row(c).begin());
    }
    double shift = 0.0;
    for (std::uint32_t c = 0; c < k; ++c) {
      shift = std::max(shift, std::sqrt(sq_dist(next.row(c).data(), res.centroids.row(c).data(), dim)));
    }
    res.centroids = std::move(next);
    res.iterations = it + 1;
    if (shift < tol) break;
  }
  res.inertia = assign(points, res.centroids, res.assignment, dist);
  return res;
}

PQCodebook pq_train(const Matrix& embeddings, const CodeSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (embeddings.cols == 0) throw ArgumentError("pq: embeddings have zero dimension");
  if (spec.k > embeddings.rows) {
    throw ArgumentError("pq: k = " + std::to_string(spec.k) + " exceeds the " +
                        std::to_string(embeddings.rows) + " training vectors");
  }
  PQCodebook cb;
  cb.spec = spec;
  cb.input_dim = static_cast<std::uint32_t>(embeddings.cols);
  cb.padded_dim = (cb.input_dim + spec.d - 1) / spec.d * spec.d;
  const std::size_t sub = cb.subspace_dim();
  for (std::uint32_t i = 0; i < spec.d; ++i) {
    Matrix part(embeddings.rows, sub);
    for (std::size_t r = 0; r < embeddings.rows; ++r) {
      for (std::size_t j = 0; j < sub; ++j) {
        const std::size_t col = i * sub + j;
        part(r, j) = col < cb.input_dim ? embeddings(r, col) : 0.0;
      }
    }
    KMeansResult km = kmeans(part, spec.k, seed + i);
    for (auto& w : km.warnings) cb.warnings.push_back("subspace " + std::to_string(i) + ": " + w);
    cb.centroids.push_back(std::move(km.centroids));
  }
  return cb;
}

namespace {

// Lloyd in one dimension. On sorted values every cell is a contiguous run, so
// the iteration can run to its exact fixed point. Levels start at evenly
// spaced order statistics; an empty cell takes the worst-quantized value.
std::vector<double> lloyd_levels(const std::vector<double>& sorted, std::size_t k, bool reseed) {
  const std::size_t n = sorted.size();
  std::vector<double> levels(k);
  for (std::size_t j = 0; j < k; ++j) levels[j] = sorted[(2 * j + 1) * n / (2 * k)];
  std::vector<std::size_t> ends(k), prev;
  for (;;) {
    std::sort(levels.begin(), levels.end());
    for (std::size_t j = 0; j + 1 < k; ++j) {
      const double mid = 0.5 * (levels[j] + levels[j + 1]);
      ends[j] = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), mid) - sorted.begin());
    }
    ends[k - 1] = n;
    std::size_t begin = 0, empty = k;
    for (std::size_t j = 0; j < k; ++j) {
      ends[j] = std::max(ends[j], begin);
      if (ends[j] == begin && empty == k) empty = j;
      begin = ends[j];
    }
    if (reseed && empty < k) {
      double worst = -1.0, value = levels[empty];
      begin = 0;
      for (std::size_t j = 0; j < k; ++j) {
        if (ends[j] > begin) {
          for (double x : {sorted[begin], sorted[ends[j] - 1]}) {
            if (std::abs(x - levels[j]) > worst) {
              worst = std::abs(x - levels[j]);
              value = x;
            }
          }
        }
        begin = ends[j];
      }
      levels[empty] = value;
      prev.clear();
      continue;
    }
    if (ends == prev) return levels;
    begin = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (ends[j] > begin) {
        long double sum = 0;
        for (std::size_t i = begin; i < ends[j]; ++i) sum += sorted[i];
        levels[j] = static_cast<double>(sum / static_cast<long double>(ends[j] - begin));
      }
      begin = ends[j];
    }
    prev = ends;
  }
}

std::vector<double> padded(const PQCodebook& cb, std::span<const double> x) {
  if (x.size() != cb.input_dim) {
    throw ShapeError("pq: vector has dimension " + std::to_string(x.size()) + ", codebook expects " +
                     std::to_string(cb.input_dim));
  }
  std::vector<double> v(cb.padded_dim, 0.0);
  std::copy(x.begin(), x.end(), v.begin());
  return v;
}

}  // namespace

Codeword pq_encode(const PQCodebook& codebook, std::span<const double> x) {
  const auto v = padded(codebook, x);
  const std::size_t sub = codebook.subspace_dim();
  Codeword w(codebook.spec.d);
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = nearest_centroid(codebook.centroids[i], std::span(v).subspan(i * sub, sub));
  }
  return w;
}

std::vector<double> pq_decode(const PQCodebook& codebook, std::span<const Symbol> code) {
  validate_codeword(codebook.spec, code);
  const std::size_t sub = codebook.subspace_dim();
  std::vector<double> v(codebook.padded_dim);
  for (std::size_t i = 0; i < code.size(); ++i) {
    const auto c = codebook.centroids[i].row(code[i]);
    std::copy(c.begin(), c.end(), v.begin() + static_cast<std::ptrdiff_t>(i * sub));
  }
  v.resize(codebook.input_dim);
  return v;
}

ScoreTable pq_query_table(const PQCodebook& codebook, std::span<const Symbol> code) {
  validate_codeword(codebook.spec, code);
  const CodeSpec& spec = codebook.spec;
  const std::size_t sub = codebook.subspace_dim();
  std::vector<double> t(spec.cells());
  for (std::size_t i = 0; i < spec.d; ++i) {
    const Matrix& c = codebook.centroids[i];
    for (std::size_t j = 0; j < spec.k; ++j) {
      t[i * spec.k + j] = -sq_dist(c.row(code[i]).data(), c.row(j).data(), sub);
    }
  }
  return ScoreTable(spec, std::move(t));
}

SQCodebook sq_train(const Matrix& embeddings, std::uint32_t k) {
  if (k < 2) throw ArgumentError("sq: k must be >= 2");
  if (embeddings.cols == 0) throw ArgumentError("sq: embeddings have zero dimension");
  if (k > embeddings.rows) throw ArgumentError("sq: k exceeds the number of training vectors");
  SQCodebook cb;
  cb.k = k;
  cb.dim = static_cast<std::uint32_t>(embeddings.cols);
  cb.levels = Matrix(cb.dim, k);
  std::vector<double> sorted(embeddings.rows);
  for (std::uint32_t j = 0; j < cb.dim; ++j) {
    for (std::size_t r = 0; r < embeddings.rows; ++r) sorted[r] = embeddings(r, j);
    std::sort(sorted.begin(), sorted.end());
    std::size_t distinct = 1;
    for (std::size_t r = 1; r < sorted.size(); ++r) distinct += sorted[r] != sorted[r - 1];
    if (distinct < k) {
      cb.warnings.push_back("coordinate " + std::to_string(j) + ": only " + std::to_string(distinct) +
                            " distinct values; levels will repeat");
    }
    const auto lv = lloyd_levels(sorted, k, distinct >= k);
    std::copy(lv.begin(), lv.end(), cb.levels.row(j).begin());
  }
  return cb;
}

Codeword sq_encode(const SQCodebook& codebook, std::span<const double> x) {
  if (x.size() != codebook.dim) throw ShapeError("sq: vector dimension does not match codebook");
  Codeword w(codebook.dim);
  for (std::size_t j = 0; j < w.size(); ++j) {
    const auto lv = codebook.levels.row(j);
    Symbol best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < lv.size(); ++l) {
      const double d = std::abs(x[j] - lv[l]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<Symbol>(l);
      }
    }
    w[j] = best;
  }
  return w;
}

std::vector<double> sq_decode(const SQCodebook& codebook, std::span<const Symbol> code) {
  validate_codeword(codebook.spec(), code);
  std::vector<double> v(codebook.dim);
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = codebook.levels(j, code[j]);
  return v;
}

ScoreTable sq_query_table(const SQCodebook& codebook, std::span<const Symbol> code) {
  const CodeSpec spec = codebook.spec();
  validate_codeword(spec, code);
  std::vector<double> t(spec.cells());
  for (std::size_t i = 0; i < spec.d; ++i) {
    for (std::size_t j = 0; j < spec.k; ++j) {
      const double diff = codebook.levels(i, code[i]) - codebook.levels(i, j);
      t[i * spec.k + j] = -diff * diff;
    }
  }
  return ScoreTable(spec, std::move(t));
}

double pq_distortion(const PQCodebook& codebook, const Matrix& embeddings) {
  double s = 0.0;
  for (std::size_t r = 0; r < embeddings.rows; ++r) {
    const auto rec = pq_decode(codebook, pq_encode(codebook, embeddings.row(r)));
    s += sq_dist(rec.data(), embeddings.row(r).data(), rec.size());
  }
  return embeddings.rows ? s / static_cast<double>(embeddings.rows) : 0.0;
}

double sq_distortion(const SQCodebook& codebook, const Matrix& embeddings) {
  double s = 0.0;
  for (std::size_t r = 0; r < embeddings.rows; ++r) {
    const auto rec = sq_decode(codebook, sq_encode(codebook, embeddings.row(r)));
    s += sq_dist(rec.data(), embeddings.row(r).data(), rec.size());
  }
  return embeddings.rows ? s / static_cast<double>(embeddings.rows) : 0.0;
}

double compression_rate(std::uint64_t input_dim, double bits_in, double k, double d) {
  if (!(k >= 2.0) || !(d >= 1.0)) throw DomainError("compression rate needs k >= 2 and d >= 1");
  return bits_in * static_cast<double>(input_dim) / (d * std::log2(k));
}

double compression_rate(std::uint64_t input_dim, double bits_in, const CodeSpec& spec) {
  spec.validate();
  return compression_rate(input_dim, bits_in, static_cast<double>(spec.k), static_cast<double>(spec.d));
}

}  // namespace dimco
