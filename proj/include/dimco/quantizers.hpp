#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dimco/codes.hpp"
#include "dimco/matrix.hpp"

namespace dimco {

struct KMeansResult {
  Matrix centroids;  // k x dim
  std::vector<std::uint32_t> assignment;
  double inertia = 0.0;  // sum of squared distances to the assigned centroid
  // Inertia after the assignment step of every Lloyd iteration.
  std::vector<double> inertia_history;
  std::uint32_t iterations = 0;
  std::vector<std::string> warnings;
};

// k-means++ seeding followed by Lloyd iterations until the largest centroid
// shift drops below `tol` or `max_iters` is reached. Empty clusters are
// reseeded to the point farthest from its centroid.
KMeansResult kmeans(const Matrix& points, std::uint32_t k, std::uint64_t seed,
                    std::uint32_t max_iters = 100, double tol = 1e-6);

// Index of the nearest row of `centroids` (squared Euclidean, ties to the lowest index).
std::uint32_t nearest_centroid(const Matrix& centroids, std::span<const double> x);

// Product quantizer: d contiguous subvectors, k centroids each.
struct PQCodebook {
  CodeSpec spec;
  std::uint32_t input_dim = 0;
  // input_dim rounded up to a multiple of d; the pad is zeros.
  std::uint32_t padded_dim = 0;
  std::vector<Matrix> centroids;  // d matrices of k x (padded_dim / d)
  std::vector<std::string> warnings;

  std::uint32_t subspace_dim() const noexcept { return padded_dim / spec.d; }
};

PQCodebook pq_train(const Matrix& embeddings, const CodeSpec& spec, std::uint64_t seed);
Codeword pq_encode(const PQCodebook& codebook, std::span<const double> x);
// Reconstruction in the original input_dim coordinates.
std::vector<double> pq_decode(const PQCodebook& codebook, std::span<const Symbol> code);
// Symmetric distance table: entry (i, j) = -|| c_i[code_i] - c_i[j] ||^2.
ScoreTable pq_query_table(const PQCodebook& codebook, std::span<const Symbol> code);

// Adaptive scalar quantizer: k levels per coordinate, learned by 1-D k-means.
struct SQCodebook {
  std::uint32_t k = 2;
  std::uint32_t dim = 0;
  Matrix levels;  // dim x k, ascending per coordinate
  std::vector<std::string> warnings;

  CodeSpec spec() const { return {k, dim}; }
};

// Deterministic: Lloyd from evenly spaced order statistics, run to its fixed point.
SQCodebook sq_train(const Matrix& embeddings, std::uint32_t k);
Codeword sq_encode(const SQCodebook& codebook, std::span<const double> x);
std::vector<double> sq_decode(const SQCodebook& codebook, std::span<const Symbol> code);
ScoreTable sq_query_table(const SQCodebook& codebook, std::span<const Symbol> code);

// Mean over rows of the squared reconstruction error.
double pq_distortion(const PQCodebook& codebook, const Matrix& embeddings);
double sq_distortion(const SQCodebook& codebook, const Matrix& embeddings);

// bits_in * input_dim / (d log2 k).
double compression_rate(std::uint64_t input_dim, double bits_in, double k, double d);
double compression_rate(std::uint64_t input_dim, double bits_in, const CodeSpec& spec);

}  // namespace dimco
