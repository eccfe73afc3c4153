#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dimco/codes.hpp"
#include "dimco/matrix.hpp"

namespace dimco {

enum class Activation : std::uint32_t { relu = 0, tanh = 1 };

struct EncoderConfig {
  std::uint32_t input_dim = 1;
  std::vector<std::uint32_t> hidden_dims;
  // Width of the factorized code head D -> n -> k*d.
  std::uint32_t bottleneck = 128;
  CodeSpec spec;
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

// One affine map y = W x + b, with W stored out x in row-major inside the
// flat parameter vector.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  bool activated = false;
};

class EncoderParams {
 public:
  EncoderParams() = default;
  explicit EncoderParams(EncoderConfig config);  // all-zero parameters

  const EncoderConfig& config() const noexcept { return config_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t weight_count() const noexcept;
  std::size_t bias_count() const noexcept;

  bool operator==(const EncoderParams& other) const {
    return config_ == other.config_ && values_ == other.values_;
  }

 private:
  EncoderConfig config_;
  std::vector<DenseLayer> layers_;
  std::vector<double> values_;
};

// Uniform(-sqrt(6/(fan_in+fan_out)), +sqrt(...)) weights, zero biases.
EncoderParams init_encoder(const EncoderConfig& config);

// Activations of every layer, kept for the backward pass.
struct ForwardPass {
  std::vector<Matrix> activations;  // activations[0] = inputs, back() = logits
};

ForwardPass forward_cached(const EncoderParams& params, const Matrix& inputs);

// N x (d*k) logits; row n reshapes to the d x k logits matrix of item n.
Matrix forward(const EncoderParams& params, const Matrix& inputs);

// Gradient of <upstream, logits> with respect to every parameter, in the
// layout of EncoderParams::values().
std::vector<double> backward(const EncoderParams& params, const ForwardPass& pass,
                             const Matrix& upstream);
std::vector<double> backward(const EncoderParams& params, const Matrix& inputs,
                             const Matrix& upstream);

std::vector<ProbMatrix> encode_batch(const EncoderParams& params, const Matrix& inputs);

}  // namespace dimco
