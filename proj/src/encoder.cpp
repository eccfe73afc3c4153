#include "dimco/encoder.hpp"

#include <cmath>
#include <random>
#include <string>

namespace dimco {

void EncoderConfig::validate() const {
  spec.validate();
  if (input_dim == 0) throw ConfigError("encoder: input_dim must be >= 1");
  if (bottleneck == 0) throw ConfigError("encoder: bottleneck width must be >= 1");
  for (std::size_t i = 0; i < hidden_dims.size(); ++i) {
    if (hidden_dims[i] == 0) {
      throw ConfigError("encoder: hidden layer " + std::to_string(i) + " has zero width");
    }
  }
}

EncoderParams::EncoderParams(EncoderConfig config) : config_(std::move(config)) {
  config_.validate();
  std::vector<std::size_t> widths{config_.input_dim};
  widths.insert(widths.end(), config_.hidden_dims.begin(), config_.hidden_dims.end());
  const std::size_t hidden_layers = config_.hidden_dims.size();
  widths.push_back(config_.bottleneck);
  widths.push_back(config_.spec.cells());

  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    layer.in = widths[l];
    layer.out = widths[l + 1];
    layer.weight_offset = offset;
    offset += layer.in * layer.out;
    layer.bias_offset = offset;
    offset += layer.out;
    // The two head matrices are a plain factorized linear map.
    layer.activated = l < hidden_layers;
    layers_.push_back(layer);
  }
  values_.assign(offset, 0.0);
}

std::size_t EncoderParams::weight_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.in * l.out;
  return n;
}

std::size_t EncoderParams::bias_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.out;
  return n;
}

EncoderParams init_encoder(const EncoderConfig& config) {
  EncoderParams params(config);
  std::mt19937_64 rng(config.seed);
  auto values = params.values();
  for (const auto& layer : params.layers()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t c = 0; c < layer.in * layer.out; ++c) values[layer.weight_offset + c] = dist(rng);
  }
  return params;
}

namespace {

void check_inputs(const EncoderParams& params, const Matrix& inputs) {
  if (inputs.cols != params.config().input_dim) {
    throw ShapeError("encoder expects inputs of dimension " +
                     std::to_string(params.config().input_dim) + ", got " +
                     std::to_string(inputs.cols));
  }
  for (double v : inputs.data) {
    if (!std::isfinite(v)) throw DomainError("encoder input is not finite");
  }
}

double activate(Activation a, double x) {
  return a == Activation::relu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

double activation_slope(Activation a, double y) {
  return a == Activation::relu ? (y > 0.0 ? 1.0 : 0.0) : 1.0 - y * y;
}

}  // namespace

ForwardPass forward_cached(const EncoderParams& params, const Matrix& inputs) {
  check_inputs(params, inputs);
  const auto values = params.values();
  const Activation act = params.config().activation;
  ForwardPass pass;
  pass.activations.reserve(params.layers().size() + 1);
  pass.activations.push_back(inputs);
  for (const auto& layer : params.layers()) {
    const Matrix& x = pass.activations.back();
    Matrix y(x.rows, layer.out);
    const double* w = values.data() + layer.weight_offset;
    const double* b = values.data() + layer.bias_offset;
    for (std::size_t n = 0; n < x.rows; ++n) {
      const double* xn = x.data.data() + n * layer.in;
      double* yn = y.data.data() + n * layer.out;
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double* wo = w + o * layer.in;
        double s = b[o];
        for (std::size_t i = 0; i < layer.in; ++i) s += wo[i] * xn[i];
        yn[o] = layer.activated ? activate(act, s) : s;
      }
    }
    pass.activations.push_back(std::move(y));
  }
  return pass;
}

Matrix forward(const EncoderParams& params, const Matrix& inputs) {
  return std::move(forward_cached(params, inputs).activations.back());
}

std::vector<double> backward(const EncoderParams& params, const ForwardPass& pass,
                             const Matrix& upstream) {
  const auto& layers = params.layers();
  if (pass.activations.size() != layers.size() + 1) throw ShapeError("forward pass does not match encoder");
  const Matrix& logits = pass.activations.back();
  if (upstream.rows != logits.rows || upstream.cols != logits.cols) {
    throw ShapeError("upstream gradient is " + std::to_string(upstream.rows) + "x" +
                     std::to_string(upstream.cols) + ", logits are " +
                     std::to_string(logits.rows) + "x" + std::to_string(logits.cols));
  }
  const auto values = params.values();
  const Activation act = params.config().activation;
  std::vector<double> grad(params.size(), 0.0);

  Matrix delta = upstream;  // gradient w.r.t. the current layer's output
  for (std::size_t li = layers.size(); li-- > 0;) {
    const DenseLayer& layer = layers[li];
    const Matrix& x = pass.activations[li];
    const Matrix& y = pass.activations[li + 1];
    if (layer.activated) {
      for (std::size_t c = 0; c < delta.data.size(); ++c) delta.data[c] *= activation_slope(act, y.data[c]);
    }
    double* gw = grad.data() + layer.weight_offset;
    double* gb = grad.data() + layer.bias_offset;
    const double* w = values.data() + layer.weight_offset;
    Matrix next(x.rows, layer.in);
    for (std::size_t n = 0; n < x.rows; ++n) {
      const double* xn = x.data.data() + n * layer.in;
      const double* dn = delta.data.data() + n * layer.out;
      double* nn = next.data.data() + n * layer.in;
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double g = dn[o];
        if (g == 0.0) continue;
        gb[o] += g;
        double* gwo = gw + o * layer.in;
        const double* wo = w + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) {
          gwo[i] += g * xn[i];
          nn[i] += g * wo[i];
        }
      }
    }
    delta = std::move(next);
  }
  return grad;
}

std::vector<double> backward(const EncoderParams& params, const Matrix& inputs,
                             const Matrix& upstream) {
  return backward(params, forward_cached(params, inputs), upstream);
}

std::vector<ProbMatrix> encode_batch(const EncoderParams& params, const Matrix& inputs) {
  const Matrix logits = forward(params, inputs);
  const CodeSpec& spec = params.config().spec;
  std::vector<ProbMatrix> out;
  out.reserve(logits.rows);
  for (std::size_t n = 0; n < logits.rows; ++n) out.push_back(ProbMatrix::from_logits(spec, logits.row(n)));
  return out;
}

}  // namespace dimco
