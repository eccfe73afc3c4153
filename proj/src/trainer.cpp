#include "dimco/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace dimco {

void TrainConfig::validate(std::uint32_t class_count) const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("Adam epsilon must be > 0");
  if (classes_per_batch == 0) throw ConfigError("classes_per_batch must be >= 1");
  if (items_per_class == 0) throw ConfigError("items_per_class must be >= 1");
  if (classes_per_batch > class_count) {
    throw ConfigError("classes_per_batch (" + std::to_string(classes_per_batch) +
                      ") exceeds the number of available classes (" + std::to_string(class_count) + ")");
  }
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (per_class_limit && *per_class_limit == 0) throw ConfigError("per_class_limit must be >= 1");
}

ClassPools::ClassPools(const LabeledEmbeddings& data, std::optional<std::uint32_t> per_class_limit,
                       std::mt19937_64& rng)
    : pools_(data.class_members()) {
  for (std::uint32_t c = 0; c < pools_.size(); ++c) {
    auto& pool = pools_[c];
    if (per_class_limit && pool.size() > *per_class_limit) {
      std::shuffle(pool.begin(), pool.end(), rng);
      pool.resize(*per_class_limit);
      std::sort(pool.begin(), pool.end());
    }
    if (!pool.empty()) nonempty_.push_back(c);
    visible_ += pool.size();
  }
}

std::vector<std::size_t> sample_balanced_batch(const ClassPools& pools, const TrainConfig& config,
                                               std::mt19937_64& rng) {
  std::vector<std::uint32_t> classes = pools.nonempty_classes();
  if (classes.size() < config.classes_per_batch) {
    throw ConfigError("balanced batch needs " + std::to_string(config.classes_per_batch) +
                      " classes but only " + std::to_string(classes.size()) + " are available");
  }
  for (std::size_t i = 0; i < config.classes_per_batch; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, classes.size() - 1);
    std::swap(classes[i], classes[pick(rng)]);
  }
  std::vector<std::size_t> batch;
  batch.reserve(config.batch_size());
  std::vector<std::size_t> scratch;
  for (std::size_t i = 0; i < config.classes_per_batch; ++i) {
    const auto& pool = pools.pools()[classes[i]];
    if (pool.size() >= config.items_per_class) {
      scratch = pool;
      for (std::size_t j = 0; j < config.items_per_class; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, scratch.size() - 1);
        std::swap(scratch[j], scratch[pick(rng)]);
        batch.push_back(scratch[j]);
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (std::size_t j = 0; j < config.items_per_class; ++j) batch.push_back(pool[pick(rng)]);
    }
  }
  return batch;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("Adam: parameter, gradient and state sizes differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw TrainingError("Adam: non-finite gradient at parameter " + std::to_string(i) +
                          " (step " + std::to_string(state.step + 1) + ")");
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

StepGradient batch_gradient(const EncoderParams& params, const LabeledEmbeddings& data,
                            std::span<const std::size_t> indices, double lambda,
                            std::span<const DimPair> pairs) {
  const LabeledEmbeddings batch = data.subset(indices);
  const ForwardPass pass = forward_cached(params, batch.data);
  const Matrix& logits = pass.activations.back();
  const CodeSpec& spec = params.config().spec;
  LossGradient lg = loss_gradient(spec, logits.data, batch.labels, data.class_count, lambda, pairs);
  Matrix upstream(logits.rows, logits.cols);
  upstream.data = std::move(lg.logits_grad);
  return {lg.report, backward(params, pass, upstream)};
}

namespace {

void accumulate(LossReport& acc, const LossReport& r) {
  acc.marginal_entropy += r.marginal_entropy;
  acc.conditional_entropy += r.conditional_entropy;
  acc.mutual_information += r.mutual_information;
  acc.regularizer += r.regularizer;
  acc.total += r.total;
}

void scale(LossReport& acc, double s) {
  acc.marginal_entropy *= s;
  acc.conditional_entropy *= s;
  acc.mutual_information *= s;
  acc.regularizer *= s;
  acc.total *= s;
}

}  // namespace

TrainResult train(const LabeledEmbeddings& data, const EncoderConfig& encoder_config,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  data.validate();
  if (data.size() == 0) throw ArgumentError("training set is empty");
  if (data.dim() != encoder_config.input_dim) {
    throw ShapeError("training data has dimension " + std::to_string(data.dim()) +
                     " but the encoder expects " + std::to_string(encoder_config.input_dim));
  }
  std::mt19937_64 rng(config.seed);
  const ClassPools pools(data, config.per_class_limit, rng);
  config.validate(static_cast<std::uint32_t>(pools.nonempty_classes().size()));

  TrainResult result;
  result.params = init_encoder(encoder_config);
  const std::uint32_t d = encoder_config.spec.d;
  const std::size_t pair_count = config.ind_pairs_per_batch.value_or(d);
  const std::size_t steps_per_epoch =
      (pools.visible_count() + config.batch_size() - 1) / config.batch_size();

  AdamState adam(result.params.size());
  for (std::uint32_t epoch = 1; epoch <= config.epochs; ++epoch) {
    LossReport avg;
    avg.lambda = config.lambda;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const auto indices = sample_balanced_batch(pools, config, rng);
      const auto pairs = sample_dim_pairs(d, pair_count, rng);
      StepGradient sg;
      try {
        sg = batch_gradient(result.params, data, indices, config.lambda, pairs);
      } catch (const DomainError& e) {
        result.diverged = true;
        result.diagnostic = "epoch " + std::to_string(epoch) + ", step " + std::to_string(adam.step + 1) +
                            ": " + e.what();
        return result;
      }
      if (!std::isfinite(sg.report.total) || std::abs(sg.report.total) > 1e6) {
        std::ostringstream msg;
        msg << "loss diverged at epoch " << epoch << ", step " << adam.step + 1
            << " (total = " << sg.report.total << ")";
        result.diverged = true;
        result.diagnostic = msg.str();
        return result;
      }
      try {
        adam_step(result.params.values(), sg.grad, adam, config.lr, config.beta1, config.beta2,
                  config.adam_eps);
      } catch (const TrainingError& e) {
        result.diverged = true;
        result.diagnostic = e.what();
        return result;
      }
      accumulate(avg, sg.report);
    }
    scale(avg, 1.0 / static_cast<double>(steps_per_epoch));
    EpochRecord rec{epoch, adam.step, avg};
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec, result.params);
  }
  return result;
}

void write_train_log_header(std::ostream& out) {
  out << "epoch\tstep\tmarginal_entropy\tconditional_entropy\tmutual_information\tregularizer\ttotal\n";
}

void write_train_log_record(std::ostream& out, const EpochRecord& r) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(9) << r.epoch << '\t' << r.step << '\t' << r.report.marginal_entropy << '\t'
      << r.report.conditional_entropy << '\t' << r.report.mutual_information << '\t'
      << r.report.regularizer << '\t' << r.report.total << '\n';
  out.flags(flags);
  out.precision(prec);
}

}  // namespace dimco
