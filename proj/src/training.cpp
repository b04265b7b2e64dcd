#include "rseg/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "rseg/eval.hpp"
#include "rseg/ops.hpp"

namespace rseg {

double pixel_loss(double score, int label, const LossWeights& weights) {
  if (label == 1) return weights.alpha_f * softplus(-score);
  if (label == 0) return weights.alpha_b * softplus(score);
  throw ContractError("pixel_loss: label must be 0 or 1, got " + std::to_string(label));
}

Tensor mask_tensor(const Mask& mask) {
  std::vector<double> data(mask.bits.begin(), mask.bits.end());
  return Tensor({1, mask.height, mask.width}, std::move(data));
}

Tensor total_loss(Tape& tape, const Tensor& response, const Mask& mask, const LossWeights& weights) {
  if (response.rank() != 3 || response.dim(0) != 1 || response.dim(1) != mask.height || response.dim(2) != mask.width) {
    throw DimensionError("total_loss: response " + shape_str(response.shape()) + " does not match mask " +
                         std::to_string(mask.height) + "x" + std::to_string(mask.width));
  }
  if (!(weights.alpha_f > 0.0 && weights.alpha_b > 0.0)) throw ContractError("loss weights must be positive");
  return logistic_loss(tape, response, mask_tensor(mask), weights.alpha_f, weights.alpha_b,
                       static_cast<double>(mask.size()));
}

Mask downsample_mask(const Mask& mask, std::size_t stride) {
  if (stride == 0 || mask.height % stride != 0 || mask.width % stride != 0) {
    throw DimensionError("downsample_mask: " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                         " is not divisible by stride " + std::to_string(stride));
  }
  Mask coarse(mask.height / stride, mask.width / stride);
  for (std::size_t i = 0; i < coarse.height; ++i) {
    for (std::size_t j = 0; j < coarse.width; ++j) {
      std::size_t fg = 0;
      for (std::size_t y = i * stride; y < (i + 1) * stride; ++y)
        for (std::size_t x = j * stride; x < (j + 1) * stride; ++x) fg += mask.at(y, x);
      coarse.at(i, j) = 2 * fg >= stride * stride ? 1 : 0;
    }
  }
  return coarse;
}

std::string_view name_of(Stage stage) { return stage == Stage::kLow ? "low" : "high"; }

Stage parse_stage(std::string_view text) {
  if (text == "low") return Stage::kLow;
  if (text == "high") return Stage::kHigh;
  throw ContractError("unknown stage '" + std::string(text) + "' (expected low or high)");
}

std::vector<PreparedSample> prepare_samples(const std::vector<Sample>& samples, const ModelConfig& config) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    auto padded = resize_and_pad(s.image, s.mask, config.image_height, config.image_width);
    auto coarse = downsample_mask(padded.mask, config.stride());
    out.push_back({std::move(padded.image), std::move(padded.mask), std::move(coarse), s.tokens});
  }
  return out;
}

TrainResult train_stage(const std::vector<Sample>& data, const TrainConfig& config, SegmentationModel init,
                        const TrainLogger& logger) {
  if (data.empty()) throw ContractError("train_stage: empty dataset");
  const auto prepared = prepare_samples(data, init.config());
  return train_stage(prepared, config, std::move(init), logger);
}

TrainResult train_stage(const std::vector<PreparedSample>& data, const TrainConfig& config, SegmentationModel init,
                        const TrainLogger& logger) {
  if (data.empty()) throw ContractError("train_stage: empty dataset");
  if (config.batch_size == 0) throw ContractError("train_stage: batch size must be >= 1");
  if (config.stage == Stage::kLow && init.has_deconv()) {
    throw ContractError("train_stage: the low-resolution stage takes a model without a deconvolution filter");
  }
  SegmentationModel model = std::move(init);
  if (config.stage == Stage::kHigh && !model.has_deconv()) model.attach_deconv();

  std::vector<TokenSequence> tokens;
  tokens.reserve(data.size());
  for (const auto& s : data) tokens.push_back(model.vocabulary().encode(s.tokens));

  Rng rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  SgdMomentum optimizer(config.lr, config.momentum);
  TrainResult result{std::move(model), {}};
  auto& m = result.model;
  result.losses.reserve(config.iterations);
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t it = 0; it < config.iterations; ++it) {
    m.params().zero_grad();
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      const auto idx = order[cursor++];
      const auto& sample = data[idx];
      Tape tape;
      Tensor loss;
      if (config.stage == Stage::kLow) {
        loss = total_loss(tape, m.coarse(tape, sample.image, tokens[idx]).scores, sample.coarse_mask, config.weights);
      } else {
        loss = total_loss(tape, m.high(tape, sample.image, tokens[idx]).scores, sample.mask, config.weights);
      }
      if (config.batch_size > 1) loss = scale(tape, loss, 1.0 / static_cast<double>(config.batch_size));
      batch_loss += loss.item();
      tape.backward(loss);
    }
    if (!std::isfinite(batch_loss)) {
      throw NumericFault("non-finite training loss at iteration " + std::to_string(it));
    }
    result.losses.push_back(batch_loss);
    optimizer.step(m.params());
    if (logger && config.log_every > 0 && (it % config.log_every == 0 || it + 1 == config.iterations)) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      logger({it, batch_loss, secs});
    }
  }
  return result;
}

}  // namespace rseg
