#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "rseg/mask.hpp"
#include "rseg/model.hpp"
#include "rseg/synth.hpp"

namespace rseg {

struct LossWeights {
  double alpha_f = 3.0;
  double alpha_b = 1.0;
};

/// alpha_f * log(1 + exp(-v)) for label 1, alpha_b * log(1 + exp(v)) for label 0.
double pixel_loss(double score, int label, const LossWeights& weights);

/// Mean pixel loss of a [1 x h x w] response against an h x w mask.
Tensor total_loss(Tape& tape, const Tensor& response, const Mask& mask, const LossWeights& weights);

/// Coarse cell is foreground iff at least half of its s x s block is.
Mask downsample_mask(const Mask& mask, std::size_t stride);

/// [1 x H x W] tensor of 0/1 values.
Tensor mask_tensor(const Mask& mask);

enum class Stage { kLow, kHigh };
std::string_view name_of(Stage stage);
Stage parse_stage(std::string_view text);

struct TrainConfig {
  Stage stage = Stage::kLow;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t iterations = 0;
  std::size_t batch_size = 1;
  std::uint64_t seed = 1;
  std::size_t log_every = 100;
  LossWeights weights;
};

struct TrainLogEntry {
  std::size_t iteration;
  double loss;
  double seconds;
};
using TrainLogger = std::function<void(const TrainLogEntry&)>;

struct TrainResult {
  SegmentationModel model;
  std::vector<double> losses;  // one per iteration
};

/// Model inputs after resize-and-pad to the model's image size.
struct PreparedSample {
  Tensor image;
  Mask mask;         // full resolution
  Mask coarse_mask;  // downsampled by the model stride
  std::vector<std::string> tokens;
};
std::vector<PreparedSample> prepare_samples(const std::vector<Sample>& samples, const ModelConfig& config);

/// SGD-momentum over seeded shuffles of `data`. The low stage fits the coarse
/// map to downsampled masks and rejects a model carrying a deconvolution
/// filter; the high stage attaches a bilinear filter when missing and fits
/// full-resolution masks. Throws NumericFault naming the iteration on a
/// non-finite loss.
TrainResult train_stage(const std::vector<Sample>& data, const TrainConfig& config, SegmentationModel init,
                        const TrainLogger& logger = {});
TrainResult train_stage(const std::vector<PreparedSample>& data, const TrainConfig& config, SegmentationModel init,
                        const TrainLogger& logger = {});

}  // namespace rseg
