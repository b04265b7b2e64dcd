#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rseg/baselines.hpp"
#include "rseg/eval.hpp"
#include "rseg/model.hpp"
#include "rseg/synth.hpp"

namespace rseg {

/// Scores at the original image size [1 x H0 x W0]: resize-and-pad into the
/// model input, full-resolution response, crop and resize back.
Tensor predict_scores(const SegmentationModel& model, const Tensor& image, const std::vector<std::string>& tokens);
Mask predict_mask(const SegmentationModel& model, const Tensor& image, const std::vector<std::string>& tokens);

/// Per-word prediction mapped back to the original image size. Scores are
/// combined at the model's input size and the mask is resized with nearest
/// sampling.
PerWordPrediction predict_perword_original(const PerWordModel& model, const Tensor& image,
                                           const std::vector<std::string>& tokens, CombineMode mode);

/// Returns the predicted mask for one sample.
using Predictor = std::function<Mask(const Sample&)>;

/// Runs `predict` over `samples`, timing each call.
EvalReport evaluate(const std::string& name, const std::vector<Sample>& samples, const Predictor& predict);

EvalReport evaluate_model(const SegmentationModel& model, const std::vector<Sample>& samples,
                          const std::string& name = "model");
EvalReport evaluate_whole_image(const std::vector<Sample>& samples);
EvalReport evaluate_perword(const PerWordModel& model, const std::vector<Sample>& samples, CombineMode mode);

}  // namespace rseg
