#include "rseg/inference.hpp"

#include <chrono>

#include "rseg/fusion_head.hpp"

namespace rseg {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Tensor predict_scores(const SegmentationModel& model, const Tensor& image, const std::vector<std::string>& tokens) {
  const auto& cfg = model.config();
  const auto geometry = make_pad_geometry(image.dim(1), image.dim(2), cfg.image_height, cfg.image_width);
  const auto input = resize_and_pad_image(image, geometry);
  Tape tape;
  const auto response = model.high(tape, input, model.vocabulary().encode(tokens));
  return map_back(response.scores, geometry);
}

Mask predict_mask(const SegmentationModel& model, const Tensor& image, const std::vector<std::string>& tokens) {
  return decide(predict_scores(model, image, tokens));
}

PerWordPrediction predict_perword_original(const PerWordModel& model, const Tensor& image,
                                           const std::vector<std::string>& tokens, CombineMode mode) {
  const auto& cfg = model.config();
  const auto geometry = make_pad_geometry(image.dim(1), image.dim(2), cfg.image_height, cfg.image_width);
  auto pred = predict_perword(model, resize_and_pad_image(image, geometry), tokens, mode);
  Mask cropped(geometry.scaled_height, geometry.scaled_width, 0);
  for (std::size_t i = 0; i < cropped.height; ++i)
    for (std::size_t j = 0; j < cropped.width; ++j) cropped.at(i, j) = pred.mask.at(i, j);
  pred.mask = resize_nearest(cropped, geometry.original_height, geometry.original_width);
  return pred;
}

EvalReport evaluate(const std::string& name, const std::vector<Sample>& samples, const Predictor& predict) {
  EvalAccumulator acc;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& s : samples) acc.add(predict(s), s.mask);
  return EvalReport::from(name, acc, seconds_since(t0));
}

EvalReport evaluate_model(const SegmentationModel& model, const std::vector<Sample>& samples,
                          const std::string& name) {
  return evaluate(name, samples, [&](const Sample& s) { return predict_mask(model, s.image, s.tokens); });
}

EvalReport evaluate_whole_image(const std::vector<Sample>& samples) {
  return evaluate("whole-image", samples,
                  [](const Sample& s) { return whole_image_baseline(s.mask.height, s.mask.width); });
}

EvalReport evaluate_perword(const PerWordModel& model, const std::vector<Sample>& samples, CombineMode mode) {
  std::size_t fallbacks = 0;
  auto report = evaluate("perword:" + std::string(name_of(mode)), samples, [&](const Sample& s) {
    auto pred = predict_perword_original(model, s.image, s.tokens, mode);
    fallbacks += pred.fallback ? 1 : 0;
    return pred.mask;
  });
  report.fallback_rate = samples.empty() ? 0.0 : static_cast<double>(fallbacks) / static_cast<double>(samples.size());
  return report;
}

}  // namespace rseg
