#include "rseg/model.hpp"

#include "rseg/ops.hpp"

namespace rseg {

void ModelConfig::validate() const {
  backbone.check_input(image_height, image_width);
  const auto s = stride();
  if (s < 2 || s % 2 != 0) throw ContractError("model stride must be even, got " + std::to_string(s));
  if (encoder.d_embed == 0 || encoder.d_text == 0 || d_cls == 0) throw ContractError("model widths must be positive");
}

SegmentationModel::SegmentationModel(ModelConfig config, Vocabulary vocab, ParamStore params)
    : config_(std::move(config)), vocab_(std::move(vocab)), params_(std::move(params)) {
  config_.validate();
  const auto enc = EncoderParams::from(params_);
  if (enc.vocab_size() != vocab_.size() || enc.d_embed() != config_.encoder.d_embed ||
      enc.d_text() != config_.encoder.d_text) {
    throw DimensionError("encoder parameters disagree with vocabulary size or configured widths");
  }
  if (params_.get("fusion.fc1.weight").dim(1) != config_.d_star()) {
    throw DimensionError("classifier input width disagrees with D_im + D_text + 2");
  }
}

SegmentationModel SegmentationModel::create(const ModelConfig& config, Vocabulary vocab, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParamStore params;
  init_encoder(params, vocab.size(), config.encoder, rng);
  init_backbone(params, config.backbone, 3, rng);
  init_classifier(params, config.d_star(), config.d_cls, rng);
  return SegmentationModel(config, std::move(vocab), std::move(params));
}

void SegmentationModel::attach_deconv() { init_deconv(params_, config_.stride()); }

SegmentationModel SegmentationModel::clone() const { return SegmentationModel(config_, vocab_, params_.clone()); }

Tensor SegmentationModel::features(Tape& tape, const Tensor& image) const {
  auto fmap = extract_feature_map(tape, image, params_, config_.backbone);
  return append_coordinates(tape, normalize_locations(tape, fmap, config_.normalize_eps), config_.use_coordinates);
}

Tensor SegmentationModel::encode(Tape& tape, const TokenSequence& tokens) const {
  return encode_expression(tape, tokens, EncoderParams::from(params_), config_.encoder.normalize_eps);
}

ResponseMap SegmentationModel::coarse(Tape& tape, const Tensor& image, const TokenSequence& tokens) const {
  if (image.rank() != 3 || image.dim(1) != config_.image_height || image.dim(2) != config_.image_width) {
    throw DimensionError("model expects a [C x " + std::to_string(config_.image_height) + " x " +
                         std::to_string(config_.image_width) + "] image, got " + shape_str(image.shape()));
  }
  auto fused = tile_and_concat(tape, features(tape, image), encode(tape, tokens));
  return {classify(tape, fused, params_), Resolution::kCoarse};
}

ResponseMap SegmentationModel::upsample_coarse(Tape& tape, const ResponseMap& coarse) const {
  const Tensor filter = has_deconv() ? params_.get(kDeconvParam) : make_bilinear_filter(config_.stride());
  return {upsample(tape, coarse.scores, filter, config_.stride(), config_.image_height, config_.image_width),
          Resolution::kHigh};
}

ResponseMap SegmentationModel::high(Tape& tape, const Tensor& image, const TokenSequence& tokens) const {
  return upsample_coarse(tape, coarse(tape, image, tokens));
}

}  // namespace rseg
