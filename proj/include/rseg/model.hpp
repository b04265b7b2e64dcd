#pragma once

#include <cstdint>

#include "rseg/backbone.hpp"
#include "rseg/fusion_head.hpp"
#include "rseg/params.hpp"
#include "rseg/text_encoder.hpp"

namespace rseg {

struct ModelConfig {
  EncoderConfig encoder;
  BackboneConfig backbone = BackboneConfig::desk_default();
  std::size_t d_cls = 64;
  /// false keeps the two coordinate channels but fills them with zeros.
  bool use_coordinates = true;
  std::size_t image_height = 64;
  std::size_t image_width = 64;
  double normalize_eps = 1e-8;

  std::size_t stride() const { return backbone.total_stride(); }
  std::size_t d_im() const { return backbone.descriptor_channels(); }
  std::size_t d_star() const { return d_im() + encoder.d_text + 2; }
  std::size_t coarse_height() const { return image_height / stride(); }
  std::size_t coarse_width() const { return image_width / stride(); }
  /// Throws unless the image size is divisible by the stride and the stride is even.
  void validate() const;
};

/// Expression encoder + fully convolutional backbone + fusion classifier,
/// optionally followed by the learned deconvolution.
class SegmentationModel {
 public:
  SegmentationModel(ModelConfig config, Vocabulary vocab, ParamStore params);

  /// Fresh parameters drawn from `seed`; no deconvolution filter.
  static SegmentationModel create(const ModelConfig& config, Vocabulary vocab, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  bool has_deconv() const { return params_.contains(kDeconvParam); }
  /// Adds (or resets) the deconvolution filter with bilinear weights.
  void attach_deconv();
  SegmentationModel clone() const;

  /// Feature map after normalization and coordinate append, [(D_im+2) x h x w].
  Tensor features(Tape& tape, const Tensor& image) const;
  Tensor encode(Tape& tape, const TokenSequence& tokens) const;
  /// Coarse response map [1 x h x w].
  ResponseMap coarse(Tape& tape, const Tensor& image, const TokenSequence& tokens) const;
  /// Full-resolution map [1 x H x W]: the learned deconvolution when attached,
  /// otherwise fixed bilinear upsampling of the coarse map.
  ResponseMap high(Tape& tape, const Tensor& image, const TokenSequence& tokens) const;
  ResponseMap upsample_coarse(Tape& tape, const ResponseMap& coarse) const;

 private:
  ModelConfig config_;
  Vocabulary vocab_;
  ParamStore params_;
};

}  // namespace rseg
