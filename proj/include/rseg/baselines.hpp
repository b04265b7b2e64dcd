#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rseg/checkpoint.hpp"
#include "rseg/mask.hpp"
#include "rseg/model.hpp"
#include "rseg/synth.hpp"
#include "rseg/training.hpp"

namespace rseg {

/// Stop-word file: one token per line; blank lines ignored.
std::set<std::string> load_stopwords(const std::filesystem::path& path);

/// Most frequent non-stop tokens of the corpus (ties broken alphabetically),
/// capped at max_words when non-zero.
std::vector<std::string> select_word_list(const std::vector<Sample>& corpus, const std::set<std::string>& stopwords,
                                          std::size_t max_words);

/// l[i] = 1 iff word i occurs in the expression.
std::vector<std::uint8_t> perword_labels(const std::vector<std::string>& tokens,
                                         const std::vector<std::string>& word_list);

/// Multi-label FCN: backbone -> normalized descriptors + coordinates ->
/// 1x1 conv -> relu -> 1x1 conv with one score channel per listed word.
/// Only the backbone, d_cls, coordinate and image-size fields of the model
/// config are used.
class PerWordModel {
 public:
  PerWordModel(ModelConfig config, std::vector<std::string> words, ParamStore params);
  static PerWordModel create(const ModelConfig& config, std::vector<std::string> words, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<std::string>& words() const { return words_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Sorted, de-duplicated indices of listed words present in `tokens`.
  std::vector<std::size_t> known_words(const std::vector<std::string>& tokens) const;

  /// [N x h x w]
  Tensor coarse(Tape& tape, const Tensor& image) const;
  /// [N x H x W], fixed bilinear upsampling of the coarse maps.
  Tensor high(Tape& tape, const Tensor& image) const;

 private:
  ModelConfig config_;
  std::vector<std::string> words_;
  ParamStore params_;
};

struct PerWordTrainResult {
  PerWordModel model;
  std::vector<double> losses;
};

/// Per-pixel, per-word logistic loss summed over words and averaged over
/// coarse pixels; foreground pixels target the label vector, background
/// pixels target zeros.
PerWordTrainResult train_perword(const std::vector<Sample>& data, const TrainConfig& config, PerWordModel init,
                                 const TrainLogger& logger = {});

enum class CombineMode { kAverage, kIntersection, kUnion };
std::string_view name_of(CombineMode mode);
CombineMode parse_combine_mode(std::string_view text);

/// Combines the score maps of the expression's known words. `maps` must be
/// non-empty and share extents.
Mask combine_perword(const std::vector<Tensor>& maps, CombineMode mode);

/// Empty prediction for expressions with no listed word.
Mask perword_fallback(std::size_t height, std::size_t width);

struct PerWordPrediction {
  Mask mask;
  bool fallback = false;
};

/// Prediction at the model's input size.
PerWordPrediction predict_perword(const PerWordModel& model, const Tensor& image,
                                  const std::vector<std::string>& tokens, CombineMode mode);

/// Every pixel foreground.
Mask whole_image_baseline(std::size_t height, std::size_t width);

Checkpoint make_perword_checkpoint(const PerWordModel& model, const RunConfig& config, std::uint64_t iteration);
PerWordModel perword_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace rseg
