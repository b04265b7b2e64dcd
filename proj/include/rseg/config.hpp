#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "rseg/model.hpp"
#include "rseg/training.hpp"

namespace rseg {

/// Everything a run needs, read from flat key=value text ('#' starts a
/// comment). Unset keys keep their defaults; unknown keys are rejected.
struct RunConfig {
  ModelConfig model;

  double lr_low = 0.01;
  double lr_high = 0.001;
  double momentum = 0.9;
  std::size_t iterations_low = 5000;
  std::size_t iterations_high = 2000;
  std::size_t batch_size = 1;
  std::size_t log_every = 100;
  LossWeights weights;
  std::uint64_t seed = 1;

  std::size_t perword_iterations = 5000;
  double perword_lr = 0.01;
  std::size_t perword_max_words = 0;  // 0 = no cap
  std::string perword_stopwords;      // path, empty = none

  /// Raw key/value pairs of a config text, without applying them.
  static std::map<std::string, std::string> read_entries(const std::string& text);
  static std::map<std::string, std::string> read_entries(const std::filesystem::path& path);
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_map(const std::map<std::string, std::string>& values);
  /// Every key with its current value; doubles are printed round-trip exact.
  std::map<std::string, std::string> to_map() const;
  std::string to_text() const;

  TrainConfig stage_config(Stage stage) const;
};

}  // namespace rseg
