#include "rseg/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "rseg/backbone.hpp"
#include "rseg/fusion_head.hpp"
#include "rseg/ops.hpp"

namespace rseg {

std::set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stop-word file " + path.string());
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    for (const auto& tok : tokenize(line))
      if (tok != kUnknownToken) words.insert(tok);
  }
  return words;
}

std::vector<std::string> select_word_list(const std::vector<Sample>& corpus, const std::set<std::string>& stopwords,
                                          std::size_t max_words) {
  std::map<std::string, std::size_t> freq;
  for (const auto& s : corpus)
    for (const auto& tok : s.tokens)
      if (tok != kUnknownToken && !stopwords.contains(tok)) ++freq[tok];
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (max_words > 0 && ranked.size() > max_words) ranked.resize(max_words);
  std::vector<std::string> words;
  for (auto& [w, _] : ranked) words.push_back(w);
  return words;
}

std::vector<std::uint8_t> perword_labels(const std::vector<std::string>& tokens,
                                         const std::vector<std::string>& word_list) {
  std::vector<std::uint8_t> labels(word_list.size(), 0);
  for (std::size_t i = 0; i < word_list.size(); ++i)
    if (std::find(tokens.begin(), tokens.end(), word_list[i]) != tokens.end()) labels[i] = 1;
  return labels;
}

PerWordModel::PerWordModel(ModelConfig config, std::vector<std::string> words, ParamStore params)
    : config_(std::move(config)), words_(std::move(words)), params_(std::move(params)) {
  config_.validate();
  if (words_.empty()) throw ContractError("per-word model needs at least one word");
  if (params_.get("perword.fc2.weight").dim(0) != words_.size()) {
    throw DimensionError("per-word output channels disagree with the word list");
  }
}

PerWordModel PerWordModel::create(const ModelConfig& config, std::vector<std::string> words, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParamStore params;
  init_backbone(params, config.backbone, 3, rng);
  const auto d_in = config.d_im() + 2;
  auto glorot = [&](std::size_t out, std::size_t in) {
    auto w = Tensor::zeros({out, in, 1, 1});
    fill_uniform(w, std::sqrt(6.0 / static_cast<double>(in + out)), rng);
    return w;
  };
  params.add("perword.fc1.weight", glorot(config.d_cls, d_in));
  params.add("perword.fc1.bias", Tensor::zeros({config.d_cls}));
  params.add("perword.fc2.weight", glorot(words.size(), config.d_cls));
  params.add("perword.fc2.bias", Tensor::zeros({words.size()}));
  return PerWordModel(config, std::move(words), std::move(params));
}

std::vector<std::size_t> PerWordModel::known_words(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> known;
  const auto labels = perword_labels(tokens, words_);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i]) known.push_back(i);
  return known;
}

Tensor PerWordModel::coarse(Tape& tape, const Tensor& image) const {
  auto fmap = extract_feature_map(tape, image, params_, config_.backbone);
  auto features = append_coordinates(tape, normalize_locations(tape, fmap, config_.normalize_eps), config_.use_coordinates);
  auto hidden = relu(tape, conv2d(tape, features, params_.get("perword.fc1.weight"), params_.get("perword.fc1.bias"), 1, 0));
  return conv2d(tape, hidden, params_.get("perword.fc2.weight"), params_.get("perword.fc2.bias"), 1, 0);
}

Tensor PerWordModel::high(Tape& tape, const Tensor& image) const {
  return upsample(tape, coarse(tape, image), make_bilinear_filter(config_.stride()), config_.stride(),
                  config_.image_height, config_.image_width);
}

PerWordTrainResult train_perword(const std::vector<Sample>& data, const TrainConfig& config, PerWordModel init,
                                 const TrainLogger& logger) {
  if (data.empty()) throw ContractError("train_perword: empty dataset");
  if (config.batch_size == 0) throw ContractError("train_perword: batch size must be >= 1");
  const auto prepared = prepare_samples(data, init.config());
  const auto n_words = init.words().size();

  // Targets: label vector on coarse foreground cells, zeros elsewhere.
  std::vector<Tensor> targets;
  for (const auto& s : prepared) {
    const auto labels = perword_labels(s.tokens, init.words());
    const auto plane = s.coarse_mask.size();
    std::vector<double> t(n_words * plane, 0.0);
    for (std::size_t w = 0; w < n_words; ++w)
      if (labels[w])
        for (std::size_t p = 0; p < plane; ++p) t[w * plane + p] = s.coarse_mask.bits[p];
    targets.emplace_back(Shape{n_words, s.coarse_mask.height, s.coarse_mask.width}, std::move(t));
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  SgdMomentum optimizer(config.lr, config.momentum);
  PerWordTrainResult result{std::move(init), {}};
  auto& m = result.model;
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
      Tape tape;
      const auto pixels = static_cast<double>(prepared[idx].coarse_mask.size());
      auto loss = logistic_loss(tape, m.coarse(tape, prepared[idx].image), targets[idx], 1.0, 1.0, pixels);
      if (config.batch_size > 1) loss = scale(tape, loss, 1.0 / static_cast<double>(config.batch_size));
      batch_loss += loss.item();
      tape.backward(loss);
    }
    if (!std::isfinite(batch_loss)) throw NumericFault("non-finite per-word loss at iteration " + std::to_string(it));
    result.losses.push_back(batch_loss);
    optimizer.step(m.params());
    if (logger && config.log_every > 0 && (it % config.log_every == 0 || it + 1 == config.iterations)) {
      logger({it, batch_loss, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
    }
  }
  return result;
}

std::string_view name_of(CombineMode mode) {
  switch (mode) {
    case CombineMode::kAverage: return "average";
    case CombineMode::kIntersection: return "intersection";
    case CombineMode::kUnion: return "union";
  }
  return "?";
}

CombineMode parse_combine_mode(std::string_view text) {
  if (text == "average") return CombineMode::kAverage;
  if (text == "intersection") return CombineMode::kIntersection;
  if (text == "union") return CombineMode::kUnion;
  throw ContractError("unknown combination mode '" + std::string(text) + "'");
}

Mask combine_perword(const std::vector<Tensor>& maps, CombineMode mode) {
  if (maps.empty()) throw ContractError("combine_perword: no known words");
  for (const auto& m : maps) {
    if (m.shape() != maps.front().shape()) throw DimensionError("combine_perword: score maps differ in extent");
  }
  if (mode == CombineMode::kAverage) {
    std::vector<double> mean(maps.front().numel(), 0.0);
    for (const auto& m : maps)
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += m[i];
    for (auto& v : mean) v /= static_cast<double>(maps.size());
    return decide(Tensor(maps.front().shape(), std::move(mean)));
  }
  Mask out = decide(maps.front());
  for (std::size_t k = 1; k < maps.size(); ++k) {
    const auto next = decide(maps[k]);
    for (std::size_t i = 0; i < out.size(); ++i)
      out.bits[i] = mode == CombineMode::kIntersection ? (out.bits[i] & next.bits[i]) : (out.bits[i] | next.bits[i]);
  }
  return out;
}

Mask perword_fallback(std::size_t height, std::size_t width) { return Mask(height, width, 0); }

PerWordPrediction predict_perword(const PerWordModel& model, const Tensor& image,
                                  const std::vector<std::string>& tokens, CombineMode mode) {
  const auto& cfg = model.config();
  const auto known = model.known_words(tokens);
  if (known.empty()) return {perword_fallback(cfg.image_height, cfg.image_width), true};
  Tape tape;
  const auto maps = model.high(tape, image);
  std::vector<Tensor> selected;
  for (auto w : known) selected.push_back(slice(tape, maps, w, w + 1));
  return {combine_perword(selected, mode), false};
}

Mask whole_image_baseline(std::size_t height, std::size_t width) { return Mask(height, width, 1); }

Checkpoint make_perword_checkpoint(const PerWordModel& model, const RunConfig& config, std::uint64_t iteration) {
  RunConfig snapshot = config;
  snapshot.model = model.config();
  Checkpoint ckpt;
  ckpt.kind = "perword";
  ckpt.stage = "perword";
  ckpt.iteration = iteration;
  ckpt.config = snapshot.to_map();
  ckpt.word_list = model.words();
  ckpt.params = model.params().clone();
  return ckpt;
}

PerWordModel perword_from_checkpoint(const Checkpoint& checkpoint) {
  if (checkpoint.kind != "perword") throw CheckpointError("checkpoint kind: expected perword, found " + checkpoint.kind);
  try {
    return PerWordModel(config_from_checkpoint(checkpoint).model, checkpoint.word_list, checkpoint.params.clone());
  } catch (const ContractError& e) {
    throw CheckpointError(std::string("checkpoint parameters: ") + e.what());
  } catch (const DimensionError& e) {
    throw CheckpointError(std::string("checkpoint parameters: ") + e.what());
  }
}

}  // namespace rseg
