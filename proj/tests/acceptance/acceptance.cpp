// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: rseg_acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rseg/baselines.hpp"
#include "rseg/checkpoint.hpp"
#include "rseg/config.hpp"
#include "rseg/eval.hpp"
#include "rseg/inference.hpp"
#include "rseg/synth.hpp"
#include "rseg/training.hpp"
#include "support.hpp"

using namespace rseg;
using rseg::testing::grad_check;
using rseg::testing::probe;
using rseg::testing::random_away_from_zero;
using rseg::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

// Training setup shared by the learnability criteria. The backbone is a
// stride-4 stack so the 64x64 canvas yields a 16x16 coarse map.
const char* kTrainConfig =
    "backbone = 8/3/1/1/relu,16/3/2/1/relu,32/3/2/1/relu,32/3/1/1/relu,32/3/1/1/relu\n"
    "d_embed = 32\n"
    "d_text = 64\n"
    "d_cls = 64\n"
    "lr_low = 0.03\n"
    "lr_high = 0.03\n"
    "momentum = 0.9\n"
    "iterations_low = 5000\n"
    "iterations_high = 2000\n"
    "log_every = 0\n"
    "seed = 1\n";

// Longer, gentler schedule for the 800-sample generalization run.
constexpr std::size_t kGeneralLowIterations = 30000;
constexpr std::size_t kGeneralHighIterations = 6000;
constexpr double kGeneralLearningRate = 0.02;
constexpr std::size_t kPerWordIterations = 10000;
constexpr std::uint64_t kCorpusSeed = 7;

RunConfig train_config() { return RunConfig::parse(kTrainConfig); }

std::vector<Sample> synth_split(std::uint64_t seed, std::size_t train, std::size_t test, std::string_view split) {
  SynthOptions opt;
  opt.seed = seed;
  opt.count = train + test;
  opt.split_ratio = {train, 0, test};
  return to_samples(generate(opt), split);
}

Vocabulary vocabulary_of(const std::vector<Sample>& samples) {
  std::vector<std::vector<std::string>> corpus;
  for (const auto& s : samples) corpus.push_back(s.tokens);
  return Vocabulary::build(corpus);
}

SegmentationModel two_stage(const std::vector<Sample>& train, const RunConfig& cfg) {
  auto model = SegmentationModel::create(cfg.model, vocabulary_of(train), cfg.seed);
  const auto prepared = prepare_samples(train, cfg.model);
  auto low = train_stage(prepared, cfg.stage_config(Stage::kLow), std::move(model));
  auto high = train_stage(prepared, cfg.stage_config(Stage::kHigh), std::move(low.model));
  return std::move(high.model);
}

bool is_spatial(const Sample& s) { return std::find(s.tokens.begin(), s.tokens.end(), "on") != s.tokens.end(); }

std::vector<Sample> spatial_only(const std::vector<Sample>& samples) {
  std::vector<Sample> out;
  std::copy_if(samples.begin(), samples.end(), std::back_inserter(out), is_spatial);
  return out;
}

// Models trained once and shared by the generalization, order and baseline criteria.
struct Trained {
  std::vector<Sample> train;
  std::vector<Sample> test;
  std::optional<SegmentationModel> full;
  std::optional<SegmentationModel> ablated;
  std::optional<PerWordModel> perword;
  double full_seconds = 0.0;
  double ablated_seconds = 0.0;
  double perword_seconds = 0.0;
};

Trained& trained() {
  static Trained t = [] {
    Trained out;
    out.train = synth_split(kCorpusSeed, 800, 100, "train");
    out.test = synth_split(kCorpusSeed, 800, 100, "test");
    return out;
  }();
  return t;
}

RunConfig general_config(bool coordinates) {
  auto cfg = train_config();
  cfg.iterations_low = kGeneralLowIterations;
  cfg.iterations_high = kGeneralHighIterations;
  cfg.lr_low = cfg.lr_high = kGeneralLearningRate;
  cfg.model.use_coordinates = coordinates;
  return cfg;
}

const SegmentationModel& full_model() {
  auto& t = trained();
  if (!t.full) {
    const auto t0 = Clock::now();
    t.full.emplace(two_stage(t.train, general_config(true)));
    t.full_seconds = seconds_since(t0);
  }
  return *t.full;
}

const SegmentationModel& ablated_model() {
  auto& t = trained();
  if (!t.ablated) {
    const auto t0 = Clock::now();
    t.ablated.emplace(two_stage(t.train, general_config(false)));
    t.ablated_seconds = seconds_since(t0);
  }
  return *t.ablated;
}

const PerWordModel& perword_model() {
  auto& t = trained();
  if (!t.perword) {
    const auto t0 = Clock::now();
    const auto cfg = train_config();
    TrainConfig tc;
    tc.stage = Stage::kLow;
    tc.lr = cfg.perword_lr;
    tc.momentum = cfg.momentum;
    tc.iterations = kPerWordIterations;
    tc.seed = cfg.seed;
    auto init = PerWordModel::create(cfg.model, select_word_list(t.train, {}, 0), cfg.seed);
    t.perword.emplace(train_perword(t.train, tc, std::move(init)).model);
    t.perword_seconds = seconds_since(t0);
  }
  return *t.perword;
}

// ---------------------------------------------------------------------------
// 1. Gradient suite

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, testing::GradCheck>> results;
  Rng rng(101);

  {
    auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    results.emplace_back("matmul", grad_check([&](Tape& t) { return probe(t, matmul(t, a, b)); }, {{"a", a}, {"b", b}}));
  }
  {
    auto a = random_tensor({2, 5}, rng), b = random_tensor({2, 5}, rng);
    auto x = random_away_from_zero({2, 5}, rng);
    results.emplace_back("elementwise", grad_check(
                                            [&](Tape& t) {
                                              auto e = sub(t, mul(t, add(t, a, b), scale(t, b, -1.3)), a);
                                              auto n = add(t, relu(t, x), add(t, sigmoid(t, x), tanh(t, x)));
                                              return add(t, probe(t, reshape(t, e, {10}), 1), probe(t, n, 2));
                                            },
                                            {{"a", a}, {"b", b}, {"x", x}}));
  }
  {
    auto a = random_tensor({2, 3, 3}, rng), b = random_tensor({1, 3, 3}, rng), m = random_tensor({4, 2}, rng);
    results.emplace_back("concat/slice/gather/tile", grad_check(
                                                         [&](Tape& t) {
                                                           auto c = slice(t, concat(t, a, b), 1, 3);
                                                           auto tiled = tile_spatial(t, gather_row(t, m, 1), 3, 3);
                                                           return probe(t, concat(t, c, tiled), 3);
                                                         },
                                                         {{"a", a}, {"b", b}, {"m", m}}));
  }
  {
    auto in = random_tensor({3, 7, 7}, rng), f = random_tensor({4, 3, 3, 3}, rng), b = random_tensor({4}, rng);
    for (auto [stride, pad] : {std::pair<std::size_t, std::size_t>{1, 1}, {2, 1}, {2, 0}})
      results.emplace_back("conv2d s" + std::to_string(stride) + " p" + std::to_string(pad),
                           grad_check([&](Tape& t) { return probe(t, conv2d(t, in, f, b, stride, pad)); },
                                      {{"input", in}, {"filters", f}, {"bias", b}}));
  }
  {
    auto in = random_tensor({2, 3, 4}, rng), f = random_tensor({2, 3, 4, 4}, rng);
    results.emplace_back("conv_transpose2d", grad_check([&](Tape& t) { return probe(t, conv_transpose2d(t, in, f, 2, 1)); },
                                                        {{"input", in}, {"filters", f}}));
  }
  {
    auto v = random_tensor({6}, rng), map = random_tensor({4, 3, 3}, rng);
    results.emplace_back("l2_normalize", grad_check(
                                             [&](Tape& t) {
                                               return add(t, probe(t, l2_normalize(t, v, 1e-8), 4),
                                                          probe(t, l2_normalize_channels(t, map, 1e-8), 5));
                                             },
                                             {{"v", v}, {"map", map}}));
  }
  {
    ParamStore store;
    Rng init(7);
    init_encoder(store, 6, EncoderConfig{5, 4, 0.5, 1.0, 1e-8}, init);
    auto params = EncoderParams::from(store);
    auto x = random_tensor({5}, rng), h = random_tensor({4}, rng), c = random_tensor({4}, rng);
    results.emplace_back("lstm_step", grad_check(
                                          [&](Tape& t) {
                                            auto s = lstm_step(t, x, {h, c}, params);
                                            return add(t, probe(t, s.h, 6), probe(t, s.c, 7));
                                          },
                                          {{"x", x}, {"h", h}, {"c", c}, {"W", params.weight}, {"b", params.bias}}));
    results.emplace_back("encode_expression",
                         grad_check([&](Tape& t) { return probe(t, encode_expression(t, TokenSequence{{1, 3, 2, 3}}, params)); },
                                    {{"E", params.embedding}, {"W", params.weight}, {"b", params.bias}}));
  }
  {
    ParamStore store;
    Rng init(8);
    init_classifier(store, 6, 5, init);
    for (auto& v : store.get("fusion.fc1.bias").mutable_data()) v = init.uniform(0.05, 0.3);
    auto fused = random_tensor({6, 3, 4}, rng);
    std::vector<std::pair<std::string, Tensor>> inputs{{"fused", fused}};
    for (auto& [name, t] : store) inputs.emplace_back(name, t);
    results.emplace_back("classify", grad_check([&](Tape& t) { return probe(t, classify(t, fused, store)); }, inputs));
  }
  {
    auto response = random_tensor({1, 5, 6}, rng, -3.0, 3.0);
    Mask mask(5, 6);
    for (std::size_t i = 0; i < mask.size(); i += 4) mask.bits[i] = 1;
    results.emplace_back("total_loss", grad_check([&](Tape& t) { return total_loss(t, response, mask, LossWeights{}); },
                                                  {{"response", response}}));
  }
  {
    ModelConfig cfg;
    cfg.encoder.d_embed = 3;
    cfg.encoder.d_text = 4;
    cfg.d_cls = 5;
    cfg.backbone = BackboneConfig::parse("4/3/2/1/relu,4/3/2/1/relu");
    cfg.image_height = cfg.image_width = 16;
    auto model = SegmentationModel::create(cfg, Vocabulary::build({{"red", "square", "left"}}), 9);
    model.attach_deconv();
    Rng local(2);
    for (auto& v : model.params().get("fusion.fc1.bias").mutable_data()) v = local.uniform(0.05, 0.3);
    auto image = random_tensor({3, 16, 16}, local, 0.0, 1.0);
    const auto tokens = model.vocabulary().encode("red square left");
    Mask mask(16, 16);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 7; ++j) mask.at(4 + i, 2 + j) = 1;
    std::vector<std::pair<std::string, Tensor>> inputs{{"image", image}};
    for (auto& [name, t] : model.params()) inputs.emplace_back(name, t);
    results.emplace_back("end-to-end 16x16",
                         grad_check([&](Tape& t) { return total_loss(t, model.high(t, image, tokens).scores, mask, {}); },
                                    inputs));
  }

  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
  for (const auto& [name, r] : results) {
    checked += r.checked;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = name + " " + r.worst;
    }
  }
  return {worst < 1e-4 && elapsed < 60.0, std::to_string(results.size()) + " checks, " + std::to_string(checked) +
                                              " entries, max rel error " + fmt(worst) + " (" + worst_name + "), " +
                                              fmt(elapsed) + " s"};
}

// ---------------------------------------------------------------------------
// 2. Loss oracle

Outcome loss_oracle() {
  const LossWeights w{3.0, 1.0};
  // Direct reading of the weighted logistic loss: alpha_f log(1 + e^-v) on
  // foreground, alpha_b log(1 + e^v) on background.
  auto direct = [](double v, int m) { return m == 1 ? 3.0 * std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); };
  double worst = 0.0;
  std::size_t points = 0;
  for (int k = -160; k <= 160; ++k) {
    const double v = k / 8.0;
    for (int m : {0, 1}) {
      worst = std::max(worst, std::abs(pixel_loss(v, m, w) - direct(v, m)));
      ++points;
    }
  }
  const double at_zero_fg = std::abs(pixel_loss(0.0, 1, w) - 3.0 * std::log(2.0));
  const double at_zero_bg = std::abs(pixel_loss(0.0, 0, w) - std::log(2.0));

  // The map loss is the pixel mean of the same quantity.
  Rng rng(3);
  auto response = random_tensor({1, 6, 5}, rng, -4.0, 4.0);
  Mask mask(6, 5);
  for (auto& b : mask.bits) b = rng.uniform() < 0.4;
  double mean = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) mean += direct(response[i], mask.bits[i]);
  mean /= static_cast<double>(mask.size());
  Tape tape;
  const double map_err = std::abs(total_loss(tape, response, mask, w).item() - mean);

  const double all = std::max({worst, at_zero_fg, at_zero_bg, map_err});
  return {all < 1e-12, std::to_string(points) + " grid points, max abs error " + fmt(worst) + "; v=0 errors " +
                           fmt(at_zero_fg) + ", " + fmt(at_zero_bg) + "; map mean error " + fmt(map_err)};
}

// ---------------------------------------------------------------------------
// 3. Metric oracle

struct Counts {
  long long inter = 0;
  long long uni = 0;
};

Counts brute_counts(const Mask& a, const Mask& b) {
  Counts c;
  for (std::size_t r = 0; r < a.height; ++r)
    for (std::size_t col = 0; col < a.width; ++col) {
      const bool x = a.at(r, col) != 0, y = b.at(r, col) != 0;
      c.inter += (x && y) ? 1 : 0;
      c.uni += (x || y) ? 1 : 0;
    }
  return c;
}

double brute_iou(const Counts& c) { return c.uni == 0 ? 1.0 : static_cast<double>(c.inter) / static_cast<double>(c.uni); }

Outcome metric_oracle() {
  Rng rng(303);
  std::vector<std::pair<Mask, Mask>> pairs;
  for (int i = 0; i < 200; ++i) {
    const auto h = static_cast<std::size_t>(rng.uniform_int(1, 24));
    const auto w = static_cast<std::size_t>(rng.uniform_int(1, 24));
    const double pa = rng.uniform(), pb = rng.uniform();
    Mask a(h, w), b(h, w);
    for (auto& v : a.bits) v = rng.uniform() < pa;
    for (auto& v : b.bits) v = rng.uniform() < pb;
    if (i % 50 == 0) std::fill(a.bits.begin(), a.bits.end(), 0);
    if (i % 100 == 0) std::fill(b.bits.begin(), b.bits.end(), 0);
    pairs.emplace_back(std::move(a), std::move(b));
  }

  std::size_t mismatches = 0;
  EvalAccumulator acc;
  std::vector<double> ious, oracle_ious;
  long long inter = 0, uni = 0;
  for (const auto& [a, b] : pairs) {
    const auto c = brute_counts(a, b);
    inter += c.inter;
    uni += c.uni;
    oracle_ious.push_back(brute_iou(c));
    ious.push_back(iou(a, b));
    acc.add(a, b);
    if (ious.back() != oracle_ious.back()) ++mismatches;
  }
  const double oracle_overall = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  if (acc.overall_iou() != oracle_overall) ++mismatches;
  if (acc.total_intersection() != static_cast<std::uint64_t>(inter) || acc.total_union() != static_cast<std::uint64_t>(uni))
    ++mismatches;
  for (double t : kPrecisionThresholds) {
    const auto hits = std::count_if(oracle_ious.begin(), oracle_ious.end(), [t](double v) { return v >= t; });
    const double oracle = static_cast<double>(hits) / static_cast<double>(oracle_ious.size());
    if (precision_at(ious, t) != oracle || acc.precision_at(t) != oracle) ++mismatches;
  }

  // Overall versus mean: 1/7 and 3/3 pool to 4/10 but average to ~0.571.
  Mask p1(1, 8), g1(1, 8), p2(1, 3), g2(1, 3, 1);
  for (std::size_t i = 0; i < 4; ++i) p1.bits[i] = 1;
  for (std::size_t i = 3; i < 7; ++i) g1.bits[i] = 1;
  p2 = g2;
  EvalAccumulator example;
  example.add(p1, g1);
  example.add(p2, g2);
  const bool example_ok = example.overall_iou() == 0.4 && std::abs(example.mean_iou() - 4.0 / 7.0) < 1e-15 &&
                          brute_iou(brute_counts(p1, g1)) == 1.0 / 7.0;

  return {mismatches == 0 && example_ok, "200 pairs, " + std::to_string(mismatches) + " mismatches; example overall " +
                                             fmt(example.overall_iou()) + " vs mean " + fmt(example.mean_iou())};
}

// ---------------------------------------------------------------------------
// 4. Stage-2 initialization equivalence

// Bilinear interpolation of a coarse map at pixel centers with zero extension.
std::vector<double> tent_upsample(const Tensor& coarse, std::size_t s) {
  const auto h = coarse.dim(1), w = coarse.dim(2);
  const auto H = h * s, W = w * s;
  std::vector<double> out(H * W, 0.0);
  auto at = [&](long r, long c) {
    if (r < 0 || c < 0 || r >= static_cast<long>(h) || c >= static_cast<long>(w)) return 0.0;
    return coarse[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)];
  };
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double cy = (static_cast<double>(y) + 0.5) / static_cast<double>(s) - 0.5;
      const double cx = (static_cast<double>(x) + 0.5) / static_cast<double>(s) - 0.5;
      const long r0 = static_cast<long>(std::floor(cy)), c0 = static_cast<long>(std::floor(cx));
      const double fy = cy - static_cast<double>(r0), fx = cx - static_cast<double>(c0);
      out[y * W + x] = (1 - fy) * (1 - fx) * at(r0, c0) + (1 - fy) * fx * at(r0, c0 + 1) +
                       fy * (1 - fx) * at(r0 + 1, c0) + fy * fx * at(r0 + 1, c0 + 1);
    }
  return out;
}

Outcome stage_two_equivalence() {
  const std::vector<std::string> words{"the", "red", "green", "square", "circle", "on", "left", "right"};
  const auto vocab = Vocabulary::build({words});
  struct Case {
    std::string backbone;
    std::size_t size;
    bool trained;
  };
  const std::vector<Case> cases{{"8/3/2/1/relu,8/3/2/1/relu", 32, false},
                                {"8/3/2/1/relu,8/3/2/1/relu,8/3/2/1/relu", 32, false},
                                {BackboneConfig::desk_default().to_string(), 64, false},
                                {"8/3/2/1/relu,8/3/2/1/relu", 32, true}};
  Rng rng(404);
  double worst = 0.0;
  std::size_t inputs = 0;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto& c = cases[k];
    ModelConfig cfg;
    cfg.encoder.d_embed = 8;
    cfg.encoder.d_text = 8;
    cfg.d_cls = 8;
    cfg.backbone = BackboneConfig::parse(c.backbone);
    cfg.image_height = cfg.image_width = c.size;
    auto low = SegmentationModel::create(cfg, vocab, 40 + k);
    if (c.trained) {
      SynthOptions opt;
      opt.count = 10;
      opt.width = opt.height = c.size;
      opt.split_ratio = {1, 0, 0};
      TrainConfig tc;
      tc.iterations = 30;
      tc.lr = 0.05;
      low = train_stage(to_samples(generate(opt)), tc, std::move(low)).model;
    }
    const auto ckpt = load_checkpoint(save_checkpoint(make_checkpoint(low, RunConfig{}, "low", 0)));
    auto high = model_from_checkpoint(ckpt);
    high.attach_deconv();
    for (int i = 0; i < 5; ++i, ++inputs) {
      auto image = random_tensor({3, c.size, c.size}, rng, 0.0, 1.0);
      std::vector<std::string> tokens;
      const auto len = rng.uniform_int(1, 5);
      for (int t = 0; t < len; ++t) tokens.push_back(words[static_cast<std::size_t>(rng.uniform_int(0, 7))]);
      const auto ids = vocab.encode(tokens);
      Tape tape;
      const auto coarse = low.coarse(tape, image, ids);
      const auto expect = tent_upsample(coarse.scores, cfg.stride());
      const auto got = high.high(tape, image, ids);
      for (std::size_t j = 0; j < expect.size(); ++j) worst = std::max(worst, std::abs(got.scores[j] - expect[j]));
    }
  }
  return {inputs == 20 && worst < 1e-8, std::to_string(inputs) + " inputs over " + std::to_string(cases.size()) +
                                            " checkpoints, max abs diff " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// 5. Overfit learnability

Outcome overfit() {
  const auto t0 = Clock::now();
  const auto train = synth_split(kCorpusSeed, 50, 0, "train");
  const auto model = two_stage(train, train_config());
  EvalAccumulator acc;
  for (const auto& s : train) acc.add(predict_mask(model, s.image, s.tokens), s.mask);
  const double elapsed = seconds_since(t0);
  return {acc.mean_iou() >= 0.90 && elapsed < 900.0,
          "mean training IoU " + fmt(acc.mean_iou()) + " on " + std::to_string(train.size()) + " samples, " +
              fmt(elapsed) + " s"};
}

// ---------------------------------------------------------------------------
// 6. Generalization and coordinate ablation

Outcome generalization() {
  const auto& t = trained();
  const auto full = evaluate_model(full_model(), t.test, "full");
  const auto spatial = spatial_only(t.test);
  const auto full_spatial = evaluate_model(full_model(), spatial, "full-spatial");
  const auto ablated_spatial = evaluate_model(ablated_model(), spatial, "ablated-spatial");
  const double gap = full_spatial.precision[0] - ablated_spatial.precision[0];
  const double total = t.full_seconds + t.ablated_seconds + full.wall_seconds + full_spatial.wall_seconds +
                       ablated_spatial.wall_seconds;
  return {full.precision[0] >= 0.70 && gap >= 0.20 && total < 2700.0,
          "precision@0.5 " + fmt(full.precision[0]) + " on " + std::to_string(t.test.size()) + " held-out; spatial subset (" +
              std::to_string(spatial.size()) + ") full " + fmt(full_spatial.precision[0]) + " vs ablated " +
              fmt(ablated_spatial.precision[0]) + ", gap " + fmt(gap) + "; " + fmt(total) + " s"};
}

// ---------------------------------------------------------------------------
// 7. Order sensitivity

Outcome order_sensitivity() {
  const auto& t = trained();
  const auto& model = full_model();
  const auto& pw = perword_model();
  Rng rng(707);
  std::size_t spatial = 0, changed = 0, perword_cases = 0, perword_identical = 0;
  for (const auto& s : t.test) {
    if (!is_spatial(s)) continue;
    auto permuted = s.tokens;
    while (permuted == s.tokens) rng.shuffle(permuted);
    ++spatial;
    if (predict_mask(model, s.image, permuted) != predict_mask(model, s.image, s.tokens)) ++changed;
    for (auto mode : {CombineMode::kAverage, CombineMode::kIntersection, CombineMode::kUnion}) {
      ++perword_cases;
      const auto a = predict_perword_original(pw, s.image, s.tokens, mode);
      const auto b = predict_perword_original(pw, s.image, permuted, mode);
      if (a.mask == b.mask && a.fallback == b.fallback) ++perword_identical;
    }
  }
  const double share = spatial == 0 ? 0.0 : static_cast<double>(changed) / static_cast<double>(spatial);
  return {spatial > 0 && share >= 0.30 && perword_identical == perword_cases,
          "LSTM masks changed for " + std::to_string(changed) + "/" + std::to_string(spatial) + " (" + fmt(share) +
              "); per-word identical " + std::to_string(perword_identical) + "/" + std::to_string(perword_cases)};
}

// ---------------------------------------------------------------------------
// 8. Baseline ordering

Outcome baseline_ordering() {
  const auto& t = trained();
  const auto full = evaluate_model(full_model(), t.test, "full");
  const auto perword = evaluate_perword(perword_model(), t.test, CombineMode::kAverage);
  const auto whole = evaluate_whole_image(t.test);
  return {full.overall_iou > perword.overall_iou && perword.overall_iou > whole.overall_iou,
          "overall IoU full " + fmt(full.overall_iou) + " > per-word(average) " + fmt(perword.overall_iou) +
              " > whole-image " + fmt(whole.overall_iou)};
}

// ---------------------------------------------------------------------------
// 9. Determinism and persistence

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  auto cfg = train_config();
  cfg.iterations_low = 100;
  const auto train = synth_split(9, 20, 0, "train");
  auto run = [&] {
    auto model = SegmentationModel::create(cfg.model, vocabulary_of(train), cfg.seed);
    auto result = train_stage(train, cfg.stage_config(Stage::kLow), std::move(model));
    return save_checkpoint(make_checkpoint(result.model, cfg, "low", 100));
  };
  const auto a = run(), b = run();
  const bool same_training = a == b;

  const auto loaded = load_checkpoint(a);
  bool round_trip = save_checkpoint(loaded) == a;
  const auto original = model_from_checkpoint(loaded);
  const auto dir = fs::temp_directory_path() / "rseg_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_checkpoint(dir / "a.ckpt", loaded);
  const auto reread = read_checkpoint(dir / "a.ckpt");
  for (const auto& [name, tensor] : original.params()) {
    const auto& other = reread.params.get(name);
    round_trip = round_trip && other.shape() == tensor.shape() &&
                 std::memcmp(other.data().data(), tensor.data().data(), tensor.numel() * sizeof(double)) == 0;
  }

  SynthOptions opt;
  opt.seed = 99;
  opt.count = 40;
  write_corpus(generate(opt), dir / "c1");
  write_corpus(generate(opt), dir / "c2");
  bool corpus_same = true;
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "c1")) {
    if (!entry.is_regular_file()) continue;
    ++files;
    corpus_same = corpus_same && slurp(entry.path()) == slurp(dir / "c2" / fs::relative(entry.path(), dir / "c1"));
  }
  fs::remove_all(dir);
  return {same_training && round_trip && corpus_same && files == 81,
          std::string("checkpoints after 100 iterations ") + (same_training ? "identical" : "differ") + ", round trip " +
              (round_trip ? "exact" : "inexact") + ", corpus " + (corpus_same ? "identical" : "differs") + " over " +
              std::to_string(files) + " files"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
      {1, {"gradient suite", gradient_suite}},
      {2, {"loss oracle", loss_oracle}},
      {3, {"metric oracle", metric_oracle}},
      {4, {"stage-2 initialization equivalence", stage_two_equivalence}},
      {5, {"overfit learnability", overfit}},
      {6, {"generalization and coordinate ablation", generalization}},
      {7, {"order sensitivity", order_sensitivity}},
      {8, {"baseline ordering", baseline_ordering}},
      {9, {"determinism and persistence", determinism}},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));
  if (selected.empty())
    for (const auto& [id, _] : criteria) selected.insert(id);

  int failures = 0;
  for (int id : selected) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    Outcome outcome;
    try {
      outcome = it->second.second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    if (!outcome.pass) ++failures;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << it->second.first
              << "): " << outcome.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
