// rseg: corpus generation, two-stage training, evaluation and prediction.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "rseg/baselines.hpp"
#include "rseg/checkpoint.hpp"
#include "rseg/config.hpp"
#include "rseg/image_io.hpp"
#include "rseg/inference.hpp"
#include "rseg/synth.hpp"
#include "rseg/training.hpp"

namespace fs = std::filesystem;
using namespace rseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::pair<std::size_t, std::size_t> parse_size(const std::string& text) {
  const auto x = text.find('x');
  std::size_t w = 0, h = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    w = std::stoul(text.substr(0, x));
    h = std::stoul(text.substr(x + 1));
  } catch (const std::exception&) {
    throw UsageError("--size expects WxH, got '" + text + "'");
  }
  if (w == 0 || h == 0) throw UsageError("--size extents must be positive");
  return {w, h};
}

std::array<std::size_t, 3> parse_splits(const std::string& text) {
  std::array<std::size_t, 3> ratio{};
  std::istringstream in(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(in, part, ':')) {
    if (i == 3) throw UsageError("--splits expects train:val:test");
    try {
      ratio[i++] = std::stoul(part);
    } catch (const std::exception&) {
      throw UsageError("--splits expects integers, got '" + text + "'");
    }
  }
  if (i != 3 || ratio[0] + ratio[1] + ratio[2] == 0) throw UsageError("--splits expects train:val:test");
  return ratio;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---- gen-data --------------------------------------------------------------

struct GenArgs {
  std::string out;
  std::uint64_t seed = 1;
  std::size_t count = 100;
  std::string size = "64x64";
  std::string splits = "8:1:1";
};

int cmd_gen_data(const GenArgs& args) {
  SynthOptions opt;
  opt.seed = args.seed;
  opt.count = args.count;
  std::tie(opt.width, opt.height) = parse_size(args.size);
  opt.split_ratio = parse_splits(args.splits);
  const auto samples = generate(opt);
  std::error_code ec;
  fs::create_directories(args.out, ec);
  const auto manifest = write_corpus(samples, args.out);

  std::map<std::string, std::size_t> per_split;
  std::map<std::string, std::set<std::string>> words;
  for (const auto& s : samples) {
    ++per_split[s.split];
    for (const auto& tok : tokenize(s.scene.expression)) words[s.split].insert(tok);
  }
  std::cout << "manifest " << manifest.string() << '\n';
  for (const auto& name : kSplitNames) std::cout << name << ' ' << per_split[std::string(name)] << '\n';
  std::cout << "train vocabulary " << words["train"].size() << " tokens\n";
  std::size_t unseen = 0;
  for (const auto& split : {"val", "test"})
    for (const auto& w : words[split]) unseen += words["train"].contains(w) ? 0 : 1;
  std::cout << "held-out tokens absent from train " << unseen << '\n';
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string split = "train";
  std::string stage;
  std::string init;
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool fresh_deconv = false;
};

RunConfig resolve_config(const TrainArgs& args, std::map<std::string, std::string> base,
                         const std::vector<Sample>& data) {
  if (!args.config.empty()) {
    for (auto& [k, v] : RunConfig::read_entries(fs::path(args.config))) base[k] = v;
  }
  // The model input size follows the corpus unless configured.
  if (!base.contains("image_width")) base["image_width"] = std::to_string(data.front().image.dim(2));
  if (!base.contains("image_height")) base["image_height"] = std::to_string(data.front().image.dim(1));
  if (args.seed_set) base["seed"] = std::to_string(args.seed);
  auto config = RunConfig::from_map(base);
  config.model.validate();
  return config;
}

int cmd_train(const TrainArgs& args) {
  const auto data = load_manifest(args.data, args.split);
  if (data.empty()) throw UsageError("no '" + args.split + "' samples in " + args.data);

  std::ofstream log(args.out + ".log", std::ios::app);
  const auto logger = [&](const TrainLogEntry& e) {
    std::ostringstream line;
    line << "stage=" << args.stage << " iteration=" << e.iteration << " loss=" << format_number(e.loss)
         << " seconds=" << format_number(e.seconds);
    log << line.str() << '\n' << std::flush;
    std::cout << line.str() << '\n';
  };

  if (args.stage == "perword") {
    if (!args.init.empty()) throw UsageError("--init is not used by the per-word stage");
    const auto config = resolve_config(args, {}, data);
    std::set<std::string> stop;
    if (!config.perword_stopwords.empty()) stop = load_stopwords(config.perword_stopwords);
    auto words = select_word_list(data, stop, config.perword_max_words);
    if (words.empty()) throw UsageError("per-word stage: empty word list");
    TrainConfig tc = config.stage_config(Stage::kLow);
    tc.lr = config.perword_lr;
    tc.iterations = config.perword_iterations;
    auto result = train_perword(data, tc, PerWordModel::create(config.model, words, config.seed), logger);
    write_checkpoint(args.out, make_perword_checkpoint(result.model, config, tc.iterations));
    std::cout << "wrote " << args.out << " (" << words.size() << " words)\n";
    return kExitOk;
  }

  const auto stage = parse_stage(args.stage);
  std::optional<SegmentationModel> init;
  std::map<std::string, std::string> base;
  if (stage == Stage::kHigh && args.init.empty() && !args.fresh_deconv) {
    throw UsageError("--stage high needs --init LOW_CKPT (or --fresh-deconv)");
  }
  if (!args.init.empty()) {
    const auto ckpt = read_checkpoint(args.init);
    base = ckpt.config;
    init.emplace(model_from_checkpoint(ckpt));
  }
  const auto config = resolve_config(args, base, data);
  if (!init) {
    std::vector<std::vector<std::string>> corpus;
    for (const auto& s : data) corpus.push_back(s.tokens);
    init.emplace(SegmentationModel::create(config.model, Vocabulary::build(corpus), config.seed));
  } else if (config.model.stride() != init->config().stride() ||
             config.model.d_im() != init->config().d_im()) {
    throw UsageError("--config changes the architecture of the --init checkpoint");
  } else {
    SegmentationModel reconfigured(config.model, init->vocabulary(), init->params().clone());
    init.emplace(std::move(reconfigured));
  }
  if (stage == Stage::kHigh && init->has_deconv() && args.fresh_deconv) init->attach_deconv();

  const auto tc = config.stage_config(stage);
  auto result = train_stage(data, tc, std::move(*init), logger);
  write_checkpoint(args.out, make_checkpoint(result.model, config, std::string(name_of(stage)), tc.iterations));
  std::cout << "wrote " << args.out << '\n';
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string data;
  std::string split = "test";
  std::string model;
  std::string baseline;
  std::string baseline_model;
  std::string report;
  bool append = false;
};

int cmd_eval(const EvalArgs& args) {
  if (args.model.empty() == args.baseline.empty()) throw UsageError("select exactly one of --model and --baseline");
  const auto data = load_manifest(args.data, args.split);
  if (data.empty()) throw UsageError("no '" + args.split + "' samples in " + args.data);

  EvalReport report;
  if (!args.model.empty()) {
    report = evaluate_model(model_from_checkpoint(read_checkpoint(args.model)), data, fs::path(args.model).filename());
  } else if (args.baseline == "whole-image") {
    report = evaluate_whole_image(data);
  } else if (args.baseline.starts_with("perword:")) {
    if (args.baseline_model.empty()) throw UsageError("--baseline perword:MODE needs --baseline-model CKPT");
    const auto mode = parse_combine_mode(args.baseline.substr(8));
    report = evaluate_perword(perword_from_checkpoint(read_checkpoint(args.baseline_model)), data, mode);
  } else {
    throw UsageError("unknown baseline '" + args.baseline + "'");
  }

  const auto text = report.to_text();
  std::cout << text;
  if (!args.report.empty()) {
    std::ofstream out(args.report, args.append ? std::ios::app : std::ios::trunc);
    if (!out) throw UsageError("cannot write report " + args.report);
    out << text;
  }
  return kExitOk;
}

// ---- predict ---------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string image;
  std::string expression;
  std::string out_mask;
  std::string out_heatmap;
};

int cmd_predict(const PredictArgs& args) {
  const auto model = model_from_checkpoint(read_checkpoint(args.model));
  const auto image = to_tensor(read_ppm(args.image));
  const auto scores = predict_scores(model, image, tokenize(args.expression));
  write_pgm(args.out_mask, to_gray(decide(scores)));
  if (!args.out_heatmap.empty()) {
    const auto [lo, hi] = std::minmax_element(scores.data().begin(), scores.data().end());
    const double range = *hi - *lo;
    GrayImage heat{scores.dim(2), scores.dim(1), std::vector<std::uint8_t>(scores.numel())};
    for (std::size_t i = 0; i < scores.numel(); ++i) {
      heat.pixels[i] = range > 0 ? static_cast<std::uint8_t>(std::lround(255.0 * (scores[i] - *lo) / range)) : 0;
    }
    char comment[96];
    std::snprintf(comment, sizeof comment, "min=%.17g max=%.17g", *lo, *hi);
    write_pgm(args.out_heatmap, heat, comment);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Referring-expression segmentation on synthetic scenes"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_option("--count", gen.count, "Number of samples");
  gen_cmd->add_option("--size", gen.size, "Canvas size WxH");
  gen_cmd->add_option("--splits", gen.splits, "Split ratio train:val:test");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Run one training stage");
  train_cmd->add_option("--data", train.data, "Corpus manifest")->required();
  train_cmd->add_option("--split", train.split, "Manifest split to train on");
  train_cmd->add_option("--stage", train.stage, "low | high | perword")->required();
  train_cmd->add_option("--init", train.init, "Checkpoint to start from");
  train_cmd->add_option("--config", train.config, "key=value config file");
  train_cmd->add_option("--out", train.out, "Output checkpoint")->required();
  auto* seed_opt = train_cmd->add_option("--seed", train.seed, "Random seed (overrides config)");
  train_cmd->add_flag("--fresh-deconv", train.fresh_deconv, "Reset the deconvolution filter to bilinear");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model or a baseline");
  eval_cmd->add_option("--data", eval.data, "Corpus manifest")->required();
  eval_cmd->add_option("--split", eval.split, "Manifest split to evaluate");
  eval_cmd->add_option("--model", eval.model, "Segmentation checkpoint");
  eval_cmd->add_option("--baseline", eval.baseline, "whole-image | perword:average|intersection|union");
  eval_cmd->add_option("--baseline-model", eval.baseline_model, "Per-word checkpoint");
  eval_cmd->add_option("--report", eval.report, "Report file");
  eval_cmd->add_flag("--append", eval.append, "Append to the report instead of overwriting");

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "Segment one image");
  pred_cmd->add_option("--model", pred.model, "Segmentation checkpoint")->required();
  pred_cmd->add_option("--image", pred.image, "Input PPM")->required();
  pred_cmd->add_option("--expression", pred.expression, "Referring expression")->required();
  pred_cmd->add_option("--out-mask", pred.out_mask, "Output mask PGM")->required();
  pred_cmd->add_option("--out-heatmap", pred.out_heatmap, "Output score heatmap PGM");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  train.seed_set = seed_opt->count() > 0;

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(eval);
    if (*pred_cmd) return cmd_predict(pred);
  } catch (const NumericFault& e) {
    std::cerr << "numeric fault: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
