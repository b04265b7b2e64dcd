#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sys/wait.h>

#include "doctest.h"
#include "rseg/checkpoint.hpp"
#include "rseg/eval.hpp"
#include "rseg/image_io.hpp"
#include "rseg/synth.hpp"

using namespace rseg;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "rseg_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(RSEG_CLI) + " " + args + " >>" + (kWork / "cli.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string p(const fs::path& path) { return "'" + path.string() + "'"; }

void write_file(const fs::path& path, const std::string& text) { std::ofstream(path) << text; }

// Small enough to train in well under a second per stage.
const char* kQuickConfig =
    "backbone = 4/3/2/1/relu,4/3/2/1/relu\n"
    "d_embed = 4\n"
    "d_text = 4\n"
    "d_cls = 4\n"
    "iterations_low = 20\n"
    "iterations_high = 0\n"
    "log_every = 5\n";

struct Fixture {
  Fixture() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE_FIXTURE(Fixture, "gen-data writes split counts and is reproducible") {
    REQUIRE(run("gen-data --out " + p(kWork / "a") + " --count 100 --seed 4 --splits 8:1:1") == 0);
    REQUIRE(run("gen-data --out " + p(kWork / "b") + " --count 100 --seed 4 --splits 8:1:1") == 0);
    const auto records = read_manifest(kWork / "a" / "manifest.tsv");
    std::map<std::string, int> counts;
    for (const auto& r : records) ++counts[r.split];
    CHECK(counts["train"] == 80);
    CHECK(counts["val"] == 10);
    CHECK(counts["test"] == 10);
    CHECK(slurp(kWork / "a" / "manifest.tsv") == slurp(kWork / "b" / "manifest.tsv"));
    CHECK(slurp(kWork / "a" / "images" / "000042.ppm") == slurp(kWork / "b" / "images" / "000042.ppm"));
    CHECK(run("gen-data --out /proc/rseg-not-writable --count 2") == 2);
    CHECK(run("gen-data --out " + p(kWork / "c") + " --size 64") == 2);
    CHECK(run("gen-data") == 2);
  }

  TEST_CASE_FIXTURE(Fixture, "train preconditions and exit codes") {
    REQUIRE(run("gen-data --out " + p(kWork / "odd") + " --count 10 --size 60x60") == 0);
    CHECK(run("train --data " + p(kWork / "odd" / "manifest.tsv") + " --stage low --out " + p(kWork / "x.ckpt")) == 2);

    REQUIRE(run("gen-data --out " + p(kWork / "d") + " --count 10 --size 32x32") == 0);
    const auto manifest = p(kWork / "d" / "manifest.tsv");
    CHECK(run("train --data " + manifest + " --stage high --out " + p(kWork / "h.ckpt")) == 2);
    CHECK(run("train --data " + manifest + " --stage sideways --out " + p(kWork / "h.ckpt")) == 2);
    CHECK(run("train --data " + p(kWork / "missing.tsv") + " --stage low --out " + p(kWork / "h.ckpt")) == 2);

    write_file(kWork / "bad.cfg", "learning_speed = 3\n");
    CHECK(run("train --data " + manifest + " --stage low --config " + p(kWork / "bad.cfg") + " --out " +
              p(kWork / "h.ckpt")) == 2);

    write_file(kWork / "diverge.cfg", std::string(kQuickConfig) + "lr_low = inf\n");
    CHECK(run("train --data " + manifest + " --stage low --config " + p(kWork / "diverge.cfg") + " --out " +
              p(kWork / "h.ckpt")) == 3);
  }

  TEST_CASE_FIXTURE(Fixture, "two-stage training, evaluation and prediction") {
    REQUIRE(run("gen-data --out " + p(kWork / "d") + " --count 50 --size 32x32 --seed 2 --splits 1:0:0") == 0);
    const auto manifest = p(kWork / "d" / "manifest.tsv");
    write_file(kWork / "quick.cfg", kQuickConfig);
    REQUIRE(run("train --data " + manifest + " --stage low --config " + p(kWork / "quick.cfg") + " --seed 3 --out " +
                p(kWork / "low.ckpt")) == 0);
    REQUIRE(run("train --data " + manifest + " --stage high --init " + p(kWork / "low.ckpt") + " --out " +
                p(kWork / "high.ckpt")) == 0);

    const auto log = slurp(kWork / "low.ckpt.log");
    CHECK(log.find("iteration=0 ") != std::string::npos);
    CHECK(log.find("iteration=15 ") != std::string::npos);
    CHECK(log.find("iteration=19 ") != std::string::npos);
    CHECK(log.find("loss=") != std::string::npos);
    CHECK(log.find("seconds=") != std::string::npos);

    const auto low_ckpt = read_checkpoint(kWork / "low.ckpt");
    CHECK(low_ckpt.config.at("image_width") == "32");
    CHECK(low_ckpt.config.at("seed") == "3");
    CHECK(low_ckpt.config.at("alpha_f") == "3");

    // Zero high-stage iterations: the high map is the bilinear upsampling of the low coarse map.
    const auto low = model_from_checkpoint(low_ckpt);
    const auto high = model_from_checkpoint(read_checkpoint(kWork / "high.ckpt"));
    CHECK(high.has_deconv());
    for (const auto& s : load_manifest(kWork / "d" / "manifest.tsv", "train")) {
      Tape tape;
      const auto tokens = low.vocabulary().encode(s.tokens);
      const auto expect = low.upsample_coarse(tape, low.coarse(tape, s.image, tokens));
      const auto got = high.high(tape, s.image, tokens);
      double diff = 0.0;
      for (std::size_t i = 0; i < got.scores.numel(); ++i)
        diff = std::max(diff, std::abs(got.scores[i] - expect.scores[i]));
      CHECK(diff < 1e-12);
    }

    // Evaluation.
    const auto report_path = kWork / "report.txt";
    REQUIRE(run("eval --data " + manifest + " --split train --model " + p(kWork / "high.ckpt") + " --report " +
                p(report_path)) == 0);
    REQUIRE(run("eval --data " + manifest + " --split train --baseline whole-image --report " + p(report_path) +
                " --append") == 0);
    const auto reports = EvalReport::parse(slurp(report_path));
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].samples == 50);
    std::uint64_t gt = 0, canvas = 0;
    for (const auto& s : load_manifest(kWork / "d" / "manifest.tsv", "train")) {
      gt += s.mask.count();
      canvas += s.mask.size();
    }
    CHECK(reports[1].name == "whole-image");
    CHECK(std::abs(reports[1].overall_iou - static_cast<double>(gt) / static_cast<double>(canvas)) < 1e-9);
    const auto text = slurp(report_path);
    for (const char* key : {"precision@0.5=", "precision@0.6=", "precision@0.7=", "precision@0.8=", "precision@0.9="})
      CHECK(text.find(key) != std::string::npos);

    CHECK(run("eval --data " + manifest + " --model " + p(kWork / "high.ckpt") + " --baseline whole-image") == 2);
    CHECK(run("eval --data " + manifest) == 2);
    CHECK(run("eval --data " + manifest + " --baseline perword:average") == 2);

    // Per-word baseline through the CLI.
    write_file(kWork / "pw.cfg", std::string(kQuickConfig) + "perword_iterations = 10\n");
    REQUIRE(run("train --data " + manifest + " --stage perword --config " + p(kWork / "pw.cfg") + " --out " +
                p(kWork / "pw.ckpt")) == 0);
    REQUIRE(run("eval --data " + manifest + " --split train --baseline perword:union --baseline-model " + p(kWork / "pw.ckpt") +
                " --report " + p(kWork / "pw.txt")) == 0);
    CHECK(slurp(kWork / "pw.txt").find("fallback_rate=") != std::string::npos);

    // Prediction at a size different from the model input.
    RgbImage image{48, 40, std::vector<std::uint8_t>(48 * 40 * 3, 0)};
    for (std::size_t i = 0; i < 20 * 3 * 10; ++i) image.pixels[i] = 200;
    write_ppm(kWork / "in.ppm", image);
    const std::string predict = "predict --model " + p(kWork / "high.ckpt") + " --image " + p(kWork / "in.ppm") +
                                " --expression 'red square on the left' --out-heatmap ";
    REQUIRE(run(predict + p(kWork / "h1.pgm") + " --out-mask " + p(kWork / "m1.pgm")) == 0);
    REQUIRE(run(predict + p(kWork / "h2.pgm") + " --out-mask " + p(kWork / "m2.pgm")) == 0);
    const auto mask = read_pgm(kWork / "m1.pgm");
    CHECK(mask.width == 48);
    CHECK(mask.height == 40);
    CHECK(read_pgm(kWork / "h1.pgm").width == 48);
    CHECK(slurp(kWork / "m1.pgm") == slurp(kWork / "m2.pgm"));
    CHECK(slurp(kWork / "h1.pgm") == slurp(kWork / "h2.pgm"));
    const auto heat = slurp(kWork / "h1.pgm");
    CHECK(heat.find("# min=") != std::string::npos);
    CHECK(heat.find(" max=") != std::string::npos);
    CHECK(run("predict --model " + p(kWork / "high.ckpt") + " --image " + p(kWork / "nope.ppm") +
              " --expression x --out-mask " + p(kWork / "m3.pgm")) == 2);
  }
}
