#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "support/glyphs.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(BOLTZLENS_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct CliFixture {
  fs::path root;
  std::string imgs, labels, data_dir;

  CliFixture() {
    root = fs::temp_directory_path() / ("cli-" + std::to_string(::getpid()));
    fs::create_directories(root);
    const auto corpus = fixtures::glyph_corpus(2);
    std::tie(imgs, labels) = fixtures::write_idx_corpus(corpus, (root / "src").string());
    data_dir = (root / "data").string();
  }
  ~CliFixture() { fs::remove_all(root); }
};

CliFixture& fx() {
  static CliFixture f;
  return f;
}

}  // namespace

TEST_CASE("usage errors exit nonzero with distinct causes") {
  CHECK(run("") != 0);
  CHECK(run("frobnicate") != 0);
  CHECK(run("train --preset cnn2 --out x") != 0);       // missing --data
  CHECK(run("train --preset cnn9 --data d --out x") != 0);
  CHECK(run("train --preset cnn1 --data d --epochs -1 --out x") != 0);
}

TEST_CASE("verify exits 0") { CHECK(run("verify") == 0); }

TEST_CASE("missing input files exit 2") {
  CHECK(run("train --preset cnn1 --data /nonexistent.blds --epochs 1 --out " +
            (fx().root / "t0").string()) == 2);
  CHECK(run("synth-gen --source /no.idx /no2.idx --out " + (fx().root / "t1").string()) ==
        2);
  CHECK(run("report --checkpoint /no.blnz --data /no.blds --out " +
            (fx().root / "t2").string()) == 2);
}

TEST_CASE("synth-gen / train / report / sweep pipeline produces its files") {
  CliFixture& f = fx();
  REQUIRE(run("synth-gen --source " + f.imgs + " " + f.labels +
              " --per-class-train 3 --per-class-test 2 --seed 5 --out " + f.data_dir) ==
          0);
  CHECK(fs::exists(fs::path(f.data_dir) / "train.blds"));
  CHECK(fs::exists(fs::path(f.data_dir) / "test.blds"));
  CHECK(fs::exists(fs::path(f.data_dir) / "manifest.txt"));

  const std::string train_out = (f.root / "run").string();
  REQUIRE(run("train --preset cnn1 --data " + f.data_dir +
              " --epochs 1 --seed 3 --out " + train_out) == 0);
  CHECK(fs::exists(fs::path(train_out) / "metrics.csv"));
  CHECK(fs::exists(fs::path(train_out) / "checkpoint_final.blnz"));
  CHECK(fs::exists(fs::path(train_out) / "checkpoint_best.blnz"));

  const std::string rep_out = (f.root / "rep").string();
  REQUIRE(run("report --checkpoint " + (fs::path(train_out) / "checkpoint_final.blnz").string() +
              " --data " + f.data_dir + " --index 0 --out " + rep_out) == 0);
  CHECK(fs::exists(fs::path(rep_out) / "report_bins.csv"));
  CHECK(fs::exists(fs::path(rep_out) / "report_summary.csv"));
  CHECK(run("report --checkpoint " + (fs::path(train_out) / "checkpoint_final.blnz").string() +
            " --data " + f.data_dir + " --index 99999 --out " + rep_out) == 1);

  const std::string sweep_out = (f.root / "sweep").string();
  REQUIRE(run("sweep --data " + f.data_dir + " --epochs 1 --seed 2 --out " + sweep_out) ==
          0);
  CHECK(fs::exists(fs::path(sweep_out) / "sweep_kl.csv"));
  CHECK(fs::exists(fs::path(sweep_out) / "sweep_error.csv"));
  CHECK(fs::exists(fs::path(sweep_out) / "cnn1.blnz"));
  CHECK(fs::exists(fs::path(sweep_out) / "cnn2.blnz"));
  CHECK(fs::exists(fs::path(sweep_out) / "cnn3.blnz"));

  const std::string rl_out = (f.root / "rl").string();
  REQUIRE(run("random-label --data " + f.data_dir + " --epochs 1 --seed 1 --out " +
              rl_out) == 0);
  CHECK(fs::exists(fs::path(rl_out) / "metrics.csv"));
}

TEST_CASE("train is seed-deterministic end to end in f64") {
  CliFixture& f = fx();
  auto bytes = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), {});
  };
  const std::string a = (f.root / "det-a").string();
  const std::string b = (f.root / "det-b").string();
  REQUIRE(run("train --preset cnn1 --data " + f.data_dir +
              " --epochs 1 --seed 12 --out " + a) == 0);
  REQUIRE(run("train --preset cnn1 --data " + f.data_dir +
              " --epochs 1 --seed 12 --out " + b) == 0);
  CHECK(bytes(fs::path(a) / "checkpoint_final.blnz") ==
        bytes(fs::path(b) / "checkpoint_final.blnz"));

  // BOLTZLENS_PRECISION=f32 changes the trajectory, bad value fails
  const std::string c = (f.root / "det-c").string();
  REQUIRE(std::system(("BOLTZLENS_PRECISION=f32 " + std::string(BOLTZLENS_BIN) +
                       " train --preset cnn1 --data " + f.data_dir +
                       " --epochs 1 --seed 12 --out " + c + " >/dev/null 2>&1")
                          .c_str()) == 0);
  CHECK(bytes(fs::path(c) / "checkpoint_final.blnz") !=
        bytes(fs::path(a) / "checkpoint_final.blnz"));
  const int bad = std::system(("BOLTZLENS_PRECISION=f99 " + std::string(BOLTZLENS_BIN) +
                               " train --preset cnn1 --data " + f.data_dir +
                               " --epochs 1 --seed 12 --out " + (f.root / "det-d").string() +
                               " >/dev/null 2>&1")
                                  .c_str());
  CHECK(WEXITSTATUS(bad) == 1);
}

TEST_CASE("config file values are applied and overridden by flags") {
  CliFixture& f = fx();
  const fs::path cfg = f.root / "train.cfg";
  std::ofstream(cfg) << "preset=cnn1\nepochs=1\nseed=6\n";
  const std::string out = (f.root / "cfg-run").string();
  CHECK(run("train --config " + cfg.string() + " --data " + f.data_dir + " --out " +
            out) == 0);
  std::ifstream is(fs::path(out) / "metrics.csv");
  std::string line;
  int rows = 0;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);  // header + epochs 0 and 1
}
