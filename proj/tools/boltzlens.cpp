// boltzlens: synthetic Gaussian digit generation, CNN training, and
// per-layer distribution analysis from one binary.

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "boltzlens/bayesnet.hpp"
#include "boltzlens/checkpoint.hpp"
#include "boltzlens/experiments.hpp"
#include "boltzlens/idx.hpp"
#include "boltzlens/problens.hpp"
#include "boltzlens/synthgen.hpp"
#include "boltzlens/verify.hpp"

namespace fs = std::filesystem;
using namespace bl;

namespace {

std::string env_precision() {
  const char* p = std::getenv("BOLTZLENS_PRECISION");
  if (!p) return "f64";
  const std::string s(p);
  if (s != "f32" && s != "f64")
    throw DimensionError("BOLTZLENS_PRECISION must be f32 or f64, got '" + s + "'");
  return s;
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory: " + out);
}

struct TrainArgs {
  std::string preset = "cnn2";
  std::string data;
  int epochs = 30;
  std::uint64_t seed = 0;
  double lr = 0.01;
  int batch = 32;
  std::string labels = "real";
  std::string out = ".";
};

// Flat key = value config mirroring the experiment fields. Flags given on the
// command line win over file values.
void apply_train_config(const std::string& path, const CLI::App& cmd, TrainArgs& a) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path);
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  auto unset = [&](const std::string& flag) { return cmd.count(flag) == 0; };
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DimensionError("config line " + std::to_string(lineno) +
                           ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "preset") {
        if (unset("--preset")) a.preset = value;
      } else if (key == "data" || key == "dataPath") {
        if (unset("--data")) a.data = value;
      } else if (key == "epochs") {
        if (unset("--epochs")) a.epochs = std::stoi(value);
      } else if (key == "seed") {
        if (unset("--seed")) a.seed = std::stoull(value);
      } else if (key == "lr") {
        if (unset("--lr")) a.lr = std::stod(value);
      } else if (key == "batch" || key == "batchSize") {
        if (unset("--batch")) a.batch = std::stoi(value);
      } else if (key == "labels" || key == "labelMode") {
        if (unset("--labels")) a.labels = value;
      } else if (key == "out") {
        if (unset("--out")) a.out = value;
      } else {
        throw DimensionError("config: unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw DimensionError("config: unparseable value for '" + key + "': " + value);
    } catch (const std::out_of_range&) {
      throw DimensionError("config: value out of range for '" + key + "': " + value);
    }
  }
  if (a.epochs < 1 || a.batch < 1 || !(a.lr > 0.0))
    throw DimensionError("config: epochs, batch and lr must be positive");
}

int do_train(const TrainArgs& a) {
  ensure_out_dir(a.out);
  auto [train, test] = exp::load_dataset(a.data);
  exp::ExperimentConfig cfg;
  cfg.preset = a.preset;
  cfg.data_path = a.data;
  cfg.epochs = a.epochs;
  cfg.seed = a.seed;
  cfg.lr = a.lr;
  cfg.batch_size = a.batch;
  cfg.label_mode = a.labels;
  cfg.precision = env_precision();
  exp::RunResult r = exp::run_training(cfg, std::move(train), std::move(test));
  exp::write_metrics_csv(r.log, (fs::path(a.out) / "metrics.csv").string());
  save_checkpoint(r.final_net, (fs::path(a.out) / "checkpoint_final.blnz").string());
  save_checkpoint(r.best_net, (fs::path(a.out) / "checkpoint_best.blnz").string());
  const auto& last = r.log.rows.back();
  std::cout << "trained " << a.preset << " for " << a.epochs
            << " epochs: train error " << last.train_error << ", test error "
            << last.test_error << ", avg KL(F1) " << last.avg_kl_f1 << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boltzmann-instrumented CNN training on synthetic Gaussian digits"};
  app.require_subcommand(1);

  // synth-gen
  auto* sg = app.add_subcommand("synth-gen", "generate the synthetic dataset");
  std::vector<std::string> source_files;
  int per_class_train = 200, per_class_test = 200;
  std::uint64_t sg_seed = 0;
  std::string sg_out;
  double threshold = 127.0;
  bool flip_polarity = false, shuffle_region = false;
  sg->add_option("--source", source_files, "IDX image and label files")
      ->expected(2)
      ->required();
  sg->add_option("--per-class-train", per_class_train, "training images per class")
      ->check(CLI::PositiveNumber);
  sg->add_option("--per-class-test", per_class_test, "testing images per class")
      ->check(CLI::PositiveNumber);
  sg->add_option("--seed", sg_seed, "master seed");
  sg->add_option("--out", sg_out, "output directory")->required();
  sg->add_option("--threshold", threshold, "binarization threshold");
  sg->add_flag("--flip-polarity", flip_polarity, "reverse region assignment order");
  sg->add_flag("--shuffle-within-region", shuffle_region,
               "seeded shuffling inside each mask region");

  // train
  auto* tr = app.add_subcommand("train", "train a preset CNN");
  TrainArgs ta;
  tr->add_option("--preset", ta.preset, "cnn1|cnn2|cnn3")
      ->check(CLI::IsMember({"cnn1", "cnn2", "cnn3"}));
  std::string tr_config;
  tr->add_option("--data", ta.data, "dataset directory or train.blds");
  tr->add_option("--epochs", ta.epochs, "training epochs")->check(CLI::PositiveNumber);
  tr->add_option("--seed", ta.seed, "seed");
  tr->add_option("--lr", ta.lr, "learning rate")->check(CLI::PositiveNumber);
  tr->add_option("--batch", ta.batch, "batch size")->check(CLI::PositiveNumber);
  tr->add_option("--labels", ta.labels, "real|random")
      ->check(CLI::IsMember({"real", "random"}));
  tr->add_option("--out", ta.out, "output directory")->required();
  tr->add_option("--config", tr_config, "key = value config file");

  // report
  auto* rp = app.add_subcommand("report", "single-image distribution report");
  std::string rp_checkpoint, rp_data, rp_out;
  std::size_t rp_index = 0;
  rp->add_option("--checkpoint", rp_checkpoint, "checkpoint file")->required();
  rp->add_option("--data", rp_data, "dataset directory or train.blds")->required();
  rp->add_option("--index", rp_index, "test image index");
  rp->add_option("--out", rp_out, "output directory")->required();

  // sweep
  auto* sw = app.add_subcommand("sweep", "width sweep over cnn1/cnn2/cnn3");
  std::string sw_data, sw_out;
  int sw_epochs = 30;
  std::uint64_t sw_seed = 0;
  sw->add_option("--data", sw_data, "dataset directory or train.blds")->required();
  sw->add_option("--epochs", sw_epochs, "training epochs")->check(CLI::PositiveNumber);
  sw->add_option("--seed", sw_seed, "seed");
  sw->add_option("--out", sw_out, "output directory")->required();

  // random-label
  auto* rl = app.add_subcommand("random-label", "cnn3 on random labels");
  std::string rl_data, rl_out;
  int rl_epochs = 200;
  std::uint64_t rl_seed = 0;
  rl->add_option("--data", rl_data, "dataset directory or train.blds")->required();
  rl->add_option("--epochs", rl_epochs, "training epochs")->check(CLI::PositiveNumber);
  rl->add_option("--seed", rl_seed, "seed");
  rl->add_option("--out", rl_out, "output directory")->required();

  // verify
  auto* vf = app.add_subcommand("verify", "run the fast invariant suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sg->parsed()) {
      ensure_out_dir(sg_out);
      const auto sources = load_idx(source_files[0], source_files[1]);
      synth::GenOptions opts;
      opts.threshold = threshold;
      opts.flip_polarity = flip_polarity;
      opts.shuffle_within_region = shuffle_region;
      const synth::SyntheticDataset ds =
          synth::generate_dataset(sources, per_class_train, per_class_test, sg_seed, opts);
      synth::save_blds(ds.train, (fs::path(sg_out) / "train.blds").string());
      synth::save_blds(ds.test, (fs::path(sg_out) / "test.blds").string());
      synth::write_manifest(ds, sources, (fs::path(sg_out) / "manifest.txt").string());
      std::cout << "wrote " << ds.train.size() << " train + " << ds.test.size()
                << " test samples to " << sg_out << "\n";
    } else if (tr->parsed()) {
      if (!tr_config.empty()) apply_train_config(tr_config, *tr, ta);
      if (ta.data.empty()) {
        std::cerr << "--data is required\n";
        return 1;
      }
      return do_train(ta);
    } else if (rp->parsed()) {
      ensure_out_dir(rp_out);
      const Network<double> net = load_checkpoint(rp_checkpoint);
      auto [train, test] = exp::load_dataset(rp_data);
      (void)train;
      const lens::LayerKlReport report = exp::single_image_report(net, test, rp_index);
      lens::write_report_csv(report, (fs::path(rp_out) / "report_bins.csv").string(),
                             (fs::path(rp_out) / "report_summary.csv").string());
      for (const auto& row : report.rows)
        if (row.kl)
          std::cout << "KL[prior || " << row.layer << "] = " << *row.kl << "\n";
    } else if (sw->parsed()) {
      ensure_out_dir(sw_out);
      auto [train, test] = exp::load_dataset(sw_data);
      const exp::SweepResult sweep = exp::width_sweep(train, test, sw_epochs, sw_seed);
      exp::write_sweep_csv(sweep, (fs::path(sw_out) / "sweep_kl.csv").string(),
                           (fs::path(sw_out) / "sweep_error.csv").string());
      for (const auto& [preset, net] : sweep.nets)
        save_checkpoint(net, (fs::path(sw_out) / (preset + ".blnz")).string());
      for (const auto& [preset, log] : sweep.logs)
        std::cout << preset << ": final test error " << log.rows.back().test_error
                  << ", final avg KL(F1) " << log.rows.back().avg_kl_f1 << "\n";
    } else if (rl->parsed()) {
      TrainArgs a;
      a.preset = "cnn3";
      a.data = rl_data;
      a.epochs = rl_epochs;
      a.seed = rl_seed;
      a.labels = "random";
      a.out = rl_out;
      return do_train(a);
    } else if (vf->parsed()) {
      bool all_ok = true;
      for (const auto& c : verify::run_all()) {
        std::cout << (c.passed ? "PASS" : "FAIL") << "  " << c.name << ": " << c.detail
                  << "\n";
        all_ok = all_ok && c.passed;
      }
      return all_ok ? 0 : 1;
    }
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
