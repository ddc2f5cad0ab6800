#include "boltzlens/experiments.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "boltzlens/checkpoint.hpp"

namespace fs = std::filesystem;

namespace bl::exp {

std::pair<std::vector<synth::SyntheticSample>, std::vector<synth::SyntheticSample>>
load_dataset(const std::string& path) {
  fs::path p(path);
  fs::path train_path, test_path;
  if (fs::is_directory(p)) {
    train_path = p / "train.blds";
    test_path = p / "test.blds";
  } else {
    train_path = p;
    test_path = p.parent_path() / "test.blds";
    if (p.filename() == "test.blds") train_path = p.parent_path() / "train.blds";
  }
  if (!fs::exists(train_path)) throw IoError("dataset not found: " + train_path.string());
  if (!fs::exists(test_path)) throw IoError("dataset not found: " + test_path.string());
  return {synth::load_blds(train_path.string()), synth::load_blds(test_path.string())};
}

Tensor<double> sample_input(const synth::SyntheticSample& s) {
  Tensor<double> x = s.pixels;
  x.shape = {synth::kSide, synth::kSide, 1};
  return x;
}

double evaluate(const Network<double>& net,
                const std::vector<synth::SyntheticSample>& samples) {
  if (samples.empty()) return 0.0;
  std::size_t wrong = 0;
  for (const auto& s : samples) {
    auto [probs, trace] = forward_with_trace(net, sample_input(s));
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.numel(); ++i)
      if (probs[i] > probs[best]) best = i;
    wrong += static_cast<int>(best) != s.label;
  }
  return static_cast<double>(wrong) / static_cast<double>(samples.size());
}

namespace {

template <class T>
RunResult run_training_impl(const ExperimentConfig& cfg,
                            const std::vector<synth::SyntheticSample>& train,
                            const std::vector<synth::SyntheticSample>& test) {
  const NetworkSpec spec = NetworkSpec::preset(cfg.preset);
  if (cfg.epochs < 1) throw DimensionError("run_training: epochs must be >= 1");
  if (!train.empty() && train.front().pixels.numel() !=
      static_cast<std::size_t>(spec.input_shape[0]) * spec.input_shape[1])
    throw DimensionError("run_training: dataset sample size does not match preset input");

  const std::vector<double> edges =
      cfg.bin_edges.empty() ? lens::default_bin_edges() : cfg.bin_edges;
  const lens::PriorSpec prior;

  std::vector<Tensor<T>> train_inputs;
  train_inputs.reserve(train.size());
  for (const auto& s : train) {
    Tensor<T> x = tensor_cast<T>(s.pixels);
    x.shape = {synth::kSide, synth::kSide, 1};
    train_inputs.push_back(std::move(x));
  }
  std::vector<Tensor<double>> test_inputs;
  test_inputs.reserve(test.size());
  for (const auto& s : test) test_inputs.push_back(sample_input(s));

  Network<T> net = init_params<T>(spec, cfg.seed);
  CounterRng shuffle_rng(derive_seed(cfg.seed, 0x5u));

  RunResult result;
  const auto t0 = std::chrono::steady_clock::now();
  double last_kl = 0.0;
  double best_err = 2.0;

  auto log_epoch = [&](int epoch) {
    Network<double> net64 = network_cast<double>(net);
    MetricsRow row;
    row.epoch = epoch;
    row.train_error = evaluate(net64, train);
    row.test_error = evaluate(net64, test);
    if (epoch % cfg.kl_eval_every == 0 || epoch == cfg.epochs)
      last_kl = lens::avg_kl_f1(net64, test_inputs, prior, edges);
    row.avg_kl_f1 = last_kl;
    row.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.rows.push_back(row);
    if (row.test_error < best_err) {
      best_err = row.test_error;
      result.best_net = std::move(net64);
    }
  };

  log_epoch(0);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  const T lr = static_cast<T>(cfg.lr);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      Gradients<T> batch = zero_gradients(net);
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        auto [probs, trace] = forward_with_trace(net, train_inputs[idx]);
        Gradients<T> g = backward(net, trace, train[idx].label);
        accumulate(batch, g);
      }
      scale(batch, static_cast<T>(1.0 / static_cast<double>(end - start)));
      sgd_step(net, batch, lr);
    }
    log_epoch(epoch);
  }
  result.final_net = network_cast<double>(net);
  return result;
}

}  // namespace

RunResult run_training(const ExperimentConfig& cfg,
                       std::vector<synth::SyntheticSample> train,
                       std::vector<synth::SyntheticSample> test) {
  if (cfg.label_mode == "random") {
    synth::randomize_labels(train, derive_seed(cfg.seed, 0x71));
    synth::randomize_labels(test, derive_seed(cfg.seed, 0x72));
  } else if (cfg.label_mode != "real") {
    throw DimensionError("run_training: label mode must be real or random");
  }
  if (cfg.precision == "f32") return run_training_impl<float>(cfg, train, test);
  if (cfg.precision == "f64") return run_training_impl<double>(cfg, train, test);
  throw DimensionError("run_training: precision must be f32 or f64");
}

SweepResult width_sweep(const std::vector<synth::SyntheticSample>& train,
                        const std::vector<synth::SyntheticSample>& test, int epochs,
                        std::uint64_t seed) {
  SweepResult sweep;
  for (const std::string preset : {"cnn1", "cnn2", "cnn3"}) {
    ExperimentConfig cfg;
    cfg.preset = preset;
    cfg.epochs = epochs;
    cfg.seed = seed;
    RunResult r = run_training(cfg, train, test);
    sweep.logs[preset] = std::move(r.log);
    sweep.nets[preset] = std::move(r.final_net);
  }
  return sweep;
}

lens::LayerKlReport single_image_report(const Network<double>& net,
                                        const std::vector<synth::SyntheticSample>& test,
                                        std::size_t index) {
  if (index >= test.size())
    throw DimensionError("single_image_report: index " + std::to_string(index) +
                         " out of range for test set of " + std::to_string(test.size()));
  return lens::layer_kl_report(net, sample_input(test[index]), lens::PriorSpec{},
                               lens::default_bin_edges());
}

void write_metrics_csv(const MetricsLog& log, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "epoch,trainError,testError,avgKlF1,wallClockSec\n";
  os.precision(12);
  for (const MetricsRow& r : log.rows)
    os << r.epoch << "," << r.train_error << "," << r.test_error << "," << r.avg_kl_f1
       << "," << r.wall_clock_sec << "\n";
}

void write_sweep_csv(const SweepResult& sweep, const std::string& kl_path,
                     const std::string& error_path) {
  std::ofstream kl(kl_path);
  if (!kl) throw IoError("cannot open for writing: " + kl_path);
  std::ofstream err(error_path);
  if (!err) throw IoError("cannot open for writing: " + error_path);
  kl << "preset,epoch,avgKlF1\n";
  err << "preset,epoch,testError\n";
  kl.precision(12);
  err.precision(12);
  for (const auto& [preset, log] : sweep.logs)
    for (const MetricsRow& r : log.rows) {
      if (r.epoch == 0) continue;
      kl << preset << "," << r.epoch << "," << r.avg_kl_f1 << "\n";
      err << preset << "," << r.epoch << "," << r.test_error << "\n";
    }
}

}  // namespace bl::exp
