#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "boltzlens/network.hpp"
#include "boltzlens/problens.hpp"
#include "boltzlens/synthgen.hpp"

namespace bl::exp {

struct ExperimentConfig {
  std::string preset = "cnn2";
  std::string data_path;  // dataset directory or train.blds path
  int epochs = 30;
  int batch_size = 32;
  double lr = 0.01;
  std::uint64_t seed = 0;
  std::string label_mode = "real";  // real | random
  int kl_eval_every = 1;            // epochs between avgKlF1 evaluations
  std::string precision = "f64";    // f32 | f64
  std::vector<double> bin_edges;    // empty -> default edges
};

struct MetricsRow {
  int epoch = 0;  // 0 is the pre-training evaluation
  double train_error = 0.0;
  double test_error = 0.0;
  double avg_kl_f1 = 0.0;
  double wall_clock_sec = 0.0;
};

struct MetricsLog {
  std::vector<MetricsRow> rows;
};

struct RunResult {
  MetricsLog log;
  Network<double> final_net;
  Network<double> best_net;  // lowest test error
};

// Resolves --data to a (train, test) pair: either a directory containing
// train.blds/test.blds or the train file itself with a sibling test file.
std::pair<std::vector<synth::SyntheticSample>, std::vector<synth::SyntheticSample>>
load_dataset(const std::string& path);

// Misclassification rate: fraction of argmax(probs) != label.
double evaluate(const Network<double>& net,
                const std::vector<synth::SyntheticSample>& samples);

Tensor<double> sample_input(const synth::SyntheticSample& s);

// Mini-batch SGD over the Table-1 presets, logging per-epoch metrics. Epoch 0
// row records the untrained network. Deterministic in (config, data).
RunResult run_training(const ExperimentConfig& cfg,
                       std::vector<synth::SyntheticSample> train,
                       std::vector<synth::SyntheticSample> test);

struct SweepResult {
  std::map<std::string, MetricsLog> logs;      // per preset
  std::map<std::string, Network<double>> nets; // final networks
};

SweepResult width_sweep(const std::vector<synth::SyntheticSample>& train,
                        const std::vector<synth::SyntheticSample>& test, int epochs,
                        std::uint64_t seed);

lens::LayerKlReport single_image_report(const Network<double>& net,
                                        const std::vector<synth::SyntheticSample>& test,
                                        std::size_t index);

void write_metrics_csv(const MetricsLog& log, const std::string& path);
void write_sweep_csv(const SweepResult& sweep, const std::string& kl_path,
                     const std::string& error_path);

}  // namespace bl::exp
