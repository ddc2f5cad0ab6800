#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "boltzlens/network.hpp"

namespace bl::lens {

// Per-pixel energy of a conv layer: negative sum of the linear channels.
struct EnergyMap {
  Tensor<double> values;  // [H,W]
  int layer_index = 0;
  enum class Formula { ConvMrf, FcBoltzmann } tag = Formula::ConvMrf;
};

// Normalized histogram over pre-defined bin edges. probs are counts / total
// value count, so bin mass plus out-of-range mass is 1.
struct EmpiricalDistribution {
  std::vector<double> edges;  // B+1, strictly increasing
  std::vector<double> probs;  // B
  std::size_t out_of_range_count = 0;
  std::size_t total_count = 0;
  double out_of_range_mass = 0.0;
};

// Discrete Boltzmann summary of an fc layer: probs[k] = exp(-E_k) / Z.
struct DiscreteBoltzmann {
  std::vector<double> energies;  // -activations
  std::vector<double> probs;
  double partition_z = 0.0;
};

struct PriorSpec {
  double mean = 0.0;
  double variance = 1024.0;
};

// 101 edges spanning [-4 sigma, +4 sigma] for sigma = 32 (100 bins).
std::vector<double> default_bin_edges();

EnergyMap conv_energy(const LayerTrace<double>& trace, int layer_index);
DiscreteBoltzmann fc_boltzmann(const LayerTrace<double>& trace, int layer_index);

EmpiricalDistribution empirical_distribution(std::span<const double> values,
                                             const std::vector<double>& edges);

// Bin-wise Gaussian CDF mass; tails beyond the edges fold into
// out_of_range_mass.
EmpiricalDistribution discretize_prior(const PriorSpec& prior,
                                       const std::vector<double>& edges);

// KL[p || q] over shared bins; zero q-bins are smoothed by eps = 1e-9 and q
// renormalized.
double kl_divergence(const EmpiricalDistribution& p, const EmpiricalDistribution& q);

// One row per reported layer distribution. Discrete (fc) panels reuse the
// histogram fields with unit-width integer edges.
struct ReportRow {
  std::string layer;
  EmpiricalDistribution dist;
  std::optional<double> kl;
  std::optional<double> partition_z;
};

struct LayerKlReport {
  std::vector<ReportRow> rows;
};

// The six-panel single-image report: input histogram + KL, first conv energy
// histogram + KL, second conv energy histogram, then the two fc Boltzmann
// distributions.
LayerKlReport layer_kl_report(const Network<double>& net, const Tensor<double>& x,
                              const PriorSpec& prior, const std::vector<double>& edges);

// Mean KL[prior || F1 energy histogram] over a set of inputs. Only the first
// conv layer is evaluated.
double avg_kl_f1(const Network<double>& net, const std::vector<Tensor<double>>& inputs,
                 const PriorSpec& prior, const std::vector<double>& edges);

void write_report_csv(const LayerKlReport& report, const std::string& bins_path,
                      const std::string& summary_path);

}  // namespace bl::lens
