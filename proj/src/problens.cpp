#include "boltzlens/problens.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "boltzlens/checkpoint.hpp"

namespace bl::lens {

std::vector<double> default_bin_edges() {
  const double sigma = 32.0;
  std::vector<double> edges(101);
  for (int i = 0; i <= 100; ++i) edges[i] = -4.0 * sigma + 8.0 * sigma * i / 100.0;
  return edges;
}

namespace {

const TraceEntry<double>& find_entry(const LayerTrace<double>& trace, int layer_index,
                                     LayerKind kind, const char* what) {
  for (const auto& e : trace.entries)
    if (e.layer_index == layer_index) {
      if (e.kind != kind)
        throw DimensionError(std::string(what) + ": layer " +
                             std::to_string(layer_index) + " has the wrong kind");
      return e;
    }
  throw DimensionError(std::string(what) + ": no trace entry for layer " +
                       std::to_string(layer_index));
}

// fc activations: sigma(g) when an activation was applied, else the linear
// output itself. The final layer's softmax is normalization, not activation,
// so there the logits are the activations.
const Tensor<double>& fc_activations(const TraceEntry<double>& e) {
  return e.relu_applied ? e.act : e.pre;
}

void check_edges(const std::vector<double>& edges) {
  if (edges.size() < 2)
    throw DimensionError("bin edges: need at least 2 edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1]))
      throw DimensionError("bin edges: must be strictly increasing at index " +
                           std::to_string(i));
}

double gauss_cdf(double x, double mean, double sigma) {
  return 0.5 * std::erfc(-(x - mean) / (sigma * std::sqrt(2.0)));
}

}  // namespace

EnergyMap conv_energy(const LayerTrace<double>& trace, int layer_index) {
  const auto& e = find_entry(trace, layer_index, LayerKind::Conv, "conv_energy");
  const int h = e.pre.dim(0), w = e.pre.dim(1), c = e.pre.dim(2);
  EnergyMap map;
  map.layer_index = layer_index;
  map.tag = EnergyMap::Formula::ConvMrf;
  map.values = Tensor<double>({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      for (int n = 0; n < c; ++n) sum += e.pre.at3(y, x, n);
      map.values.at2(y, x) = -sum;
    }
  return map;
}

DiscreteBoltzmann fc_boltzmann(const LayerTrace<double>& trace, int layer_index) {
  const auto& e = find_entry(trace, layer_index, LayerKind::Fc, "fc_boltzmann");
  const Tensor<double>& act = fc_activations(e);
  DiscreteBoltzmann b;
  b.energies.resize(act.numel());
  for (std::size_t i = 0; i < act.numel(); ++i) b.energies[i] = -act[i];
  const Tensor<double> probs = softmax(act);
  b.probs.assign(probs.data.begin(), probs.data.end());
  double z = 0.0;
  for (std::size_t i = 0; i < act.numel(); ++i) z += std::exp(act[i]);
  b.partition_z = z;
  return b;
}

EmpiricalDistribution empirical_distribution(std::span<const double> values,
                                             const std::vector<double>& edges) {
  check_edges(edges);
  if (values.empty())
    throw DimensionError("empirical_distribution: empty value array");
  EmpiricalDistribution d;
  d.edges = edges;
  d.probs.assign(edges.size() - 1, 0.0);
  d.total_count = values.size();
  for (const double v : values) {
    // last bin is right-closed
    if (v < edges.front() || v > edges.back()) {
      ++d.out_of_range_count;
      continue;
    }
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::size_t bin = static_cast<std::size_t>(it - edges.begin());
    bin = bin == 0 ? 0 : bin - 1;
    if (bin >= d.probs.size()) bin = d.probs.size() - 1;
    d.probs[bin] += 1.0;
  }
  for (double& p : d.probs) p /= static_cast<double>(values.size());
  d.out_of_range_mass =
      static_cast<double>(d.out_of_range_count) / static_cast<double>(values.size());
  return d;
}

EmpiricalDistribution discretize_prior(const PriorSpec& prior,
                                       const std::vector<double>& edges) {
  check_edges(edges);
  if (!(prior.variance > 0.0))
    throw DimensionError("discretize_prior: variance must be positive");
  const double sigma = std::sqrt(prior.variance);
  EmpiricalDistribution d;
  d.edges = edges;
  d.probs.resize(edges.size() - 1);
  double inside = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    d.probs[i] = gauss_cdf(edges[i + 1], prior.mean, sigma) -
                 gauss_cdf(edges[i], prior.mean, sigma);
    inside += d.probs[i];
  }
  d.out_of_range_mass = 1.0 - inside;
  d.total_count = 0;
  return d;
}

double kl_divergence(const EmpiricalDistribution& p, const EmpiricalDistribution& q) {
  if (p.edges != q.edges)
    throw DimensionError("kl_divergence: bin edges differ");
  const double eps = 1e-9;
  std::vector<double> qs = q.probs;
  double qsum = 0.0;
  for (double& v : qs) {
    if (v == 0.0) v = eps;
    qsum += v;
  }
  double psum = 0.0;
  for (const double v : p.probs) psum += v;
  if (psum <= 0.0) return 0.0;
  double kl = 0.0;
  for (std::size_t i = 0; i < p.probs.size(); ++i) {
    const double pi = p.probs[i] / psum;
    if (pi > 0.0) kl += pi * std::log(pi / (qs[i] / qsum));
  }
  return std::max(kl, 0.0);
}

namespace {

EmpiricalDistribution boltzmann_as_bins(const DiscreteBoltzmann& b) {
  EmpiricalDistribution d;
  d.edges.resize(b.probs.size() + 1);
  for (std::size_t i = 0; i < d.edges.size(); ++i) d.edges[i] = static_cast<double>(i);
  d.probs = b.probs;
  d.total_count = b.probs.size();
  return d;
}

}  // namespace

LayerKlReport layer_kl_report(const Network<double>& net, const Tensor<double>& x,
                              const PriorSpec& prior, const std::vector<double>& edges) {
  auto [probs, trace] = forward_with_trace(net, x);
  const EmpiricalDistribution prior_bins = discretize_prior(prior, edges);

  LayerKlReport report;

  ReportRow input_row;
  input_row.layer = "input";
  input_row.dist = empirical_distribution(std::span(x.data), edges);
  input_row.kl = kl_divergence(prior_bins, input_row.dist);
  report.rows.push_back(std::move(input_row));

  std::vector<int> conv_layers, fc_layers;
  for (const auto& e : trace.entries) {
    if (e.kind == LayerKind::Conv) conv_layers.push_back(e.layer_index);
    if (e.kind == LayerKind::Fc) fc_layers.push_back(e.layer_index);
  }

  for (std::size_t i = 0; i < conv_layers.size(); ++i) {
    const EnergyMap em = conv_energy(trace, conv_layers[i]);
    ReportRow row;
    row.layer = "F" + std::to_string(i + 1);
    row.dist = empirical_distribution(std::span(em.values.data), edges);
    if (i == 0) row.kl = kl_divergence(prior_bins, row.dist);
    report.rows.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < fc_layers.size(); ++i) {
    const DiscreteBoltzmann b = fc_boltzmann(trace, fc_layers[i]);
    ReportRow row;
    row.layer = (i + 1 == fc_layers.size())
                    ? "FY"
                    : "F" + std::to_string(conv_layers.size() + i + 1);
    row.dist = boltzmann_as_bins(b);
    row.partition_z = b.partition_z;
    report.rows.push_back(std::move(row));
  }
  return report;
}

double avg_kl_f1(const Network<double>& net, const std::vector<Tensor<double>>& inputs,
                 const PriorSpec& prior, const std::vector<double>& edges) {
  if (net.conv.empty())
    throw DimensionError("avg_kl_f1: network has no conv layer");
  const EmpiricalDistribution prior_bins = discretize_prior(prior, edges);
  const ConvLayerParams<double>& p = net.conv.front();
  double sum = 0.0;
  for (const Tensor<double>& x : inputs) {
    Tensor<double> in = x;
    if (in.shape.size() == 2) in.shape = {in.shape[0], in.shape[1], 1};
    const Tensor<double> pre = conv2d_im2col(in, p);
    const int hw = pre.dim(0) * pre.dim(1);
    const int c = pre.dim(2);
    std::vector<double> energy(hw);
    for (int pix = 0; pix < hw; ++pix) {
      double s = 0.0;
      const double* row = pre.data.data() + static_cast<std::size_t>(pix) * c;
      for (int n = 0; n < c; ++n) s += row[n];
      energy[pix] = -s;
    }
    sum += kl_divergence(prior_bins, empirical_distribution(std::span(energy), edges));
  }
  return sum / static_cast<double>(inputs.size());
}

void write_report_csv(const LayerKlReport& report, const std::string& bins_path,
                      const std::string& summary_path) {
  std::ofstream bins(bins_path);
  if (!bins) throw IoError("cannot open for writing: " + bins_path);
  bins << "layer,binLeft,binRight,prob\n";
  for (const ReportRow& row : report.rows)
    for (std::size_t i = 0; i < row.dist.probs.size(); ++i)
      bins << row.layer << "," << row.dist.edges[i] << "," << row.dist.edges[i + 1]
           << "," << row.dist.probs[i] << "\n";
  std::ofstream summary(summary_path);
  if (!summary) throw IoError("cannot open for writing: " + summary_path);
  summary << "layer,kl,partitionZ\n";
  for (const ReportRow& row : report.rows) {
    summary << row.layer << ",";
    if (row.kl) summary << *row.kl;
    summary << ",";
    if (row.partition_z) summary << *row.partition_z;
    summary << "\n";
  }
}

}  // namespace bl::lens
