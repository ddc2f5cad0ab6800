#include "boltzlens/bayesnet.hpp"

#include <cmath>
#include <span>

namespace bl::bayes {

ChainDecomposition decompose(const Network<double>& net, const Tensor<double>& x,
                             const std::vector<double>& edges) {
  auto [probs, trace] = forward_with_trace(net, x);
  (void)probs;

  ChainDecomposition chain;
  std::vector<int> conv_layers, fc_layers;
  for (const auto& e : trace.entries) {
    if (e.kind == LayerKind::Conv) conv_layers.push_back(e.layer_index);
    if (e.kind == LayerKind::Fc) fc_layers.push_back(e.layer_index);
  }
  if (fc_layers.empty())
    throw DimensionError("decompose: network has no fc output group");

  int group = 0;
  for (const int li : conv_layers) {
    Factor f;
    f.name = "F" + std::to_string(++group);
    f.kind = Factor::Kind::ConvGroup;
    f.energy = lens::conv_energy(trace, li);
    f.hist = lens::empirical_distribution(std::span(f.energy.values.data), edges);
    chain.factors.push_back(std::move(f));
  }
  for (std::size_t i = 0; i < fc_layers.size(); ++i) {
    Factor f;
    f.name = (i + 1 == fc_layers.size()) ? "FY" : "F" + std::to_string(++group);
    f.kind = Factor::Kind::FcGroup;
    f.boltzmann = lens::fc_boltzmann(trace, fc_layers[i]);
    chain.factors.push_back(std::move(f));
  }
  return chain;
}

Tensor<double> posterior_via_elimination(const ChainDecomposition& chain) {
  // Intermediate conditionals integrate to 1, so elimination reduces the
  // chain to its final factor.
  if (chain.factors.empty() || chain.factors.back().kind != Factor::Kind::FcGroup)
    throw DimensionError("posterior_via_elimination: chain must end in an fc group");
  const auto& probs = chain.factors.back().boltzmann.probs;
  Tensor<double> out({static_cast<int>(probs.size())});
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i];
  return out;
}

std::vector<FactorCheck> factor_normalization_check(const ChainDecomposition& chain) {
  std::vector<FactorCheck> checks;
  for (const Factor& f : chain.factors) {
    FactorCheck c;
    c.name = f.name;
    double mass = 0.0;
    if (f.kind == Factor::Kind::FcGroup) {
      for (const double p : f.boltzmann.probs) mass += p;
    } else {
      for (const double p : f.hist.probs) mass += p;
      mass += f.hist.out_of_range_mass;
    }
    c.mass = mass;
    c.passed = std::abs(mass - 1.0) < 1e-9;
    checks.push_back(c);
  }
  return checks;
}

}  // namespace bl::bayes
