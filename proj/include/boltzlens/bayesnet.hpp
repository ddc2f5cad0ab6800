#pragma once

#include <string>
#include <vector>

#include "boltzlens/problens.hpp"

namespace bl::bayes {

// One factor per random-variable group of the serial chain. A conv group
// (conv + absorbed relu/pool) carries an energy map and its histogram; an fc
// group carries a discrete Boltzmann distribution.
struct Factor {
  std::string name;  // F1, F2, ..., FY
  enum class Kind { ConvGroup, FcGroup } kind;
  lens::EnergyMap energy;            // ConvGroup
  lens::EmpiricalDistribution hist;  // ConvGroup
  lens::DiscreteBoltzmann boltzmann; // FcGroup
};

struct ChainDecomposition {
  std::vector<Factor> factors;
};

// Groups layers into random variables: each conv starts a group absorbing the
// following relu/pool; each fc is its own group (the last absorbs softmax).
ChainDecomposition decompose(const Network<double>& net, const Tensor<double>& x,
                             const std::vector<double>& edges);

// Eliminating the intermediate factors of a serial chain of normalized
// conditionals leaves the last factor untouched, so the posterior equals the
// network's own softmax output.
Tensor<double> posterior_via_elimination(const ChainDecomposition& chain);

struct FactorCheck {
  std::string name;
  bool passed = false;
  double mass = 0.0;
};

// Every factor's distribution must carry unit mass (within 1e-9).
std::vector<FactorCheck> factor_normalization_check(const ChainDecomposition& chain);

}  // namespace bl::bayes
