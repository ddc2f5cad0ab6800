#pragma once

#include <string>
#include <vector>

#include "boltzlens/network.hpp"

namespace bl::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// A spec with every layer type, small enough to finite-difference in
// milliseconds: 12x12x1 -> conv3x3x2 -> pool -> conv3x3x2 -> pool(floor)
// -> fc 8 -> softmax.
NetworkSpec tiny_spec();

// Central finite differences (step h) against backprop, all parameters.
// Returns the worst relative error.
double max_gradient_error(const Network<double>& net, const Tensor<double>& x,
                          int label, double h = 1e-5);

CheckResult check_gradients(std::uint64_t seed);
CheckResult check_im2col(std::uint64_t seed, int cases);
CheckResult check_posterior_identity(std::uint64_t seed, int inputs_per_preset);
CheckResult check_partitions(std::uint64_t seed);

// The fast invariant suite run by `verify`.
std::vector<CheckResult> run_all(std::uint64_t seed = 7);

}  // namespace bl::verify
