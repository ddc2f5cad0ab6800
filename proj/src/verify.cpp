#include "boltzlens/verify.hpp"

#include <cmath>
#include <sstream>

#include "boltzlens/bayesnet.hpp"
#include "boltzlens/rng.hpp"

namespace bl::verify {

NetworkSpec tiny_spec() {
  NetworkSpec s;
  s.input_shape = {12, 12, 1};
  s.layers = {LayerSpec::conv(3, 2), LayerSpec::relu(), LayerSpec::maxpool(),
              LayerSpec::conv(3, 2), LayerSpec::relu(), LayerSpec::maxpool(),
              LayerSpec::flatten(),  LayerSpec::fc(8),  LayerSpec::softmax()};
  return s;
}

namespace {

double loss_at(const Network<double>& net, const Tensor<double>& x, int label) {
  auto [probs, trace] = forward_with_trace(net, x);
  return cross_entropy_loss(probs, label);
}

double rel_error(double a, double b) {
  return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b));
}

// Walks every parameter tensor of the network.
template <class Fn>
void for_each_param(Network<double>& net, Fn&& fn) {
  for (auto& c : net.conv) {
    for (double& v : c.filters.data) fn(v);
    for (double& v : c.bias.data) fn(v);
  }
  for (auto& f : net.fc) {
    for (double& v : f.weights.data) fn(v);
    for (double& v : f.bias.data) fn(v);
  }
}

}  // namespace

double max_gradient_error(const Network<double>& net, const Tensor<double>& x,
                          int label, double h) {
  auto [probs, trace] = forward_with_trace(net, x);
  const Gradients<double> grads = backward(net, trace, label);

  // Flatten analytic grads in the same parameter order as for_each_param.
  std::vector<double> analytic;
  for (std::size_t i = 0; i < grads.conv.size(); ++i) {
    analytic.insert(analytic.end(), grads.conv[i].filters.data.begin(),
                    grads.conv[i].filters.data.end());
    analytic.insert(analytic.end(), grads.conv[i].bias.data.begin(),
                    grads.conv[i].bias.data.end());
  }
  for (std::size_t i = 0; i < grads.fc.size(); ++i) {
    analytic.insert(analytic.end(), grads.fc[i].weights.data.begin(),
                    grads.fc[i].weights.data.end());
    analytic.insert(analytic.end(), grads.fc[i].bias.data.begin(),
                    grads.fc[i].bias.data.end());
  }

  Network<double> probe = net;
  double worst = 0.0;
  std::size_t k = 0;
  for_each_param(probe, [&](double& v) {
    const double orig = v;
    v = orig + h;
    const double up = loss_at(probe, x, label);
    v = orig - h;
    const double down = loss_at(probe, x, label);
    v = orig;
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, rel_error(analytic[k], fd));
    ++k;
  });
  return worst;
}

CheckResult check_gradients(std::uint64_t seed) {
  CounterRng rng(seed);
  Network<double> net = init_params<double>(tiny_spec(), seed);
  Tensor<double> x({12, 12, 1});
  for (double& v : x.data) v = rng.normal(0.0, 1.0);
  const int label = static_cast<int>(rng.index(8));
  const double err = max_gradient_error(net, x, label);
  std::ostringstream os;
  os << "max relative error " << err << " (tolerance 1e-4)";
  return {"gradient-check", err < 1e-4, os.str()};
}

CheckResult check_im2col(std::uint64_t seed, int cases) {
  CounterRng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < cases; ++i) {
    const int h = 3 + static_cast<int>(rng.index(14));   // 3..16
    const int w = 3 + static_cast<int>(rng.index(14));
    const int c = 1 + static_cast<int>(rng.index(4));    // 1..4
    const int k = 1 + static_cast<int>(rng.index(3));  // 1..3, always fits
    const int outc = 1 + static_cast<int>(rng.index(3));
    Tensor<double> input({h, w, c});
    for (double& v : input.data) v = rng.normal();
    ConvLayerParams<double> p{Tensor<double>({k, k, c, outc}), Tensor<double>({outc})};
    for (double& v : p.filters.data) v = rng.normal();
    for (double& v : p.bias.data) v = rng.normal();
    const Tensor<double> a = conv2d_forward(input, p);
    const Tensor<double> b = conv2d_im2col(input, p);
    for (std::size_t j = 0; j < a.numel(); ++j)
      worst = std::max(worst, std::abs(a[j] - b[j]));
  }
  std::ostringstream os;
  os << cases << " cases, max abs diff " << worst << " (tolerance 1e-10)";
  return {"im2col-equivalence", worst < 1e-10, os.str()};
}

CheckResult check_posterior_identity(std::uint64_t seed, int inputs_per_preset) {
  const auto edges = lens::default_bin_edges();
  CounterRng rng(seed);
  bool ok = true;
  for (const std::string preset : {"cnn1", "cnn2", "cnn3"}) {
    Network<double> net = init_params<double>(NetworkSpec::preset(preset), seed + 1);
    for (int i = 0; i < inputs_per_preset && ok; ++i) {
      Tensor<double> x({32, 32, 1});
      for (double& v : x.data) v = rng.normal(0.0, 32.0);
      auto [probs, trace] = forward_with_trace(net, x);
      const Tensor<double> post =
          bayes::posterior_via_elimination(bayes::decompose(net, x, edges));
      for (std::size_t j = 0; j < probs.numel(); ++j)
        if (post[j] != probs[j]) ok = false;
    }
  }
  return {"posterior-identity", ok,
          ok ? "posterior equals forward softmax bitwise" : "bitwise mismatch"};
}

CheckResult check_partitions(std::uint64_t seed) {
  const auto edges = lens::default_bin_edges();
  CounterRng rng(seed);
  Network<double> net = init_params<double>(NetworkSpec::preset("cnn2"), seed);
  bool ok = true;
  for (int i = 0; i < 5; ++i) {
    Tensor<double> x({32, 32, 1});
    for (double& v : x.data) v = rng.normal(0.0, 32.0);
    for (const auto& c : bayes::factor_normalization_check(bayes::decompose(net, x, edges)))
      ok = ok && c.passed;
  }
  return {"partition-normalization", ok,
          ok ? "all factors carry unit mass" : "a factor lost mass"};
}

std::vector<CheckResult> run_all(std::uint64_t seed) {
  return {check_gradients(seed), check_im2col(seed + 1, 20),
          check_posterior_identity(seed + 2, 5), check_partitions(seed + 3)};
}

}  // namespace bl::verify
