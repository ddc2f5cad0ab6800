#include <doctest.h>

#include <cmath>

#include "boltzlens/network.hpp"
#include "boltzlens/verify.hpp"

using namespace bl;

TEST_CASE("preset shape chains match the architecture table") {
  for (auto [name, c1] : {std::pair{"cnn1", 4}, {"cnn2", 12}, {"cnn3", 20}}) {
    const auto spec = NetworkSpec::preset(name);
    const auto chain = spec.shape_chain();
    REQUIRE(chain.size() == 10);
    CHECK(chain[0] == std::vector<int>{30, 30, c1});  // conv3
    CHECK(chain[2] == std::vector<int>{15, 15, c1});  // pool
    CHECK(chain[3] == std::vector<int>{11, 11, 20});  // conv5
    CHECK(chain[5] == std::vector<int>{5, 5, 20});    // pool, floor on 11
    CHECK(chain[6] == std::vector<int>{500});         // flatten
    CHECK(chain[7] == std::vector<int>{20});          // fc
    CHECK(chain[8] == std::vector<int>{10});          // fc
    CHECK(chain[9] == std::vector<int>{10});          // softmax
    CHECK(spec.num_classes() == 10);
  }
  CHECK_THROWS_AS(NetworkSpec::preset("cnn9"), DimensionError);
}

TEST_CASE("inconsistent chains are rejected") {
  NetworkSpec s;
  s.input_shape = {4, 4, 1};
  s.layers = {LayerSpec::conv(5, 2)};
  CHECK_THROWS_AS(s.shape_chain(), DimensionError);
}

TEST_CASE("init is deterministic, Glorot-bounded, with zero biases") {
  const auto spec = NetworkSpec::preset("cnn2");
  const auto a = init_params<double>(spec, 42);
  const auto b = init_params<double>(spec, 42);
  const auto c = init_params<double>(spec, 43);
  CHECK(a.conv[0].filters.data == b.conv[0].filters.data);
  CHECK(a.conv[0].filters.data != c.conv[0].filters.data);

  // First conv: fan_in 9, fan_out 108 -> limit sqrt(6/117)
  const double limit = std::sqrt(6.0 / (9.0 + 9.0 * 12.0));
  double sum = 0.0;
  for (double w : a.conv[0].filters.data) {
    CHECK(std::abs(w) <= limit);
    sum += w;
  }
  const double n = static_cast<double>(a.conv[0].filters.numel());
  // mean of uniform(-limit, limit) has std limit/sqrt(3n)
  CHECK(std::abs(sum / n) < 3.0 * limit / std::sqrt(3.0 * n));
  for (double v : a.conv[0].bias.data) CHECK(v == 0.0);
  for (double v : a.fc[0].bias.data) CHECK(v == 0.0);
}

TEST_CASE("forward trace folds activations into their layers") {
  const auto net = init_params<double>(NetworkSpec::preset("cnn2"), 1);
  Tensor<double> x({32, 32, 1});
  CounterRng rng(2);
  for (double& v : x.data) v = rng.normal(0.0, 32.0);
  const auto [probs, trace] = forward_with_trace(net, x);

  REQUIRE(trace.entries.size() == 6);  // conv, pool, conv, pool, fc, fc
  CHECK(trace.entries[0].kind == LayerKind::Conv);
  CHECK(trace.entries[0].relu_applied);
  CHECK(trace.entries[1].kind == LayerKind::MaxPool);
  CHECK(trace.entries[4].kind == LayerKind::Fc);
  CHECK(!trace.entries[4].relu_applied);  // linear fc
  CHECK(trace.entries[5].softmax_applied);

  // probs are a distribution and equal softmax of the last pre-activation
  double mass = 0.0;
  for (double p : probs.data) {
    CHECK(p >= 0.0);
    mass += p;
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  const auto direct = softmax(trace.entries[5].pre);
  for (int i = 0; i < 10; ++i) CHECK(probs[i] == direct[i]);

  // relu actually gated the conv pre-activations
  bool gated = false;
  for (std::size_t i = 0; i < trace.entries[0].pre.numel(); ++i) {
    CHECK(trace.entries[0].act[i] >= 0.0);
    if (trace.entries[0].pre[i] < 0.0) gated = true;
  }
  CHECK(gated);

  CHECK_THROWS_AS(forward_with_trace(net, Tensor<double>({31, 32, 1})), DimensionError);
}

TEST_CASE("backprop matches central finite differences on the tiny net") {
  const auto net = init_params<double>(verify::tiny_spec(), 9);
  Tensor<double> x({12, 12, 1});
  CounterRng rng(10);
  for (double& v : x.data) v = rng.normal(0.0, 1.0);
  CHECK(verify::max_gradient_error(net, x, 3) < 1e-4);
}

TEST_CASE("backward rejects stale traces and bad labels") {
  const auto spec = verify::tiny_spec();
  const auto net = init_params<double>(spec, 1);
  Tensor<double> x({12, 12, 1}, 0.5);
  auto [probs, trace] = forward_with_trace(net, x);
  CHECK_THROWS_AS(backward(net, trace, 8), DimensionError);
  CHECK_THROWS_AS(backward(net, trace, -1), DimensionError);
  auto other = init_params<double>(NetworkSpec::preset("cnn1"), 1);
  CHECK_THROWS_AS(backward(other, trace, 0), DimensionError);
}

TEST_CASE("sgd on a quadratic contracts by (1-2lr) per step") {
  // Minimize f(w) = w^2 through sgd_step: gradient 2w, so after 10 steps with
  // lr = 0.4 the weight is w0 * 0.2^10.
  NetworkSpec spec;
  spec.input_shape = {1, 1, 1};
  spec.layers = {LayerSpec::flatten(), LayerSpec::fc(1), LayerSpec::softmax()};
  auto net = init_params<double>(spec, 0);
  net.fc[0].weights[0] = 1.0;
  for (int step = 0; step < 10; ++step) {
    auto g = zero_gradients(net);
    g.fc[0].weights[0] = 2.0 * net.fc[0].weights[0];
    sgd_step(net, g, 0.4);
  }
  CHECK(net.fc[0].weights[0] == doctest::Approx(std::pow(0.2, 10)).epsilon(1e-12));
  auto g = zero_gradients(net);
  CHECK_THROWS_AS(sgd_step(net, g, 0.0), DimensionError);
}

TEST_CASE("gradient accumulation and scaling") {
  const auto net = init_params<double>(verify::tiny_spec(), 2);
  auto a = zero_gradients(net);
  auto b = zero_gradients(net);
  a.conv[0].filters[0] = 1.0;
  b.conv[0].filters[0] = 2.0;
  accumulate(a, b);
  CHECK(a.conv[0].filters[0] == 3.0);
  scale(a, 0.5);
  CHECK(a.conv[0].filters[0] == 1.5);
}

TEST_CASE("network_cast round-trips f64 -> f32 -> f64 within float precision") {
  const auto net = init_params<double>(verify::tiny_spec(), 5);
  const auto f32 = network_cast<float>(net);
  const auto back = network_cast<double>(f32);
  for (std::size_t i = 0; i < net.conv[0].filters.numel(); ++i)
    CHECK(back.conv[0].filters[i] ==
          doctest::Approx(net.conv[0].filters[i]).epsilon(1e-6));
}
