#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <unistd.h>

#include "boltzlens/synthgen.hpp"
#include "support/glyphs.hpp"

using namespace bl;
using namespace bl::synth;
namespace fs = std::filesystem;

namespace {

Mask square_mask(int side, int y0, int x0, int len) {
  Mask m(side, side);
  for (int y = 0; y < len; ++y)
    for (int x = 0; x < len; ++x) m.at(y0 + y, x0 + x) = 1;
  return m;
}

double normal_cdf(double x, double sigma) {
  return 0.5 * std::erfc(-x / (sigma * std::numbers::sqrt2));
}

// Kolmogorov-Smirnov statistic of `v` against N(0, sigma^2).
double ks_statistic(std::vector<double> v, double sigma) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = normal_cdf(v[i], sigma);
    d = std::max(d, std::max(f - static_cast<double>(i) / n,
                             static_cast<double>(i + 1) / n - f));
  }
  return d;
}

}  // namespace

TEST_CASE("binarize thresholds strictly above") {
  SourceImage img;
  img.h = 1;
  img.w = 4;
  img.pixels = {0, 127, 128, 255};
  const Mask m = binarize(img, 127.0);
  CHECK(m.v == std::vector<std::uint8_t>{0, 0, 1, 1});
  CHECK_THROWS_AS(binarize(img, 0.0), DimensionError);
  CHECK_THROWS_AS(binarize(img, 255.0), DimensionError);
}

TEST_CASE("center_crop_downsample pads 28x28 inputs centered") {
  Mask m(28, 28);
  m.at(0, 0) = 1;
  m.at(27, 27) = 1;
  const Mask out = center_crop_downsample(m);
  REQUIRE(out.h == 32);
  REQUIRE(out.w == 32);
  CHECK(out.count() == 2);
  CHECK(out.at(2, 2) == 1);
  CHECK(out.at(29, 29) == 1);
  CHECK_THROWS_AS(center_crop_downsample(Mask(20, 20)), DimensionError);
}

TEST_CASE("center_crop_downsample majority-pools 64x64 with ties to foreground") {
  Mask m(64, 64);
  // 2x2 block with exactly 2 foreground -> tie -> foreground
  m.at(0, 0) = 1;
  m.at(1, 1) = 1;
  // block with 1 foreground -> background
  m.at(0, 2) = 1;
  // block with 4 -> foreground
  for (int y = 2; y < 4; ++y)
    for (int x = 2; x < 4; ++x) m.at(y, x) = 1;
  const Mask out = center_crop_downsample(m);
  CHECK(out.at(0, 0) == 1);
  CHECK(out.at(0, 1) == 0);
  CHECK(out.at(1, 1) == 1);

  // 80x80: central 64x64 crop first
  Mask big(80, 80);
  for (int y = 8; y < 72; ++y)
    for (int x = 8; x < 72; ++x) big.at(y, x) = 1;
  CHECK(center_crop_downsample(big).count() == 1024);
}

TEST_CASE("extract_edge edge cases") {
  CHECK(extract_edge(Mask(32, 32)).count() == 0);
  Mask full(32, 32);
  for (auto& v : full.v) v = 1;
  // image border pixels count as boundary
  CHECK(extract_edge(full).count() == 4 * 32 - 4);
  Mask one(32, 32);
  one.at(5, 7) = 1;
  const Mask e = extract_edge(one);
  CHECK(e.count() == 1);
  CHECK(e.at(5, 7) == 1);
}

TEST_CASE("solid 4x4 square decomposes into 4/12/20/988") {
  const Mask mask = square_mask(32, 10, 10, 4);
  const Mask edge = extract_edge(mask);
  CHECK(edge.count() == 12);
  const MaskDecomposition d = decompose_mask(mask, edge);
  CHECK(d.inside.count() == 4);
  CHECK(d.inside_boundary.count() == 12);
  CHECK(d.outside_boundary.count() == 20);
  CHECK(d.outside.count() == 988);
  // partition: each pixel in exactly one region
  for (int i = 0; i < kPixels; ++i) {
    const int n = d.inside.v[i] + d.inside_boundary.v[i] + d.outside_boundary.v[i] +
                  d.outside.v[i];
    REQUIRE(n == 1);
  }
}

TEST_CASE("generated sample is a permutation of the seeded Gaussian draw") {
  const SourceImage src = fixtures::render_digit(3, 101);
  const SyntheticSample s = generate_sample(src, 555);
  REQUIRE(s.pixels.numel() == 1024);
  CHECK(s.label == 3);
  CHECK(s.seed == 555);

  CounterRng rng(555);
  std::vector<double> draw(kPixels);
  for (double& v : draw) v = rng.normal(0.0, kSigma);
  std::sort(draw.begin(), draw.end());
  std::vector<double> got(s.pixels.data.begin(), s.pixels.data.end());
  std::sort(got.begin(), got.end());
  CHECK(got == draw);  // exact, not approximate

  // determinism
  const SyntheticSample s2 = generate_sample(src, 555);
  CHECK(s2.pixels.data == s.pixels.data);
  CHECK(generate_sample(src, 556).pixels.data != s.pixels.data);
}

TEST_CASE("region ordering: outside values dominate outside-boundary values") {
  const SourceImage src = fixtures::render_digit(8, 7);
  const SyntheticSample s = generate_sample(src, 99);
  const Mask mask = center_crop_downsample(binarize(src, 127.0));
  const MaskDecomposition d = decompose_mask(mask, extract_edge(mask));

  auto region_minmax = [&](const Mask& m) {
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < kPixels; ++i)
      if (m.v[i]) {
        lo = std::min(lo, s.pixels[i]);
        hi = std::max(hi, s.pixels[i]);
      }
    return std::pair{lo, hi};
  };
  const auto [out_lo, out_hi] = region_minmax(d.outside);
  const auto [ob_lo, ob_hi] = region_minmax(d.outside_boundary);
  const auto [ib_lo, ib_hi] = region_minmax(d.inside_boundary);
  const auto [in_lo, in_hi] = region_minmax(d.inside);
  CHECK(out_lo >= ob_hi);
  CHECK(ob_lo >= ib_hi);
  CHECK(ib_lo >= in_hi);

  // flipped polarity reverses the ordering
  GenOptions flip;
  flip.flip_polarity = true;
  const SyntheticSample sf = generate_sample(src, 99, flip);
  double f_out_hi = -1e300, f_in_lo = 1e300;
  for (int i = 0; i < kPixels; ++i) {
    if (d.outside.v[i]) f_out_hi = std::max(f_out_hi, sf.pixels[i]);
    if (d.inside.v[i]) f_in_lo = std::min(f_in_lo, sf.pixels[i]);
  }
  CHECK(f_in_lo >= f_out_hi);
}

TEST_CASE("within-region shuffling permutes values but preserves region multisets") {
  const SourceImage src = fixtures::render_digit(0, 3);
  GenOptions shuf;
  shuf.shuffle_within_region = true;
  const SyntheticSample plain = generate_sample(src, 42);
  const SyntheticSample mixed = generate_sample(src, 42, shuf);
  CHECK(plain.pixels.data != mixed.pixels.data);

  const Mask mask = center_crop_downsample(binarize(src, 127.0));
  const MaskDecomposition d = decompose_mask(mask, extract_edge(mask));
  for (const Mask* m : {&d.outside, &d.outside_boundary, &d.inside_boundary, &d.inside}) {
    std::vector<double> a, b;
    for (int i = 0; i < kPixels; ++i)
      if (m->v[i]) {
        a.push_back(plain.pixels[i]);
        b.push_back(mixed.pixels[i]);
      }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}

TEST_CASE("sample pixels pass a KS test against N(0,1024) for most seeds") {
  const auto corpus = fixtures::glyph_corpus(2);
  const double critical = 1.6276 / std::sqrt(1024.0);  // alpha = 0.01
  int rejected = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const SyntheticSample s =
        generate_sample(corpus[t % corpus.size()], derive_seed(1234, t));
    if (ks_statistic(s.pixels.data, kSigma) > critical) ++rejected;
  }
  CHECK(rejected < trials * 3 / 100);
}

TEST_CASE("generate_dataset fills class counts deterministically") {
  const auto corpus = fixtures::glyph_corpus(3);
  const SyntheticDataset ds = generate_dataset(corpus, 5, 2, 77);
  CHECK(ds.train.size() == 50);
  CHECK(ds.test.size() == 20);
  for (int c = 0; c < 10; ++c) {
    CHECK(ds.class_counts_train.at(c) == 5);
    CHECK(ds.class_counts_test.at(c) == 2);
  }
  // seeds are unique across the dataset
  std::vector<std::uint64_t> seeds;
  for (const auto& s : ds.train) seeds.push_back(s.seed);
  for (const auto& s : ds.test) seeds.push_back(s.seed);
  std::sort(seeds.begin(), seeds.end());
  CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());

  const SyntheticDataset ds2 = generate_dataset(corpus, 5, 2, 77);
  CHECK(ds2.train[13].pixels.data == ds.train[13].pixels.data);

  std::vector<SourceImage> missing(corpus.begin(), corpus.begin() + 9);
  CHECK_THROWS_AS(generate_dataset(missing, 1, 1, 0), DimensionError);
}

TEST_CASE("randomize_labels draws roughly uniform labels, seed-stable") {
  auto corpus = fixtures::glyph_corpus(1);
  SyntheticDataset ds = generate_dataset(corpus, 50, 1, 5);
  auto a = ds.train;
  auto b = ds.train;
  randomize_labels(a, 31);
  randomize_labels(b, 31);
  int moved = 0;
  std::array<int, 10> counts{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == b[i].label);
    REQUIRE(a[i].label >= 0);
    REQUIRE(a[i].label <= 9);
    ++counts[static_cast<std::size_t>(a[i].label)];
    moved += a[i].label != ds.train[i].label;
  }
  // ~90% of 500 labels should change; binomial std ~6.7, allow 5 sigma
  CHECK(moved > 450 - 34);
  // each class expects 50 +- 5*sqrt(45)
  for (int c : counts) CHECK(std::abs(c - 50) < 34);
}

TEST_CASE("blds round-trip is exact and rejects malformed files") {
  const auto corpus = fixtures::glyph_corpus(1);
  const SyntheticDataset ds = generate_dataset(corpus, 1, 1, 9);
  const fs::path dir = fs::temp_directory_path() / ("blds-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string p = (dir / "t.blds").string();
  save_blds(ds.train, p);
  const auto back = load_blds(p);
  REQUIRE(back.size() == ds.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].label == ds.train[i].label);
    CHECK(back[i].seed == ds.train[i].seed);
    // pixels stored as f32
    for (int j = 0; j < kPixels; ++j)
      CHECK(back[i].pixels[j] ==
            static_cast<double>(static_cast<float>(ds.train[i].pixels[j])));
  }
  CHECK_THROWS_AS(load_blds((dir / "missing.blds").string()), IoError);
  std::ofstream(dir / "junk.blds", std::ios::binary) << "XXXXxxxx";
  CHECK_THROWS_AS(load_blds((dir / "junk.blds").string()), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("idx round-trip and error paths") {
  const auto corpus = fixtures::glyph_corpus(1);
  const fs::path dir = fs::temp_directory_path() / ("idx-" + std::to_string(::getpid()));
  const auto [imgs, labels] = fixtures::write_idx_corpus(corpus, dir.string());
  const auto back = load_idx(imgs, labels);
  REQUIRE(back.size() == corpus.size());
  CHECK(back[4].pixels == corpus[4].pixels);
  CHECK(back[4].label == corpus[4].label);
  CHECK(back[4].h == 28);
  CHECK(back[4].w == 28);

  CHECK_THROWS_AS(load_idx((dir / "nope").string(), labels), IoError);
  std::ofstream(dir / "bad", std::ios::binary) << "\x00\x00\x08\x01garbage";
  CHECK_THROWS_AS(load_idx((dir / "bad").string(), labels), FormatError);
  // image/label count mismatch: reuse labels file as its own images
  CHECK_THROWS_AS(load_idx(labels, labels), FormatError);
  fs::remove_all(dir);
}
