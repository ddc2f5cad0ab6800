#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "boltzlens/idx.hpp"
#include "boltzlens/rng.hpp"
#include "boltzlens/tensor.hpp"

namespace bl::synth {

inline constexpr int kSide = 32;
inline constexpr int kPixels = kSide * kSide;
inline constexpr double kSigma = 32.0;  // variance 1024

// Binary mask over an arbitrary grid (row-major).
struct Mask {
  int h = 0, w = 0;
  std::vector<std::uint8_t> v;

  Mask() = default;
  Mask(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0) {}

  std::uint8_t& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : v) n += b != 0;
    return n;
  }
};

// Partition of the 32x32 grid driving Gaussian pixel placement.
struct MaskDecomposition {
  Mask outside, outside_boundary, inside_boundary, inside;
};

struct SyntheticSample {
  Tensor<double> pixels;  // [32,32]
  int label = -1;
  std::uint64_t seed = 0;
  std::string source_id;
};

struct SyntheticDataset {
  std::vector<SyntheticSample> train;
  std::vector<SyntheticSample> test;
  std::uint64_t master_seed = 0;
  std::map<int, int> class_counts_train;
  std::map<int, int> class_counts_test;
};

struct GenOptions {
  double threshold = 127.0;
  bool shuffle_within_region = false;  // seeded within-region shuffling
  bool flip_polarity = false;          // reverse the region assignment order
};

// mask[p] = pixels[p] > threshold
Mask binarize(const SourceImage& img, double threshold);

// >= 64: central 64x64 crop then 2x2 majority downsample; 28..63: centered
// zero-pad (MNIST substitute). Smaller inputs are rejected.
Mask center_crop_downsample(const Mask& m);

// 4-connectivity morphological boundary: foreground pixels with at least one
// 4-neighbor background pixel.
Mask extract_edge(const Mask& m);

Mask erode_cross(const Mask& m);

// 8-connectivity dilation; the outside boundary is the full one-pixel ring
// around the silhouette, corners included.
Mask dilate_box(const Mask& m);

MaskDecomposition decompose_mask(const Mask& mask, const Mask& edge);

// Draws 1024 i.i.d. N(0, 1024) values from the seeded stream, sorts them
// descending, splits contiguously into (outside, outside-boundary,
// inside-boundary, inside) segments and writes each segment into its mask
// region in raster order.
SyntheticSample generate_sample(const SourceImage& src, std::uint64_t seed,
                                const GenOptions& opts = {});

SyntheticDataset generate_dataset(const std::vector<SourceImage>& sources,
                                  int per_class_train, int per_class_test,
                                  std::uint64_t master_seed,
                                  const GenOptions& opts = {});

// Replaces every label by a uniform draw over 0-9, fixed once.
void randomize_labels(std::vector<SyntheticSample>& samples, std::uint64_t seed);

// Dataset wire format: magic "BLDS", version u16, u32 count, then per sample
// u8 label, u64 seed, 1024 little-endian f32 pixels.
void save_blds(const std::vector<SyntheticSample>& samples, const std::string& path);
std::vector<SyntheticSample> load_blds(const std::string& path);

void write_manifest(const SyntheticDataset& ds, const std::vector<SourceImage>& sources,
                    const std::string& path);

}  // namespace bl::synth
