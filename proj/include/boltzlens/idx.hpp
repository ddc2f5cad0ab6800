#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boltzlens/checkpoint.hpp"  // IoError / FormatError

namespace bl {

// Grayscale source digit, pixel values in [0,255].
struct SourceImage {
  std::vector<std::uint8_t> pixels;  // row-major [h x w]
  int h = 0;
  int w = 0;
  int label = -1;
  std::string id;

  std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * w + x]; }
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// Loads an IDX image/label file pair (MNIST wire format, big-endian dims).
std::vector<SourceImage> load_idx(const std::string& images_path,
                                  const std::string& labels_path);

// IDX writers, mainly for fixtures and round-trip tests.
void save_idx_images(const std::vector<SourceImage>& images, const std::string& path);
void save_idx_labels(const std::vector<SourceImage>& images, const std::string& path);

}  // namespace bl
