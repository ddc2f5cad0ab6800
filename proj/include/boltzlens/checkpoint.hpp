#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "boltzlens/network.hpp"

namespace bl {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void write_u16(std::ostream& os, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(os, bits);
}

inline std::uint16_t read_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  if (!is) throw FormatError("checkpoint: truncated file");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw FormatError("file: truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline double read_f64(std::istream& is) {
  std::uint64_t bits = read_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

inline constexpr std::uint16_t kCheckpointVersion = 1;

// Checkpoint layout: magic "BLNZ", version u16, input shape (3 x u32),
// layer count u32, per layer {kind u8, kernel u32, outC u32, out u32},
// then parameter tensors as little-endian f64 in layer order
// (conv: filters then bias; fc: weights then bias).
template <class T>
void save_checkpoint(const Network<T>& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write("BLNZ", 4);
  detail::write_u16(os, kCheckpointVersion);
  for (int d : net.spec.input_shape) detail::write_u32(os, static_cast<std::uint32_t>(d));
  detail::write_u32(os, static_cast<std::uint32_t>(net.spec.layers.size()));
  for (const LayerSpec& l : net.spec.layers) {
    os.put(static_cast<char>(l.kind));
    detail::write_u32(os, static_cast<std::uint32_t>(l.kernel));
    detail::write_u32(os, static_cast<std::uint32_t>(l.out_channels));
    detail::write_u32(os, static_cast<std::uint32_t>(l.out));
  }
  std::size_t ci = 0, fi = 0;
  for (const LayerSpec& l : net.spec.layers) {
    if (l.kind == LayerKind::Conv) {
      const auto& p = net.conv[ci++];
      for (const T v : p.filters.data) detail::write_f64(os, static_cast<double>(v));
      for (const T v : p.bias.data) detail::write_f64(os, static_cast<double>(v));
    } else if (l.kind == LayerKind::Fc) {
      const auto& p = net.fc[fi++];
      for (const T v : p.weights.data) detail::write_f64(os, static_cast<double>(v));
      for (const T v : p.bias.data) detail::write_f64(os, static_cast<double>(v));
    }
  }
  if (!os) throw IoError("error writing checkpoint: " + path);
}

inline Network<double> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "BLNZ")
    throw FormatError("checkpoint: bad magic, expected \"BLNZ\"");
  const std::uint16_t version = detail::read_u16(is);
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  NetworkSpec spec;
  spec.input_shape.resize(3);
  for (int& d : spec.input_shape) d = static_cast<int>(detail::read_u32(is));
  const std::uint32_t n_layers = detail::read_u32(is);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec l{};
    const int kind = is.get();
    if (kind < 0) throw FormatError("checkpoint: truncated layer table");
    l.kind = static_cast<LayerKind>(kind);
    l.kernel = static_cast<int>(detail::read_u32(is));
    l.out_channels = static_cast<int>(detail::read_u32(is));
    l.out = static_cast<int>(detail::read_u32(is));
    spec.layers.push_back(l);
  }
  Network<double> net = init_params<double>(spec, 0);
  std::size_t ci = 0, fi = 0;
  for (const LayerSpec& l : spec.layers) {
    if (l.kind == LayerKind::Conv) {
      auto& p = net.conv[ci++];
      for (double& v : p.filters.data) v = detail::read_f64(is);
      for (double& v : p.bias.data) v = detail::read_f64(is);
    } else if (l.kind == LayerKind::Fc) {
      auto& p = net.fc[fi++];
      for (double& v : p.weights.data) v = detail::read_f64(is);
      for (double& v : p.bias.data) v = detail::read_f64(is);
    }
  }
  return net;
}

}  // namespace bl
