#include "boltzlens/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>

#include "boltzlens/checkpoint.hpp"

namespace bl::synth {

Mask binarize(const SourceImage& img, double threshold) {
  if (!(threshold > 0.0 && threshold < 255.0))
    throw DimensionError("binarize: threshold must lie in (0,255)");
  Mask m(img.h, img.w);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    m.v[i] = img.pixels[i] > threshold ? 1 : 0;
  return m;
}

Mask center_crop_downsample(const Mask& m) {
  if (m.h < 28 || m.w < 28)
    throw DimensionError("center_crop_downsample: image smaller than 28x28");
  Mask out(kSide, kSide);
  if (m.h >= 64 && m.w >= 64) {
    const int y0 = (m.h - 64) / 2, x0 = (m.w - 64) / 2;
    for (int y = 0; y < kSide; ++y) {
      for (int x = 0; x < kSide; ++x) {
        int cnt = 0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            cnt += m.at(y0 + 2 * y + dy, x0 + 2 * x + dx) != 0;
        out.at(y, x) = cnt >= 2 ? 1 : 0;  // ties go to foreground
      }
    }
  } else {
    const int y0 = (kSide - m.h) / 2, x0 = (kSide - m.w) / 2;
    for (int y = 0; y < m.h; ++y)
      for (int x = 0; x < m.w; ++x) out.at(y0 + y, x0 + x) = m.at(y, x);
  }
  return out;
}

Mask erode_cross(const Mask& m) {
  Mask out(m.h, m.w);
  auto bg = [&](int y, int x) {
    return y < 0 || y >= m.h || x < 0 || x >= m.w || m.at(y, x) == 0;
  };
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x)
      out.at(y, x) = (m.at(y, x) && !bg(y - 1, x) && !bg(y + 1, x) && !bg(y, x - 1) &&
                      !bg(y, x + 1))
                         ? 1
                         : 0;
  return out;
}

Mask dilate_box(const Mask& m) {
  Mask out(m.h, m.w);
  auto fg = [&](int y, int x) {
    return y >= 0 && y < m.h && x >= 0 && x < m.w && m.at(y, x) != 0;
  };
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) {
      bool any = false;
      for (int dy = -1; dy <= 1 && !any; ++dy)
        for (int dx = -1; dx <= 1 && !any; ++dx) any = fg(y + dy, x + dx);
      out.at(y, x) = any ? 1 : 0;
    }
  return out;
}

Mask extract_edge(const Mask& m) {
  const Mask er = erode_cross(m);
  Mask out(m.h, m.w);
  for (std::size_t i = 0; i < m.v.size(); ++i) out.v[i] = m.v[i] && !er.v[i];
  return out;
}

MaskDecomposition decompose_mask(const Mask& mask, const Mask& edge) {
  MaskDecomposition d;
  d.inside_boundary = edge;
  d.inside = Mask(mask.h, mask.w);
  for (std::size_t i = 0; i < mask.v.size(); ++i)
    d.inside.v[i] = mask.v[i] && !edge.v[i];
  const Mask dil = dilate_box(mask);
  d.outside_boundary = Mask(mask.h, mask.w);
  for (std::size_t i = 0; i < mask.v.size(); ++i)
    d.outside_boundary.v[i] = dil.v[i] && !mask.v[i];
  d.outside = Mask(mask.h, mask.w);
  for (std::size_t i = 0; i < mask.v.size(); ++i)
    d.outside.v[i] =
        !(d.inside.v[i] || d.inside_boundary.v[i] || d.outside_boundary.v[i]);
  return d;
}

SyntheticSample generate_sample(const SourceImage& src, std::uint64_t seed,
                                const GenOptions& opts) {
  const Mask mask = center_crop_downsample(binarize(src, opts.threshold));
  const Mask edge = extract_edge(mask);
  const MaskDecomposition dec = decompose_mask(mask, edge);

  CounterRng rng(seed);
  std::vector<double> draw(kPixels);
  for (double& v : draw) v = rng.normal(0.0, kSigma);
  std::vector<double> sorted = draw;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());

  std::array<const Mask*, 4> order = {&dec.outside, &dec.outside_boundary,
                                      &dec.inside_boundary, &dec.inside};
  if (opts.flip_polarity) std::reverse(order.begin(), order.end());

  SyntheticSample s;
  s.pixels = Tensor<double>({kSide, kSide});
  s.label = src.label;
  s.seed = seed;
  s.source_id = src.id;

  std::size_t next = 0;
  for (const Mask* region : order) {
    std::vector<int> idx;
    for (int i = 0; i < kPixels; ++i)
      if (region->v[i]) idx.push_back(i);
    if (opts.shuffle_within_region) shuffle(idx, rng);
    for (int i : idx) s.pixels[i] = sorted[next++];
  }
  return s;
}

SyntheticDataset generate_dataset(const std::vector<SourceImage>& sources,
                                  int per_class_train, int per_class_test,
                                  std::uint64_t master_seed, const GenOptions& opts) {
  std::map<int, std::vector<const SourceImage*>> by_class;
  for (const SourceImage& s : sources) by_class[s.label].push_back(&s);
  for (int c = 0; c < 10; ++c)
    if (by_class[c].empty())
      throw DimensionError("generate_dataset: no source images for class " +
                           std::to_string(c));

  SyntheticDataset ds;
  ds.master_seed = master_seed;
  std::uint64_t counter = 0;
  auto emit = [&](int c, int n, std::vector<SyntheticSample>& out) {
    const auto& pool = by_class[c];
    for (int i = 0; i < n; ++i) {
      const SourceImage* src = pool[static_cast<std::size_t>(i) % pool.size()];
      out.push_back(generate_sample(*src, derive_seed(master_seed, counter++), opts));
    }
  };
  for (int c = 0; c < 10; ++c) {
    emit(c, per_class_train, ds.train);
    ds.class_counts_train[c] = per_class_train;
  }
  for (int c = 0; c < 10; ++c) {
    emit(c, per_class_test, ds.test);
    ds.class_counts_test[c] = per_class_test;
  }
  return ds;
}

void randomize_labels(std::vector<SyntheticSample>& samples, std::uint64_t seed) {
  CounterRng rng(seed);
  for (SyntheticSample& s : samples) s.label = static_cast<int>(rng.index(10));
}

inline constexpr std::uint16_t kBldsVersion = 1;

void save_blds(const std::vector<SyntheticSample>& samples, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open dataset for writing: " + path);
  os.write("BLDS", 4);
  detail::write_u16(os, kBldsVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(samples.size()));
  for (const SyntheticSample& s : samples) {
    os.put(static_cast<char>(s.label));
    detail::write_u64(os, s.seed);
    for (int i = 0; i < kPixels; ++i) {
      const float f = static_cast<float>(s.pixels[i]);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      detail::write_u32(os, bits);
    }
  }
  if (!os) throw IoError("error writing dataset: " + path);
}

std::vector<SyntheticSample> load_blds(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "BLDS")
    throw FormatError("dataset: bad magic, expected \"BLDS\"");
  const std::uint16_t version = detail::read_u16(is);
  if (version != kBldsVersion)
    throw FormatError("dataset: unsupported version " + std::to_string(version));
  const std::uint32_t count = detail::read_u32(is);
  std::vector<SyntheticSample> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    SyntheticSample s;
    const int label = is.get();
    if (label < 0) throw FormatError("dataset: truncated at sample " + std::to_string(i));
    s.label = label;
    s.seed = detail::read_u64(is);
    s.pixels = Tensor<double>({kSide, kSide});
    for (int p = 0; p < kPixels; ++p) {
      const std::uint32_t bits = detail::read_u32(is);
      float f;
      std::memcpy(&f, &bits, 4);
      s.pixels[p] = static_cast<double>(f);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_manifest(const SyntheticDataset& ds, const std::vector<SourceImage>& sources,
                    const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open manifest for writing: " + path);
  os << "master_seed = " << ds.master_seed << "\n";
  os << "train_total = " << ds.train.size() << "\n";
  os << "test_total = " << ds.test.size() << "\n";
  for (const auto& [c, n] : ds.class_counts_train)
    os << "train_class_" << c << " = " << n << "\n";
  for (const auto& [c, n] : ds.class_counts_test)
    os << "test_class_" << c << " = " << n << "\n";
  // FNV-1a over source pixel bytes, per class
  std::map<int, std::uint64_t> sums;
  for (const SourceImage& s : sources) {
    std::uint64_t h = sums.count(s.label) ? sums[s.label] : 0xcbf29ce484222325ULL;
    for (std::uint8_t b : s.pixels) h = (h ^ b) * 0x100000001b3ULL;
    sums[s.label] = h;
  }
  for (const auto& [c, h] : sums)
    os << "source_checksum_" << c << " = " << std::hex << h << std::dec << "\n";
}

}  // namespace bl::synth
