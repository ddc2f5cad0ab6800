#include "boltzlens/idx.hpp"

#include <fstream>
#include <sstream>

namespace bl {

namespace {

std::uint32_t read_be32(std::istream& is, const char* what) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError(std::string("idx: truncated file while reading ") + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
               static_cast<char>(v >> 8), static_cast<char>(v)};
  os.write(b, 4);
}

std::string hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

}  // namespace

std::vector<SourceImage> load_idx(const std::string& images_path,
                                  const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError("cannot open idx image file: " + images_path);
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw IoError("cannot open idx label file: " + labels_path);

  const std::uint32_t img_magic = read_be32(imgs, "image magic");
  if (img_magic != kIdxImageMagic)
    throw FormatError("idx: bad image magic " + hex(img_magic) + ", expected " +
                      hex(kIdxImageMagic));
  const std::uint32_t count = read_be32(imgs, "image count");
  const std::uint32_t h = read_be32(imgs, "rows");
  const std::uint32_t w = read_be32(imgs, "cols");

  const std::uint32_t lab_magic = read_be32(labs, "label magic");
  if (lab_magic != kIdxLabelMagic)
    throw FormatError("idx: bad label magic " + hex(lab_magic) + ", expected " +
                      hex(kIdxLabelMagic));
  const std::uint32_t lab_count = read_be32(labs, "label count");
  if (lab_count != count)
    throw FormatError("idx: count mismatch, " + std::to_string(count) + " images vs " +
                      std::to_string(lab_count) + " labels");

  std::vector<SourceImage> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    SourceImage img;
    img.h = static_cast<int>(h);
    img.w = static_cast<int>(w);
    img.pixels.resize(static_cast<std::size_t>(h) * w);
    imgs.read(reinterpret_cast<char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!imgs) throw FormatError("idx: truncated image payload at image " +
                                 std::to_string(i));
    const int lab = labs.get();
    if (lab < 0) throw FormatError("idx: truncated label payload at image " +
                                   std::to_string(i));
    img.label = lab;
    img.id = images_path + "#" + std::to_string(i);
    out.push_back(std::move(img));
  }
  return out;
}

void save_idx_images(const std::vector<SourceImage>& images, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  const int h = images.empty() ? 0 : images.front().h;
  const int w = images.empty() ? 0 : images.front().w;
  write_be32(os, kIdxImageMagic);
  write_be32(os, static_cast<std::uint32_t>(images.size()));
  write_be32(os, static_cast<std::uint32_t>(h));
  write_be32(os, static_cast<std::uint32_t>(w));
  for (const SourceImage& img : images)
    os.write(reinterpret_cast<const char*>(img.pixels.data()),
             static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw IoError("error writing: " + path);
}

void save_idx_labels(const std::vector<SourceImage>& images, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_be32(os, kIdxLabelMagic);
  write_be32(os, static_cast<std::uint32_t>(images.size()));
  for (const SourceImage& img : images) os.put(static_cast<char>(img.label));
  if (!os) throw IoError("error writing: " + path);
}

}  // namespace bl
