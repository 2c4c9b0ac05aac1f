#include "msteer/raster.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "msteer/errors.hpp"

namespace msteer {

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string(), "cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t big_endian_u32(const std::vector<unsigned char>& bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw ValidationError("idx", "truncated header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

unsigned char to_byte(double v) {
  if (v <= 0.0) return 0;
  if (v >= 1.0) return 255;
  return static_cast<unsigned char>(v * 255.0 + 0.5);
}

}  // namespace

Raster read_pgm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&] {
    skip_space();
    std::size_t v = 0;
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    if (pos == start) throw ValidationError(path.string(), "malformed PGM header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw ValidationError(path.string(), "not a binary PGM (P5)");
  pos = 2;
  Raster r;
  r.width = read_uint();
  r.height = read_uint();
  const std::size_t maxval = read_uint();
  if (maxval == 0 || maxval > 255) throw ValidationError(path.string(), "only 8-bit PGM supported");
  ++pos;  // single whitespace before the raster
  if (r.width == 0 || r.height == 0) throw ValidationError(path.string(), "empty raster");
  if (bytes.size() < pos + r.width * r.height) throw ValidationError(path.string(), "truncated raster");
  r.intensity.resize(r.width * r.height);
  for (std::size_t k = 0; k < r.intensity.size(); ++k)
    r.intensity[k] = static_cast<double>(bytes[pos + k]) / 255.0;
  return r;
}

void write_pgm(const std::filesystem::path& path, const Raster& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(path.string(), "cannot write file");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  for (double v : image.intensity) out.put(static_cast<char>(to_byte(v)));
}

std::vector<Raster> read_idx_images(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (big_endian_u32(bytes, 0) != 0x00000803u)
    throw ValidationError(path.string(), "bad idx3-ubyte magic number");
  const std::size_t count = big_endian_u32(bytes, 4);
  const std::size_t rows = big_endian_u32(bytes, 8);
  const std::size_t cols = big_endian_u32(bytes, 12);
  if (rows == 0 || cols == 0) throw ValidationError(path.string(), "empty raster");
  const std::size_t stride = rows * cols;
  if (bytes.size() < 16 + count * stride) throw ValidationError(path.string(), "truncated image data");
  std::vector<Raster> images(count);
  for (std::size_t n = 0; n < count; ++n) {
    Raster& r = images[n];
    r.width = cols;
    r.height = rows;
    r.intensity.resize(stride);
    for (std::size_t k = 0; k < stride; ++k)
      r.intensity[k] = static_cast<double>(bytes[16 + n * stride + k]) / 255.0;
  }
  return images;
}

void write_idx_images(const std::filesystem::path& path, const std::vector<Raster>& images) {
  if (images.empty()) throw ValidationError("images", "nothing to write");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(path.string(), "cannot write file");
  put_u32(out, 0x00000803u);
  put_u32(out, static_cast<std::uint32_t>(images.size()));
  put_u32(out, static_cast<std::uint32_t>(images.front().height));
  put_u32(out, static_cast<std::uint32_t>(images.front().width));
  for (const Raster& r : images) {
    if (r.width != images.front().width || r.height != images.front().height)
      throw ValidationError("images", "all rasters must share one size");
    for (double v : r.intensity) out.put(static_cast<char>(to_byte(v)));
  }
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (big_endian_u32(bytes, 0) != 0x00000801u)
    throw ValidationError(path.string(), "bad idx1-ubyte magic number");
  const std::size_t count = big_endian_u32(bytes, 4);
  if (bytes.size() < 8 + count) throw ValidationError(path.string(), "truncated label data");
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(path.string(), "cannot write file");
  put_u32(out, 0x00000801u);
  put_u32(out, static_cast<std::uint32_t>(labels.size()));
  for (auto l : labels) out.put(static_cast<char>(l));
}

EmpiricalMeasure image_to_measure(const Raster& image, double threshold) {
  if (image.width == 0 || image.height == 0 || image.intensity.size() != image.width * image.height)
    throw ValidationError("image", "raster is empty or inconsistent");
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw ValidationError("threshold", "must lie in [0, 1]");
  std::vector<Vec> points;
  std::vector<double> weights;
  double total = 0.0;
  const auto w = static_cast<double>(image.width);
  const auto h = static_cast<double>(image.height);
  for (std::size_t row = 0; row < image.height; ++row) {
    for (std::size_t col = 0; col < image.width; ++col) {
      const double v = image.at(row, col);
      if (!(v > threshold)) continue;
      points.push_back({(static_cast<double>(col) + 0.5) / w, 1.0 - (static_cast<double>(row) + 0.5) / h});
      weights.push_back(v);
      total += v;
    }
  }
  if (points.empty()) throw EmptyMeasure();
  for (double& x : weights) x /= total;
  return EmpiricalMeasure(std::move(points), std::move(weights));
}

}  // namespace msteer
