#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "msteer/measures.hpp"

namespace msteer {

/// Grayscale image, intensities in [0, 1], row 0 at the top.
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> intensity;  // row-major

  double at(std::size_t row, std::size_t col) const { return intensity[row * width + col]; }
};

/// Binary PGM (P5) with maxval <= 255.
Raster read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Raster& image);

/// MNIST idx3-ubyte image stack (magic 0x00000803, big-endian dimensions).
std::vector<Raster> read_idx_images(const std::filesystem::path& path);
void write_idx_images(const std::filesystem::path& path, const std::vector<Raster>& images);
/// MNIST idx1-ubyte label vector (magic 0x00000801).
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

/// One atom per pixel brighter than `threshold`, at the pixel center mapped into the unit
/// square (top row maps to b = 1), with weight proportional to intensity.
EmpiricalMeasure image_to_measure(const Raster& image, double threshold);

}  // namespace msteer
