#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dopt/array2d.hpp"
#include "dopt/formation.hpp"

namespace dopt::io {

/// PFM image: 1 (Pf) or 3 (PF) channels, 32-bit little-endian floats.
struct PfmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<float> data;  // top row first, interleaved
};

void write_pfm(const std::filesystem::path& path, const PfmImage& image);
PfmImage read_pfm(const std::filesystem::path& path);

void write_pfm(const std::filesystem::path& path, const RealArray& gray);
void write_pfm(const std::filesystem::path& path, const ColorImage& color);
RealArray read_pfm_gray(const std::filesystem::path& path);
ColorImage read_pfm_color(const std::filesystem::path& path);

/// Decoded PNG samples: 8- or 16-bit, 1..4 channels, interleaved.
struct PngImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

PngImage read_png(const std::filesystem::path& path);
void write_png_rgb8(const std::filesystem::path& path, const ByteImage& image);
void write_png_gray16(const std::filesystem::path& path, std::size_t width, std::size_t height,
                      const std::vector<std::uint16_t>& samples);

/// 8-bit RGB view of a PNG (gray expanded, alpha dropped).
ByteImage read_png_rgb8(const std::filesystem::path& path);

}  // namespace dopt::io
