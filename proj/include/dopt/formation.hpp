#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "dopt/array2d.hpp"
#include "dopt/optics.hpp"

namespace dopt {

/// Three planar channels (R, G, B) of equal size, linear intensity.
struct ColorImage {
  std::array<RealArray, 3> channels;

  ColorImage() = default;
  ColorImage(std::size_t height, std::size_t width, double fill = 0.0)
      : channels{RealArray(height, width, fill), RealArray(height, width, fill),
                 RealArray(height, width, fill)} {}

  std::size_t height() const { return channels[0].rows(); }
  std::size_t width() const { return channels[0].cols(); }
};

using RGBImage = ColorImage;
using SensorImage = ColorImage;
using DepthMap = RealArray;

/// 8-bit interleaved RGB.
struct ByteImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> rgb;
};

struct DepthBins {
  std::vector<double> centers;         // meters, nearest first
  std::vector<double> inverse_edges;   // J + 1 values, decreasing, 1/m
};

/// J bins uniform in inverse depth over [d_min, d_max].
DepthBins depth_bins(double d_min, double d_max, std::size_t count);

/// Inverse-depth edges matching the config's depth list (from its range when
/// present, otherwise midpoints between neighbouring bin centers).
std::vector<double> inverse_edges_for(const OpticalConfig& config);

struct LayerMasks {
  std::vector<RealArray> layers;
  std::vector<double> inverse_edges;
};

/// One-hot layer assignment by inverse depth. Pixels on an edge go to the
/// lower-index bin; out-of-range pixels clamp to the end bins.
LayerMasks quantize_depth(const DepthMap& depth, const std::vector<double>& inverse_edges);

/// Gaussian blur (truncated at ceil(3 sigma), edge-replicate) of every layer,
/// then per-pixel renormalization to a partition of unity.
LayerMasks soften_masks(const LayerMasks& hard, double sigma);

struct RenderOptions {
  double mask_sigma = 1.5;  // pixels
};

/// I_c = sum_j (L_c * PSF_{j,c}) M_j with edge-replicate padding.
SensorImage render(const RGBImage& image, const LayerMasks& masks, const PSFStack& stack);

std::uint8_t srgb_encode(double linear);
double srgb_decode(std::uint8_t value);
ByteImage srgb_encode(const ColorImage& image);
ColorImage srgb_decode(const ByteImage& image);

/// Linear convolution of one image channel with P x P kernels centered at
/// (P/2, P/2), with edge-replicate padding. The padded image spectrum is
/// computed once and reused.
class PaddedConvolver {
public:
  PaddedConvolver(const RealArray& image, std::size_t kernel_size);

  /// out(y, x) = sum_{u,v} K(u, v) L(clamp(y - u + P/2), clamp(x - v + P/2))
  RealArray convolve(const RealArray& kernel) const;
  /// Transpose of convolve with respect to the kernel: P x P result of
  /// sum_{y,x} g(y, x) L(clamp(y - u + P/2), clamp(x - v + P/2)).
  RealArray correlate(const RealArray& g) const;

private:
  std::size_t h_, w_, p_;
  std::size_t nr_, nc_;
  ComplexArray padded_spectrum_;
};

}  // namespace dopt
