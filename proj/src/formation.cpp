#include "dopt/formation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dopt/error.hpp"
#include "dopt/fft.hpp"
#include "dopt/parallel.hpp"

namespace dopt {
namespace {

std::size_t next_pow2(std::size_t v) {
  std::size_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

std::string shape(std::size_t h, std::size_t w) {
  return std::to_string(h) + "x" + std::to_string(w);
}

std::vector<double> gaussian_kernel(double sigma) {
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
    const double v = std::exp(-0.5 * static_cast<double>(t * t) / (sigma * sigma));
    k[t + radius] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

RealArray blur_separable(const RealArray& in, const std::vector<double>& k) {
  const auto radius = static_cast<std::ptrdiff_t>(k.size() / 2);
  const auto h = static_cast<std::ptrdiff_t>(in.rows());
  const auto w = static_cast<std::ptrdiff_t>(in.cols());
  RealArray tmp(in.rows(), in.cols());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
        acc += k[t + radius] * in(y, std::clamp<std::ptrdiff_t>(x + t, 0, w - 1));
      }
      tmp(y, x) = acc;
    }
  }
  RealArray out(in.rows(), in.cols());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
        acc += k[t + radius] * tmp(std::clamp<std::ptrdiff_t>(y + t, 0, h - 1), x);
      }
      out(y, x) = acc;
    }
  }
  return out;
}

}  // namespace

DepthBins depth_bins(double d_min, double d_max, std::size_t count) {
  if (!(d_min > 0.0) || !(d_max > d_min) || !std::isfinite(d_max)) {
    throw ConfigError("depth range requires 0 < d_min < d_max");
  }
  if (count < 2) throw ConfigError("at least two depth bins are required");
  const double near = 1.0 / d_min;
  const double far = 1.0 / d_max;
  const auto j_max = static_cast<double>(count);
  DepthBins bins;
  bins.inverse_edges.resize(count + 1);
  for (std::size_t j = 0; j <= count; ++j) {
    const auto jj = static_cast<double>(j);
    bins.inverse_edges[j] = (near * (j_max - jj) + far * jj) / j_max;
  }
  bins.centers.resize(count);
  for (std::size_t j = 0; j < count; ++j) {
    bins.centers[j] = 2.0 / (bins.inverse_edges[j] + bins.inverse_edges[j + 1]);
  }
  return bins;
}

std::vector<double> inverse_edges_for(const OpticalConfig& config) {
  if (config.depth_range && config.depth_range->count == config.depths.size()) {
    return depth_bins(config.depth_range->near, config.depth_range->far, config.depth_range->count)
        .inverse_edges;
  }
  const auto& d = config.depths;
  if (d.empty()) throw ConfigError("no depth bins configured");
  for (std::size_t j = 1; j < d.size(); ++j) {
    if (!(d[j] > d[j - 1])) {
      throw ConfigError("rendering requires depth bins ordered nearest first");
    }
  }
  std::vector<double> edges(d.size() + 1);
  if (d.size() == 1) {
    edges = {2.0 / d[0], 0.0};
    return edges;
  }
  for (std::size_t j = 1; j < d.size(); ++j) edges[j] = 0.5 * (1.0 / d[j - 1] + 1.0 / d[j]);
  edges[0] = 2.0 / d[0] - edges[1];
  edges[d.size()] = std::max(0.0, 2.0 / d.back() - edges[d.size() - 1]);
  return edges;
}

LayerMasks quantize_depth(const DepthMap& depth, const std::vector<double>& inverse_edges) {
  if (inverse_edges.size() < 2) throw ConfigError("need at least two bin edges");
  for (std::size_t j = 1; j < inverse_edges.size(); ++j) {
    if (!(inverse_edges[j] < inverse_edges[j - 1])) {
      throw ConfigError("inverse-depth edges must be strictly decreasing");
    }
  }
  const std::size_t count = inverse_edges.size() - 1;
  LayerMasks masks;
  masks.inverse_edges = inverse_edges;
  masks.layers.assign(count, RealArray(depth.rows(), depth.cols()));
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double d = depth[i];
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw ConfigError("depth map values must be positive and finite");
    }
    const double w = 1.0 / d;
    std::size_t bin = count - 1;
    for (std::size_t j = 0; j < count; ++j) {
      if (w >= inverse_edges[j + 1]) {
        bin = j;
        break;
      }
    }
    masks.layers[bin][i] = 1.0;
  }
  return masks;
}

LayerMasks soften_masks(const LayerMasks& hard, double sigma) {
  if (!(sigma >= 0.0)) throw ConfigError("mask softening sigma must be non-negative");
  if (sigma == 0.0 || hard.layers.empty()) return hard;
  const auto kernel = gaussian_kernel(sigma);
  LayerMasks out;
  out.inverse_edges = hard.inverse_edges;
  out.layers.resize(hard.layers.size());
  parallel_for(hard.layers.size(),
               [&](std::size_t j) { out.layers[j] = blur_separable(hard.layers[j], kernel); });
  const std::size_t n = out.layers[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (const auto& layer : out.layers) sum += layer[i];
    if (sum <= 0.0) continue;
    for (auto& layer : out.layers) layer[i] /= sum;
  }
  return out;
}

PaddedConvolver::PaddedConvolver(const RealArray& image, std::size_t kernel_size)
    : h_(image.rows()), w_(image.cols()), p_(kernel_size) {
  if (h_ == 0 || w_ == 0) throw ConfigError("empty image");
  nr_ = next_pow2(h_ + 2 * p_);
  nc_ = next_pow2(w_ + 2 * p_);
  padded_spectrum_ = ComplexArray(nr_, nc_);
  // padded(Y, X) = L(clamp(Y - P/2), clamp(X - P/2)), Y in [0, H + P)
  const auto half = static_cast<std::ptrdiff_t>(p_ / 2);
  for (std::size_t y = 0; y < h_ + p_; ++y) {
    const auto sy = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(y) - half, 0,
                                               static_cast<std::ptrdiff_t>(h_) - 1);
    for (std::size_t x = 0; x < w_ + p_; ++x) {
      const auto sx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(x) - half, 0,
                                                 static_cast<std::ptrdiff_t>(w_) - 1);
      padded_spectrum_(y, x) = image(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
    }
  }
  fft::forward(padded_spectrum_);
}

RealArray PaddedConvolver::convolve(const RealArray& kernel) const {
  if (kernel.rows() != p_ || kernel.cols() != p_) throw ConfigError("kernel size mismatch");
  ComplexArray buf(nr_, nc_);
  for (std::size_t u = 0; u < p_; ++u) {
    for (std::size_t v = 0; v < p_; ++v) buf(u, v) = kernel(u, v);
  }
  fft::forward(buf);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] *= padded_spectrum_[i];
  fft::inverse(buf);
  RealArray out(h_, w_);
  for (std::size_t y = 0; y < h_; ++y) {
    for (std::size_t x = 0; x < w_; ++x) out(y, x) = buf(y + p_, x + p_).real();
  }
  return out;
}

RealArray PaddedConvolver::correlate(const RealArray& g) const {
  if (g.rows() != h_ || g.cols() != w_) throw ConfigError("gradient size mismatch");
  ComplexArray buf(nr_, nc_);
  for (std::size_t y = 0; y < h_; ++y) {
    for (std::size_t x = 0; x < w_; ++x) buf(y, x) = g(y, x);
  }
  fft::forward(buf);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = std::conj(buf[i]) * padded_spectrum_[i];
  fft::inverse(buf);
  // corr(m) = sum_y g(y) padded(y + m); kernel tap u pairs with m = P - u
  RealArray out(p_, p_);
  for (std::size_t u = 0; u < p_; ++u) {
    for (std::size_t v = 0; v < p_; ++v) out(u, v) = buf(p_ - u, p_ - v).real();
  }
  return out;
}

SensorImage render(const RGBImage& image, const LayerMasks& masks, const PSFStack& stack) {
  const std::size_t h = image.height();
  const std::size_t w = image.width();
  if (masks.layers.size() != stack.depth_count()) {
    throw ConfigError("mask layer count " + std::to_string(masks.layers.size()) +
                      " does not match PSF depth count " + std::to_string(stack.depth_count()));
  }
  for (const auto& ch : image.channels) {
    if (ch.rows() != h || ch.cols() != w) throw ConfigError("image channels differ in size");
  }
  for (const auto& layer : masks.layers) {
    if (layer.rows() != h || layer.cols() != w) {
      throw ConfigError("mask size " + shape(layer.rows(), layer.cols()) +
                        " does not match image size " + shape(h, w));
    }
  }
  if (stack.slices.empty()) throw ConfigError("empty PSF stack");
  const std::size_t p = stack.slices.front().rows();
  SensorImage out(h, w);
  parallel_for(3, [&](std::size_t c) {
    const PaddedConvolver conv(image.channels[c], p);
    RealArray& acc = out.channels[c];
    for (std::size_t j = 0; j < stack.depth_count(); ++j) {
      const RealArray blurred = conv.convolve(stack.at(j, c));
      const RealArray& m = masks.layers[j];
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += blurred[i] * m[i];
    }
  });
  return out;
}

std::uint8_t srgb_encode(double linear) {
  const double x = std::clamp(linear, 0.0, 1.0);
  const double v = x <= 0.0031308 ? 12.92 * x : 1.055 * std::pow(x, 1.0 / 2.4) - 0.055;
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

double srgb_decode(std::uint8_t value) {
  const double v = value / 255.0;
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

ByteImage srgb_encode(const ColorImage& image) {
  ByteImage out{image.height(), image.width(), {}};
  out.rgb.resize(out.height * out.width * 3);
  for (std::size_t i = 0; i < out.height * out.width; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out.rgb[3 * i + c] = srgb_encode(image.channels[c][i]);
  }
  return out;
}

ColorImage srgb_decode(const ByteImage& image) {
  ColorImage out(image.height, image.width);
  for (std::size_t i = 0; i < image.height * image.width; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out.channels[c][i] = srgb_decode(image.rgb[3 * i + c]);
  }
  return out;
}

}  // namespace dopt
