#include "dopt/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dopt/error.hpp"
#include "dopt/parallel.hpp"

namespace dopt {
namespace {

constexpr std::size_t kC = PSFStack::kChannels;

double inner(const RealArray& a, const RealArray& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Reverse sweep of one slice: accumulates d loss / d sag(x) into sag_grad.
void reverse_slice(const PsfEngine& engine, std::size_t c, PsfTrace& t, const RealArray& upstream,
                   RealArray& sag_grad) {
  const OpticalConfig& cfg = engine.config();
  const std::size_t p = cfg.psf.size;
  const std::size_t b = cfg.psf.binning;

  // normalization quotient rule: PSF = B / S
  RealArray g_binned = upstream;
  if (cfg.psf.normalize) {
    double sum = 0.0;
    for (double v : t.binned) sum += v;
    const double dot = inner(upstream, t.psf);
    for (auto& v : g_binned) v = (v - dot) / sum;
  }

  // |V|^2 on the crop window; reuse the sensor buffer for the adjoint field
  ComplexArray& adj = t.sensor;
  const std::size_t origin = engine.crop_origin();
  const std::size_t n = cfg.grid.n;
  for (std::size_t r = 0; r < n; ++r) {
    const bool row_in = r >= origin && r < origin + p * b;
    for (std::size_t col = 0; col < n; ++col) {
      const bool in = row_in && col >= origin && col < origin + p * b;
      Complex& v = adj(r, col);
      v = in ? 2.0 * g_binned((r - origin) / b, (col - origin) / b) * v : Complex{};
    }
  }
  engine.propagator(c).apply_adjoint(adj);

  // U = G exp(i beta sag): dL/dsag = beta Im(adj conj(U))
  const double beta = engine.sag_phase_scale(c);
  const Complex* u = t.after_lens.data();
  const Complex* a = adj.data();
  for (std::size_t i = 0; i < sag_grad.size(); ++i) {
    if (u[i] == Complex{}) continue;
    sag_grad[i] += beta * (a[i] * std::conj(u[i])).imag();
  }
}

}  // namespace

StackTape taped_psf_stack(const OpticalConfig& config) { return {config, psf_stack(config)}; }

ParamGradient grad_stack(const StackTape& tape, const std::vector<RealArray>& upstream) {
  const OpticalConfig& cfg = tape.config;
  const std::size_t slices = cfg.depths.size() * kC;
  if (upstream.size() != slices) {
    throw ConfigError("expected " + std::to_string(slices) + " upstream slices, got " +
                      std::to_string(upstream.size()));
  }
  for (const auto& u : upstream) {
    if (u.rows() != cfg.psf.size || u.cols() != cfg.psf.size) {
      throw ConfigError("upstream slice size does not match PSF size");
    }
  }

  ParamGradient grad;
  grad.values.assign(element_param_count(cfg.element), 0.0);
  for (std::size_t i = 0; i < slices; ++i) grad.loss += inner(upstream[i], tape.stack.slices[i]);
  if (grad.values.empty() || cfg.all_in_focus) return grad;

  const PsfEngine engine(cfg, cfg.wavelengths);
  const std::size_t n = cfg.grid.n;
  RealArray sag_grad(n, n);

  // Chunks of `workers` slices run in parallel; their sag gradients are then
  // added in slice order so the result does not depend on the thread count.
  const std::size_t workers = std::max<std::size_t>(1, std::min(thread_count(), slices));
  std::vector<RealArray> partial(workers);
  for (std::size_t start = 0; start < slices; start += workers) {
    const std::size_t count = std::min(workers, slices - start);
    parallel_for(count, [&](std::size_t k) {
      const std::size_t i = start + k;
      const std::size_t j = i / kC;
      const std::size_t c = i % kC;
      PsfTrace t = engine.trace(cfg.depths[j], c);
      if (!(t.psf == tape.stack.slices[i])) {
        throw NumericalError("recomputed PSF differs from taped forward pass (depth bin " +
                             std::to_string(j) + ", channel " + std::to_string(c) + ")");
      }
      partial[k] = RealArray(n, n);
      reverse_slice(engine, c, t, upstream[i], partial[k]);
    });
    for (std::size_t k = 0; k < count; ++k) {
      for (std::size_t q = 0; q < sag_grad.size(); ++q) sag_grad[q] += partial[k][q];
    }
  }
  project_sag_gradient(cfg.element, cfg.grid, sag_grad, grad.values);
  for (double v : grad.values) {
    if (!std::isfinite(v)) throw NumericalError("non-finite parameter gradient");
  }
  return grad;
}

ParamGradient grad_stack(const OpticalConfig& config, const std::vector<RealArray>& upstream) {
  return grad_stack(taped_psf_stack(config), upstream);
}

ParamGradient grad_psf(const OpticalConfig& config, double z, double wavelength,
                       const RealArray& upstream) {
  const std::array<double, 1> wl{wavelength};
  const PsfEngine engine(config, wl);
  const OpticalConfig& cfg = engine.config();
  if (upstream.rows() != cfg.psf.size || upstream.cols() != cfg.psf.size) {
    throw ConfigError("upstream size does not match PSF size");
  }
  ParamGradient grad;
  grad.values.assign(element_param_count(cfg.element), 0.0);
  PsfTrace t = engine.trace(z, 0);
  grad.loss = inner(upstream, t.psf);
  if (grad.values.empty() || cfg.all_in_focus) return grad;
  RealArray sag_grad(cfg.grid.n, cfg.grid.n);
  reverse_slice(engine, 0, t, upstream, sag_grad);
  project_sag_gradient(cfg.element, cfg.grid, sag_grad, grad.values);
  return grad;
}

std::vector<RealArray> psf_upstream_from_render(const RGBImage& image, const LayerMasks& masks,
                                                std::size_t psf_size,
                                                const SensorImage& upstream) {
  const std::size_t layers = masks.layers.size();
  if (upstream.height() != image.height() || upstream.width() != image.width()) {
    throw ConfigError("upstream image size does not match the rendered image");
  }
  std::vector<RealArray> out(layers * kC);
  parallel_for(kC, [&](std::size_t c) {
    const PaddedConvolver conv(image.channels[c], psf_size);
    RealArray weighted(image.height(), image.width());
    for (std::size_t j = 0; j < layers; ++j) {
      const RealArray& m = masks.layers[j];
      for (std::size_t i = 0; i < weighted.size(); ++i) {
        weighted[i] = upstream.channels[c][i] * m[i];
      }
      out[j * kC + c] = conv.correlate(weighted);
    }
  });
  return out;
}

ParamGradient grad_render(const RGBImage& image, const LayerMasks& masks,
                          const OpticalConfig& config, const SensorImage& upstream) {
  const auto slice_up = psf_upstream_from_render(image, masks, config.psf.size, upstream);
  return grad_stack(config, slice_up);
}

FdReport finite_difference_check(const std::function<double(std::span<const double>)>& loss,
                                 std::span<const double> params,
                                 std::span<const double> analytic, double step,
                                 double floor_ratio) {
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive");
  if (analytic.size() != params.size()) {
    throw ConfigError("analytic gradient length does not match parameter count");
  }
  FdReport report;
  report.step = step;
  double scale = 0.0;
  for (double a : analytic) scale = std::max(scale, std::abs(a));
  const double floor = floor_ratio * scale;

  std::vector<double> x(params.begin(), params.end());
  for (std::size_t m = 0; m < x.size(); ++m) {
    const double x0 = x[m];
    x[m] = x0 + step;
    const double up = loss(x);
    x[m] = x0 - step;
    const double down = loss(x);
    x[m] = x0;
    FdEntry e;
    e.analytic = analytic[m];
    e.numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(e.analytic), std::abs(e.numeric), floor});
    e.rel_error = denom > 0.0 ? std::abs(e.analytic - e.numeric) / denom : 0.0;
    report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
    report.entries.push_back(e);
  }
  return report;
}

BoundSimulator::BoundSimulator(OpticalConfig config, RenderOptions options)
    : config_(std::move(config)), options_(options) {
  config_.validate();
}

void BoundSimulator::set_params(std::span<const double> params) {
  config_.element = with_element_params(config_.element, params);
  tape_.reset();
}

SensorImage BoundSimulator::forward(const RGBImage& image, const DepthMap& depth) {
  if (depth.rows() != image.height() || depth.cols() != image.width()) {
    throw ConfigError("depth map " + std::to_string(depth.rows()) + "x" +
                      std::to_string(depth.cols()) + " does not match image " +
                      std::to_string(image.height()) + "x" + std::to_string(image.width()));
  }
  Tape tape{image, soften_masks(quantize_depth(depth, inverse_edges_for(config_)),
                                options_.mask_sigma),
            taped_psf_stack(config_)};
  SensorImage out = render(tape.image, tape.masks, tape.stack.stack);
  tape_ = std::move(tape);
  return out;
}

ParamGradient BoundSimulator::backward(const SensorImage& upstream) const {
  if (!tape_) throw ConfigError("no taped forward pass");
  const auto slice_up =
      psf_upstream_from_render(tape_->image, tape_->masks, config_.psf.size, upstream);
  return grad_stack(tape_->stack, slice_up);
}

}  // namespace dopt
