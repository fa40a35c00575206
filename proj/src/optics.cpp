#include "dopt/optics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "dopt/error.hpp"
#include "dopt/fft.hpp"
#include "dopt/parallel.hpp"

namespace dopt {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Phase of the spherical wave, k sqrt(r^2 + z^2), split so the r-dependent
// part keeps full relative precision.
double spherical_phase(double r2, double z, double k) {
  return k * z + k * r2 / (std::sqrt(r2 + z * z) + z);
}

double sag_scale(const Element& element, double wavelength) {
  const double k = kTwoPi / wavelength;
  if (const auto* ff = std::get_if<FreeformSurface>(&element)) {
    return k * (ff->material.index(wavelength) - 1.0);
  }
  if (const auto* an = std::get_if<AnnularSurface>(&element)) {
    return k * (an->material.index(wavelength) - 1.0);
  }
  return 0.0;
}

int annular_ring(const AnnularSurface& s, double r) {
  for (int m = 0; m < 3; ++m) {
    if (r <= s.ring_radii[m]) return m;
  }
  return -1;
}

}  // namespace

void GridSpec::validate() const {
  if (n < 64 || n % 2 != 0) {
    throw ConfigError("grid size must be even and at least 64, got " + std::to_string(n));
  }
  if (!(pitch > 0.0) || !std::isfinite(pitch)) {
    throw ConfigError("grid pitch must be positive, got " + fmt_double(pitch));
  }
}

double DispersionModel::index(double wavelength) const {
  if (mode == Mode::kAchromatic) return n_design;
  return n_design +
         cauchy_b * (1.0 / (wavelength * wavelength) -
                     1.0 / (design_wavelength * design_wavelength));
}

void DispersionModel::validate(std::span<const double> wavelengths) const {
  if (!(design_wavelength > 0.0)) throw ConfigError("design wavelength must be positive");
  for (double wl : wavelengths) {
    if (!(index(wl) > 1.0)) {
      throw ConfigError("refractive index must exceed 1 at wavelength " + fmt_double(wl) + " m");
    }
  }
}

double LensPrescription::focal_length_at(double wavelength) const {
  if (dispersion.mode == DispersionModel::Mode::kAchromatic) return focal_length;
  return focal_length * (dispersion.n_design - 1.0) / (dispersion.index(wavelength) - 1.0);
}

AnnularSurface AnnularSurface::equal_area(double radius, DispersionModel material) {
  AnnularSurface s;
  s.ring_radii = {radius / std::sqrt(3.0), radius * std::sqrt(2.0 / 3.0), radius};
  s.material = material;
  return s;
}

std::vector<double> element_params(const Element& element) {
  if (const auto* ff = std::get_if<FreeformSurface>(&element)) {
    return {ff->coeffs.begin(), ff->coeffs.end()};
  }
  if (const auto* an = std::get_if<AnnularSurface>(&element)) {
    return {an->heights.begin(), an->heights.end()};
  }
  return {};
}

std::size_t element_param_count(const Element& element) { return element_params(element).size(); }

Element with_element_params(const Element& element, std::span<const double> params) {
  if (params.size() != element_param_count(element)) {
    throw ConfigError("expected " + std::to_string(element_param_count(element)) +
                      " element parameters, got " + std::to_string(params.size()));
  }
  Element out = element;
  if (auto* ff = std::get_if<FreeformSurface>(&out)) {
    std::copy(params.begin(), params.end(), ff->coeffs.begin());
  } else if (auto* an = std::get_if<AnnularSurface>(&out)) {
    std::copy(params.begin(), params.end(), an->heights.begin());
  }
  return out;
}

double OpticalConfig::sensor_distance() const {
  if (sensor_distance_override) return *sensor_distance_override;
  return sensor_distance_for_focus(lens.focal_length, focus_distance);
}

void OpticalConfig::validate() const {
  grid.validate();
  if (!(lens.focal_length > 0.0)) throw ConfigError("focal length must be positive");
  if (!(lens.aperture_diameter > 0.0)) throw ConfigError("aperture diameter must be positive");
  if (!(lens.aperture_diameter < grid.extent())) {
    throw ConfigError("aperture exceeds simulation grid: aperture diameter " +
                      fmt_double(lens.aperture_diameter) + " m, grid extent " +
                      fmt_double(grid.extent()) + " m");
  }
  if (!(focus_distance > lens.focal_length)) {
    throw ConfigError("focus distance must exceed focal length");
  }
  if (sensor_distance_override && !(*sensor_distance_override > 0.0)) {
    throw ConfigError("sensor distance must be positive");
  }
  for (double wl : wavelengths) {
    if (!(wl > 0.0) || !std::isfinite(wl)) throw ConfigError("wavelengths must be positive");
  }
  lens.dispersion.validate(wavelengths);
  if (depths.empty()) throw ConfigError("at least one depth bin is required");
  for (std::size_t j = 0; j < depths.size(); ++j) {
    if (!(depths[j] > 0.0) || !std::isfinite(depths[j])) {
      throw ConfigError("depth bins must be positive and finite");
    }
  }
  if (depths.size() > 1) {
    const bool up = depths[1] > depths[0];
    for (std::size_t j = 1; j < depths.size(); ++j) {
      if ((depths[j] > depths[j - 1]) != up || depths[j] == depths[j - 1]) {
        throw ConfigError("depth bins must be strictly monotone");
      }
    }
  }
  if (psf.size < 2 || psf.size % 2 != 0) throw ConfigError("PSF size must be even and >= 2");
  if (psf.binning < 1) throw ConfigError("PSF binning must be >= 1");
  if (psf.size * psf.binning > grid.n) {
    throw ConfigError("PSF window (" + std::to_string(psf.size * psf.binning) +
                      " samples) exceeds grid size " + std::to_string(grid.n));
  }
  if (const auto* ff = std::get_if<FreeformSurface>(&element)) {
    if (!(ff->norm_radius > 0.0)) throw ConfigError("freeform norm radius must be positive");
    ff->material.validate(wavelengths);
  } else if (const auto* an = std::get_if<AnnularSurface>(&element)) {
    const auto& r = an->ring_radii;
    if (!(r[0] > 0.0 && r[0] < r[1] && r[1] < r[2])) {
      throw ConfigError("annular ring radii must be positive and strictly increasing");
    }
    an->material.validate(wavelengths);
  }
}

double sensor_distance_for_focus(double focal_length, double focus_distance) {
  if (!(focal_length > 0.0)) throw ConfigError("focal length must be positive");
  if (!(focus_distance > focal_length)) {
    throw ConfigError("focus distance must exceed focal length");
  }
  if (std::isinf(focus_distance)) return focal_length;
  return 1.0 / (1.0 / focal_length - 1.0 / focus_distance);
}

WavefrontField spherical_wave(const GridSpec& grid, double z, double wavelength) {
  if (!(z > 0.0)) throw ConfigError("source distance must be positive");
  const double k = kTwoPi / wavelength;
  WavefrontField f{grid, wavelength, ComplexArray(grid.n, grid.n)};
  for (std::size_t r = 0; r < grid.n; ++r) {
    const double y = grid.coord(r);
    for (std::size_t c = 0; c < grid.n; ++c) {
      const double x = grid.coord(c);
      f.values(r, c) = std::polar(1.0, spherical_phase(x * x + y * y, z, k));
    }
  }
  return f;
}

RealArray lens_phase(const GridSpec& grid, const LensPrescription& lens, double wavelength) {
  const double k = kTwoPi / wavelength;
  double ratio = 1.0;
  if (lens.dispersion.mode == DispersionModel::Mode::kCauchy) {
    ratio = (lens.dispersion.index(wavelength) - 1.0) / (lens.dispersion.n_design - 1.0);
  }
  const double scale = -k * ratio / (2.0 * lens.focal_length);
  RealArray phase(grid.n, grid.n);
  for (std::size_t r = 0; r < grid.n; ++r) {
    const double y = grid.coord(r);
    for (std::size_t c = 0; c < grid.n; ++c) {
      const double x = grid.coord(c);
      phase(r, c) = scale * (x * x + y * y);
    }
  }
  return phase;
}

RealArray aperture(const GridSpec& grid, double diameter) {
  if (diameter > grid.extent()) {
    throw ConfigError("aperture exceeds simulation grid: aperture diameter " +
                      fmt_double(diameter) + " m, grid extent " + fmt_double(grid.extent()) +
                      " m");
  }
  const double r2max = 0.25 * diameter * diameter;
  RealArray a(grid.n, grid.n);
  for (std::size_t r = 0; r < grid.n; ++r) {
    const double y = grid.coord(r);
    for (std::size_t c = 0; c < grid.n; ++c) {
      const double x = grid.coord(c);
      a(r, c) = (x * x + y * y <= r2max) ? 1.0 : 0.0;
    }
  }
  return a;
}

RealArray surface_sag(const Element& element, const GridSpec& grid) {
  RealArray sag(grid.n, grid.n);
  if (const auto* ff = std::get_if<FreeformSurface>(&element)) {
    const double inv = 1.0 / ff->norm_radius;
    std::array<double, zernike::kModeCount> z{};
    for (std::size_t r = 0; r < grid.n; ++r) {
      const double v = grid.coord(r) * inv;
      for (std::size_t c = 0; c < grid.n; ++c) {
        const double u = grid.coord(c) * inv;
        if (u * u + v * v > 1.0) continue;
        zernike::evaluate_all(u, v, z);
        double s = 0.0;
        for (int m = 0; m < zernike::kModeCount; ++m) s += ff->coeffs[m] * z[m];
        sag(r, c) = s;
      }
    }
  } else if (const auto* an = std::get_if<AnnularSurface>(&element)) {
    for (std::size_t r = 0; r < grid.n; ++r) {
      const double y = grid.coord(r);
      for (std::size_t c = 0; c < grid.n; ++c) {
        const double x = grid.coord(c);
        const int ring = annular_ring(*an, std::sqrt(x * x + y * y));
        if (ring >= 0) sag(r, c) = an->heights[ring];
      }
    }
  }
  return sag;
}

void project_sag_gradient(const Element& element, const GridSpec& grid, const RealArray& weights,
                          std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (const auto* ff = std::get_if<FreeformSurface>(&element)) {
    const double inv = 1.0 / ff->norm_radius;
    std::array<double, zernike::kModeCount> z{};
    for (std::size_t r = 0; r < grid.n; ++r) {
      const double v = grid.coord(r) * inv;
      for (std::size_t c = 0; c < grid.n; ++c) {
        const double w = weights(r, c);
        if (w == 0.0) continue;
        const double u = grid.coord(c) * inv;
        if (u * u + v * v > 1.0) continue;
        zernike::evaluate_all(u, v, z);
        for (int m = 0; m < zernike::kModeCount; ++m) out[m] += w * z[m];
      }
    }
  } else if (const auto* an = std::get_if<AnnularSurface>(&element)) {
    for (std::size_t r = 0; r < grid.n; ++r) {
      const double y = grid.coord(r);
      for (std::size_t c = 0; c < grid.n; ++c) {
        const double w = weights(r, c);
        if (w == 0.0) continue;
        const double x = grid.coord(c);
        const int ring = annular_ring(*an, std::sqrt(x * x + y * y));
        if (ring >= 0) out[ring] += w;
      }
    }
  }
}

RealArray surface_phase(const Element& element, const GridSpec& grid, double wavelength) {
  RealArray phase = surface_sag(element, grid);
  const double scale = sag_scale(element, wavelength);
  for (auto& v : phase) v *= scale;
  return phase;
}

Propagator::Propagator(const GridSpec& grid, double wavelength, double distance)
    : transfer_(grid.n, grid.n) {
  const double k = kTwoPi / wavelength;
  for (std::size_t r = 0; r < grid.n; ++r) {
    const double ly = wavelength * grid.fft_frequency(r);
    for (std::size_t c = 0; c < grid.n; ++c) {
      const double lx = wavelength * grid.fft_frequency(c);
      const double arg = 1.0 - lx * lx - ly * ly;
      // evanescent components are dropped
      transfer_(r, c) = arg > 0.0 ? std::polar(1.0, k * distance * std::sqrt(arg)) : Complex{};
    }
  }
}

void Propagator::run(ComplexArray& field, bool adjoint) const {
  fft::fftshift(field);
  fft::forward(field);
  const Complex* h = transfer_.data();
  Complex* u = field.data();
  if (adjoint) {
    for (std::size_t i = 0; i < field.size(); ++i) u[i] *= std::conj(h[i]);
  } else {
    for (std::size_t i = 0; i < field.size(); ++i) u[i] *= h[i];
  }
  fft::inverse(field);
  fft::fftshift(field);
}

void Propagator::apply(ComplexArray& field) const { run(field, false); }
void Propagator::apply_adjoint(ComplexArray& field) const { run(field, true); }

WavefrontField propagate(const WavefrontField& field, double distance) {
  if (!(distance >= 0.0)) throw ConfigError("propagation distance must be non-negative");
  WavefrontField out = field;
  Propagator(field.grid, field.wavelength, distance).apply(out.values);
  return out;
}

RealArray delta_psf(std::size_t size) {
  RealArray d(size, size);
  d(size / 2, size / 2) = 1.0;
  return d;
}

PsfEngine::PsfEngine(const OpticalConfig& config, std::span<const double> wavelengths)
    : config_(config) {
  config_.validate();
  if (config_.all_in_focus) return;
  aperture_ = aperture(config_.grid, config_.lens.aperture_diameter);
  sag_ = surface_sag(config_.element, config_.grid);
  const double s = config_.sensor_distance();
  for (double wl : wavelengths) {
    RealArray phase = lens_phase(config_.grid, config_.lens, wl);
    const double scale = sag_scale(config_.element, wl);
    if (scale != 0.0) {
      for (std::size_t i = 0; i < phase.size(); ++i) phase[i] += scale * sag_[i];
    }
    channels_.push_back(Channel{wl, scale, std::move(phase), Propagator(config_.grid, wl, s)});
  }
}

std::size_t PsfEngine::crop_origin() const { return config_.grid.n / 2 - crop_width() / 2; }

PsfTrace PsfEngine::trace(double z, std::size_t c) const {
  if (!(z > 0.0)) throw ConfigError("source distance must be positive");
  const std::size_t p = config_.psf.size;
  PsfTrace t;
  if (config_.all_in_focus) {
    t.binned = delta_psf(p);
    t.psf = t.binned;
    return t;
  }
  const GridSpec& g = config_.grid;
  const Channel& ch = channels_.at(c);
  const double k = kTwoPi / ch.wavelength;

  t.after_lens = ComplexArray(g.n, g.n);
  for (std::size_t r = 0; r < g.n; ++r) {
    const double y = g.coord(r);
    for (std::size_t col = 0; col < g.n; ++col) {
      const std::size_t i = r * g.n + col;
      if (aperture_[i] == 0.0) continue;
      const double x = g.coord(col);
      // A * t_lens * t_ff * U_in
      t.after_lens[i] = aperture_[i] * std::polar(1.0, ch.static_phase[i]) *
                        std::polar(1.0, spherical_phase(x * x + y * y, z, k));
    }
  }
  t.sensor = t.after_lens;
  ch.propagator.apply(t.sensor);

  const std::size_t b = config_.psf.binning;
  const std::size_t origin = crop_origin();
  double total = 0.0;
  for (const auto& v : t.sensor) total += std::norm(v);
  t.binned = RealArray(p, p);
  double kept = 0.0;
  for (std::size_t r = 0; r < p * b; ++r) {
    for (std::size_t col = 0; col < p * b; ++col) {
      const double v = std::norm(t.sensor(origin + r, origin + col));
      t.binned(r / b, col / b) += v;
      kept += v;
    }
  }
  t.retained = total > 0.0 ? kept / total : 0.0;
  if (!std::isfinite(total) || !std::isfinite(kept)) {
    throw NumericalError("non-finite sensor intensity");
  }
  if (t.retained < config_.psf.min_retained) {
    std::ostringstream os;
    os << "PSF crop too small: window retains " << t.retained
       << " of the on-grid energy (minimum " << config_.psf.min_retained << ")";
    throw ConfigError(os.str());
  }
  t.psf = t.binned;
  if (config_.psf.normalize) {
    double sum = 0.0;
    for (double v : t.binned) sum += v;
    for (auto& v : t.psf) v /= sum;
  }
  return t;
}

RealArray psf(const OpticalConfig& config, double z, double wavelength) {
  const std::array<double, 1> wl{wavelength};
  return PsfEngine(config, wl).psf(z, 0);
}

PSFStack psf_stack(const OpticalConfig& config) {
  const PsfEngine engine(config, config.wavelengths);
  PSFStack stack;
  stack.depths = config.depths;
  stack.wavelengths = config.wavelengths;
  stack.pitch = config.sensor_pitch();
  stack.slices.resize(config.depths.size() * PSFStack::kChannels);
  parallel_for(stack.slices.size(), [&](std::size_t i) {
    const std::size_t j = i / PSFStack::kChannels;
    const std::size_t c = i % PSFStack::kChannels;
    try {
      stack.slices[i] = engine.psf(config.depths[j], c);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (depth bin " + std::to_string(j) +
                        ", channel " + std::to_string(c) + ")");
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (depth bin " + std::to_string(j) +
                           ", channel " + std::to_string(c) + ")");
    }
  });
  return stack;
}

}  // namespace dopt
