#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "dopt/array2d.hpp"
#include "dopt/zernike.hpp"

namespace dopt {

/// Square sampling grid. Sample i sits at x = (i - n/2) * pitch, so the
/// optical axis is index n/2 in both directions.
struct GridSpec {
  std::size_t n = 2048;
  double pitch = 3.5e-6;  // meters

  double extent() const { return static_cast<double>(n) * pitch; }
  double coord(std::size_t i) const {
    return (static_cast<double>(i) - static_cast<double>(n / 2)) * pitch;
  }
  /// Spatial frequency (cycles/m) of FFT-ordered index k.
  double fft_frequency(std::size_t k) const {
    const auto half = static_cast<std::ptrdiff_t>(n / 2);
    auto kk = static_cast<std::ptrdiff_t>(k);
    if (kk >= half) kk -= static_cast<std::ptrdiff_t>(n);
    return static_cast<double>(kk) / extent();
  }
  void validate() const;
};

struct DispersionModel {
  enum class Mode { kAchromatic, kCauchy };
  Mode mode = Mode::kAchromatic;
  double n_design = 1.52;
  double cauchy_b = 4.2e-15;         // m^2
  double design_wavelength = 530e-9;  // m

  /// n(lambda); constant n_design in achromatic mode.
  double index(double wavelength) const;
  void validate(std::span<const double> wavelengths) const;
};

struct LensPrescription {
  double focal_length = 0.05;         // at the design wavelength
  double aperture_diameter = 6.25e-3;
  DispersionModel dispersion;

  double f_number() const { return focal_length / aperture_diameter; }
  /// f(lambda) = f0 (n_design - 1) / (n(lambda) - 1); f0 in achromatic mode.
  double focal_length_at(double wavelength) const;
};

/// Zernike sag (meters per mode, Noll order 1..36) over a disk of norm_radius.
struct FreeformSurface {
  std::array<double, zernike::kModeCount> coeffs{};
  double norm_radius = 3.125e-3;
  DispersionModel material;
};

/// Piecewise-constant sag: heights[m] applies for ring_radii[m-1] < r <= ring_radii[m].
struct AnnularSurface {
  std::array<double, 3> heights{};
  std::array<double, 3> ring_radii{};
  DispersionModel material;

  /// Equal-area rings over radius R: R/sqrt(3), R sqrt(2/3), R.
  static AnnularSurface equal_area(double radius, DispersionModel material);
};

using Element = std::variant<std::monostate, FreeformSurface, AnnularSurface>;

/// Optimizable parameters of an element (36 Zernike coefficients, 3 ring
/// heights, or none). Units are meters of sag.
std::vector<double> element_params(const Element& element);
std::size_t element_param_count(const Element& element);
Element with_element_params(const Element& element, std::span<const double> params);

struct PsfOptions {
  std::size_t size = 64;     // P, output samples per side
  std::size_t binning = 2;   // grid samples summed per sensor pixel (per axis)
  bool normalize = true;     // unit sum per slice
  double min_retained = 0.95;
};

struct DepthRange {
  double near = 0.7;
  double far = 7.0;
  std::size_t count = 12;
};

struct OpticalConfig {
  LensPrescription lens;
  Element element;
  double focus_distance = 1.0;
  std::optional<double> sensor_distance_override;
  GridSpec grid;
  std::array<double, 3> wavelengths{610e-9, 530e-9, 470e-9};
  std::vector<double> depths;
  std::optional<DepthRange> depth_range;  // provenance of depths, if binned
  PsfOptions psf;
  bool all_in_focus = false;  // every PSF is a discrete delta

  double sensor_distance() const;
  /// Sensor sample spacing of the output PSFs and rendered images.
  double sensor_pitch() const { return grid.pitch * static_cast<double>(psf.binning); }
  void validate() const;
};

/// Thin-lens equation solved for the sensor distance. d may be +infinity.
double sensor_distance_for_focus(double focal_length, double focus_distance);

struct WavefrontField {
  GridSpec grid;
  double wavelength = 530e-9;
  ComplexArray values;
};

/// Point source at distance z on axis: exp(i k sqrt(x^2 + y^2 + z^2)).
WavefrontField spherical_wave(const GridSpec& grid, double z, double wavelength);

/// Thin-lens phase in radians (paraxial, constant thickness offset dropped).
RealArray lens_phase(const GridSpec& grid, const LensPrescription& lens, double wavelength);

/// Binary circular aperture; throws ConfigError if D exceeds the grid extent.
RealArray aperture(const GridSpec& grid, double diameter);

/// Sag profile of the element in meters (zero for no element).
RealArray surface_sag(const Element& element, const GridSpec& grid);

/// out[m] = sum_x weights(x) * d sag(x) / d param_m, the transpose of the
/// parameter-to-sag map. weights is an n x n grid map.
void project_sag_gradient(const Element& element, const GridSpec& grid, const RealArray& weights,
                          std::span<double> out);

/// k (n_ff(lambda) - 1) * sag, radians.
RealArray surface_phase(const Element& element, const GridSpec& grid, double wavelength);

/// Angular-spectrum transfer function for one wavelength and distance.
class Propagator {
public:
  Propagator(const GridSpec& grid, double wavelength, double distance);

  /// Field in centered layout, propagated in place.
  void apply(ComplexArray& field) const;
  /// Adjoint map (conjugate transfer function), in place.
  void apply_adjoint(ComplexArray& field) const;

  const ComplexArray& transfer() const { return transfer_; }

private:
  void run(ComplexArray& field, bool adjoint) const;

  ComplexArray transfer_;  // FFT layout
};

WavefrontField propagate(const WavefrontField& field, double distance);

/// Intensity PSFs indexed by (depth j, channel c).
struct PSFStack {
  std::vector<double> depths;
  std::array<double, 3> wavelengths{};
  double pitch = 0.0;
  std::vector<RealArray> slices;  // index j * 3 + c

  static constexpr std::size_t kChannels = 3;
  std::size_t depth_count() const { return depths.size(); }
  RealArray& at(std::size_t j, std::size_t c) { return slices[j * kChannels + c]; }
  const RealArray& at(std::size_t j, std::size_t c) const { return slices[j * kChannels + c]; }
};

/// Forward record of one PSF evaluation, kept for the reverse sweep.
struct PsfTrace {
  ComplexArray after_lens;  // A t_lens t_ff U_in
  ComplexArray sensor;      // propagated field
  RealArray binned;         // cropped and binned intensity, before normalization
  RealArray psf;            // final output
  double retained = 1.0;    // crop energy fraction
};

/// Precomputed per-config state shared by forward and gradient passes.
class PsfEngine {
public:
  PsfEngine(const OpticalConfig& config, std::span<const double> wavelengths);

  const OpticalConfig& config() const { return config_; }
  std::size_t channel_count() const { return channels_.size(); }
  double wavelength(std::size_t c) const { return channels_[c].wavelength; }
  /// k (n_ff - 1) for channel c: phase per meter of sag.
  double sag_phase_scale(std::size_t c) const { return channels_[c].sag_scale; }
  const RealArray& sag() const { return sag_; }

  PsfTrace trace(double z, std::size_t c) const;
  RealArray psf(double z, std::size_t c) const { return trace(z, c).psf; }

  const Propagator& propagator(std::size_t c) const { return channels_[c].propagator; }
  std::size_t crop_origin() const;
  std::size_t crop_width() const { return config_.psf.size * config_.psf.binning; }

private:
  struct Channel {
    double wavelength;
    double sag_scale;
    RealArray static_phase;  // lens phase + surface phase
    Propagator propagator;
  };

  OpticalConfig config_;
  RealArray aperture_;
  RealArray sag_;
  std::vector<Channel> channels_;
};

RealArray delta_psf(std::size_t size);

RealArray psf(const OpticalConfig& config, double z, double wavelength);
PSFStack psf_stack(const OpticalConfig& config);

}  // namespace dopt
