#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dopt/formation.hpp"
#include "dopt/optics.hpp"

namespace dopt {

/// dL/dparams for the element's optimizable parameters (meters of sag), and
/// the loss at the evaluation point.
struct ParamGradient {
  std::vector<double> values;
  double loss = 0.0;
};

/// Forward PSF stack together with the config that produced it. The reverse
/// sweep recomputes the fields and checks them against the stored PSFs.
struct StackTape {
  OpticalConfig config;
  PSFStack stack;
};

StackTape taped_psf_stack(const OpticalConfig& config);

/// Gradient of sum_{j,c} <upstream[j,c], PSF_{j,c}>. upstream is indexed
/// j * 3 + c. Throws NumericalError if a recomputed PSF differs from the tape.
ParamGradient grad_stack(const StackTape& tape, const std::vector<RealArray>& upstream);
ParamGradient grad_stack(const OpticalConfig& config, const std::vector<RealArray>& upstream);

/// Gradient of <upstream, psf(config, z, wavelength)>.
ParamGradient grad_psf(const OpticalConfig& config, double z, double wavelength,
                       const RealArray& upstream);

/// dL/dPSF_{j,c} for L = <upstream, render(image, masks, stack)>.
std::vector<RealArray> psf_upstream_from_render(const RGBImage& image, const LayerMasks& masks,
                                                std::size_t psf_size,
                                                const SensorImage& upstream);

/// Gradient of <upstream, render(image, masks, psf_stack(config))>.
ParamGradient grad_render(const RGBImage& image, const LayerMasks& masks,
                          const OpticalConfig& config, const SensorImage& upstream);

struct FdEntry {
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct FdReport {
  std::vector<FdEntry> entries;
  double max_rel_error = 0.0;
  double step = 0.0;
};

/// Central differences (L(a + h e_m) - L(a - h e_m)) / 2h against an analytic
/// gradient. Relative error is |a - f| / max(|a|, |f|, floor_ratio * max|a|),
/// so components that are zero in exact arithmetic (piston) are measured on
/// the scale of the largest component.
FdReport finite_difference_check(const std::function<double(std::span<const double>)>& loss,
                                 std::span<const double> params,
                                 std::span<const double> analytic, double step,
                                 double floor_ratio = 1e-6);

/// Forward/backward pair with tape semantics, the array-level surface used by
/// external training frameworks. Single-owner; not safe for concurrent use.
class BoundSimulator {
public:
  BoundSimulator(OpticalConfig config, RenderOptions options = {});

  const OpticalConfig& config() const { return config_; }
  std::vector<double> params() const { return element_params(config_.element); }
  void set_params(std::span<const double> params);

  /// Bins the depth map with the config's edges, softens masks, renders.
  SensorImage forward(const RGBImage& image, const DepthMap& depth);
  /// Gradient of <upstream, last forward output> w.r.t. params().
  ParamGradient backward(const SensorImage& upstream) const;

private:
  struct Tape {
    RGBImage image;
    LayerMasks masks;
    StackTape stack;
  };

  OpticalConfig config_;
  RenderOptions options_;
  std::optional<Tape> tape_;
};

}  // namespace dopt
