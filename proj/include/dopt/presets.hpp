#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dopt/optics.hpp"

namespace dopt {

enum class Scene { kNyu, kKitti };

/// The fixed and optimizable camera models compared for depth encoding.
enum class OpticalModel {
  kAllInFocus,
  kDefocus,      // achromatic thin lens
  kAstigmatism,  // achromatic, Noll 6 freeform term
  kChromatic,    // Cauchy dispersion, no element
  kSpherical,    // achromatic, Noll 11 freeform term
  kAnnular,      // three equal-area rings, zero heights
  kFreeform,     // 36 Zernike terms, zero coefficients
};

/// Base prescription for a scene: NYU is f/8 50 mm focused at 1 m over
/// 0.7-7 m; KITTI is f/8 80 mm focused at 7.6 m over 2-50 m. Both use 12
/// inverse-depth bins.
OpticalConfig scene_prescription(Scene scene);

/// spherical_coeff is the Noll 11 sag amplitude used by kSpherical.
OpticalConfig make_preset(Scene scene, OpticalModel model, double spherical_coeff = 530e-9);

/// Named preset such as "nyu-defocus" or "kitti-chromatic".
OpticalConfig preset(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace dopt
