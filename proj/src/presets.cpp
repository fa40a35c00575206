#include "dopt/presets.hpp"

#include <array>
#include <utility>

#include "dopt/error.hpp"
#include "dopt/formation.hpp"

namespace dopt {
namespace {

constexpr std::array<std::pair<std::string_view, Scene>, 2> kScenes{{
    {"nyu", Scene::kNyu},
    {"kitti", Scene::kKitti},
}};

constexpr std::array<std::pair<std::string_view, OpticalModel>, 7> kModels{{
    {"all-in-focus", OpticalModel::kAllInFocus},
    {"defocus", OpticalModel::kDefocus},
    {"astigmatism", OpticalModel::kAstigmatism},
    {"chromatic", OpticalModel::kChromatic},
    {"spherical", OpticalModel::kSpherical},
    {"annular", OpticalModel::kAnnular},
    {"freeform", OpticalModel::kFreeform},
}};

}  // namespace

OpticalConfig scene_prescription(Scene scene) {
  OpticalConfig cfg;
  DepthRange range;
  if (scene == Scene::kNyu) {
    cfg.lens.focal_length = 0.050;
    cfg.focus_distance = 1.0;
    cfg.grid = {2048, 3.5e-6};
    range = {0.7, 7.0, 12};
  } else {
    cfg.lens.focal_length = 0.080;
    cfg.focus_distance = 7.6;
    cfg.grid = {4096, 3.5e-6};
    range = {2.0, 50.0, 12};
  }
  cfg.lens.aperture_diameter = cfg.lens.focal_length / 8.0;
  cfg.depth_range = range;
  cfg.depths = depth_bins(range.near, range.far, range.count).centers;
  return cfg;
}

OpticalConfig make_preset(Scene scene, OpticalModel model, double spherical_coeff) {
  OpticalConfig cfg = scene_prescription(scene);
  const double radius = 0.5 * cfg.lens.aperture_diameter;
  FreeformSurface ff;
  ff.norm_radius = radius;
  ff.material = cfg.lens.dispersion;
  switch (model) {
    case OpticalModel::kAllInFocus:
      cfg.all_in_focus = true;
      break;
    case OpticalModel::kDefocus:
      break;
    case OpticalModel::kAstigmatism:
      // two design wavelengths of sag at the aperture edge
      ff.coeffs[5] = 2.0 * cfg.lens.dispersion.design_wavelength;
      cfg.element = ff;
      break;
    case OpticalModel::kChromatic:
      cfg.lens.dispersion.mode = DispersionModel::Mode::kCauchy;
      break;
    case OpticalModel::kSpherical:
      ff.coeffs[10] = spherical_coeff;
      cfg.element = ff;
      break;
    case OpticalModel::kAnnular:
      cfg.element = AnnularSurface::equal_area(radius, cfg.lens.dispersion);
      break;
    case OpticalModel::kFreeform:
      cfg.element = ff;
      break;
  }
  return cfg;
}

OpticalConfig preset(std::string_view name) {
  for (const auto& [sname, scene] : kScenes) {
    if (name.substr(0, sname.size()) != sname || name.size() <= sname.size() + 1 ||
        name[sname.size()] != '-') {
      continue;
    }
    const std::string_view rest = name.substr(sname.size() + 1);
    for (const auto& [mname, model] : kModels) {
      if (rest == mname) return make_preset(scene, model);
    }
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [sname, scene] : kScenes) {
    for (const auto& [mname, model] : kModels) {
      names.push_back(std::string(sname) + "-" + std::string(mname));
    }
  }
  return names;
}

}  // namespace dopt
