#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "dopt/formation.hpp"
#include "dopt/presets.hpp"

namespace testing {

// NYU prescription on a small grid. Aperture must fit inside n * pitch.
inline dopt::OpticalConfig small_nyu(dopt::OpticalModel model, std::size_t n = 128,
                                     std::size_t bins = 4) {
  auto cfg = dopt::make_preset(dopt::Scene::kNyu, model);
  cfg.grid = {n, 6.4e-3 / static_cast<double>(n)};
  cfg.psf.size = n;
  cfg.psf.binning = 1;
  cfg.depth_range = dopt::DepthRange{0.7, 7.0, bins};
  cfg.depths = dopt::depth_bins(0.7, 7.0, bins).centers;
  return cfg;
}

inline double sum(const dopt::RealArray& a) {
  double s = 0.0;
  for (double v : a) s += v;
  return s;
}

inline double max_abs_diff(const dopt::RealArray& a, const dopt::RealArray& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dopt_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
