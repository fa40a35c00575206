#pragma once

#include <filesystem>

#include "json.hpp"

#include "dopt/formation.hpp"
#include "dopt/lens_opt.hpp"
#include "dopt/optics.hpp"

namespace dopt {

/// Everything a run reads from its JSON config document.
struct ProjectConfig {
  OpticalConfig optics;
  RenderOptions render;
  Objective objective;
};

/// Parses a config document. An optional "preset" key selects the base
/// (default "nyu-defocus"); every other key overrides it. Unknown keys are
/// rejected. Throws ConfigError; the result is validated.
ProjectConfig parse_config(const nlohmann::json& doc);
ProjectConfig load_config(const std::filesystem::path& path);

/// Fully resolved document: every defaulted value is written out.
nlohmann::json to_json(const ProjectConfig& config);
nlohmann::json to_json(const OpticalConfig& optics);
nlohmann::json to_json(const DispersionModel& model);
nlohmann::json element_to_json(const Element& element);

}  // namespace dopt
