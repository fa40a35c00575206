#include "dopt/config_io.hpp"

#include <fstream>
#include <set>
#include <string>

#include "dopt/error.hpp"
#include "dopt/presets.hpp"

namespace dopt {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid value for '") + key + "': " + e.what());
  }
}

DispersionModel parse_dispersion(const json& obj, DispersionModel base) {
  reject_unknown(obj, {"mode", "n_design", "cauchy_b", "design_wavelength"}, "dispersion");
  if (obj.contains("mode")) {
    const std::string mode = obj.at("mode").get<std::string>();
    if (mode == "achromatic") {
      base.mode = DispersionModel::Mode::kAchromatic;
    } else if (mode == "cauchy") {
      base.mode = DispersionModel::Mode::kCauchy;
    } else {
      throw ConfigError("dispersion mode must be 'achromatic' or 'cauchy', got '" + mode + "'");
    }
  }
  read(obj, "n_design", base.n_design);
  read(obj, "cauchy_b", base.cauchy_b);
  read(obj, "design_wavelength", base.design_wavelength);
  return base;
}

Element parse_element(const json& obj, const OpticalConfig& cfg) {
  reject_unknown(obj, {"type", "coefficients", "norm_radius", "heights", "ring_radii", "material"},
                 "element");
  const std::string type = obj.value("type", std::string("none"));
  const double radius = 0.5 * cfg.lens.aperture_diameter;
  if (type == "none") return std::monostate{};
  if (type == "freeform") {
    FreeformSurface ff;
    if (const auto* prev = std::get_if<FreeformSurface>(&cfg.element)) ff = *prev;
    ff.norm_radius = radius;
    ff.material = cfg.lens.dispersion;
    read(obj, "norm_radius", ff.norm_radius);
    if (obj.contains("coefficients")) {
      const auto c = obj.at("coefficients").get<std::vector<double>>();
      if (c.size() != ff.coeffs.size()) {
        throw ConfigError("freeform needs exactly 36 coefficients, got " + std::to_string(c.size()));
      }
      std::copy(c.begin(), c.end(), ff.coeffs.begin());
    }
    if (obj.contains("material")) ff.material = parse_dispersion(obj.at("material"), ff.material);
    return ff;
  }
  if (type == "annular") {
    AnnularSurface an = AnnularSurface::equal_area(radius, cfg.lens.dispersion);
    if (const auto* prev = std::get_if<AnnularSurface>(&cfg.element)) an.heights = prev->heights;
    if (obj.contains("heights")) {
      const auto h = obj.at("heights").get<std::vector<double>>();
      if (h.size() != 3) throw ConfigError("annular element needs exactly 3 heights");
      std::copy(h.begin(), h.end(), an.heights.begin());
    }
    if (obj.contains("ring_radii")) {
      const auto r = obj.at("ring_radii").get<std::vector<double>>();
      if (r.size() != 3) throw ConfigError("annular element needs exactly 3 ring radii");
      std::copy(r.begin(), r.end(), an.ring_radii.begin());
    }
    if (obj.contains("material")) an.material = parse_dispersion(obj.at("material"), an.material);
    return an;
  }
  throw ConfigError("element type must be none, freeform or annular, got '" + type + "'");
}

}  // namespace

nlohmann::json to_json(const DispersionModel& m) {
  return {{"mode", m.mode == DispersionModel::Mode::kCauchy ? "cauchy" : "achromatic"},
          {"n_design", m.n_design},
          {"cauchy_b", m.cauchy_b},
          {"design_wavelength", m.design_wavelength}};
}

nlohmann::json element_to_json(const Element& element) {
  if (const auto* ff = std::get_if<FreeformSurface>(&element)) {
    return {{"type", "freeform"},
            {"coefficients", std::vector<double>(ff->coeffs.begin(), ff->coeffs.end())},
            {"norm_radius", ff->norm_radius},
            {"material", to_json(ff->material)}};
  }
  if (const auto* an = std::get_if<AnnularSurface>(&element)) {
    return {{"type", "annular"},
            {"heights", std::vector<double>(an->heights.begin(), an->heights.end())},
            {"ring_radii", std::vector<double>(an->ring_radii.begin(), an->ring_radii.end())},
            {"material", to_json(an->material)}};
  }
  return {{"type", "none"}};
}

nlohmann::json to_json(const OpticalConfig& o) {
  json j;
  j["lens"] = {{"focal_length", o.lens.focal_length},
               {"aperture_diameter", o.lens.aperture_diameter},
               {"f_number", o.lens.f_number()},
               {"dispersion", to_json(o.lens.dispersion)}};
  j["element"] = element_to_json(o.element);
  j["focus_distance"] = o.focus_distance;
  j["sensor_distance"] = o.sensor_distance();
  j["sensor_distance_override"] = o.sensor_distance_override.has_value();
  j["grid"] = {{"n", o.grid.n}, {"pitch", o.grid.pitch}};
  j["psf"] = {{"size", o.psf.size},
              {"binning", o.psf.binning},
              {"normalize", o.psf.normalize},
              {"min_retained", o.psf.min_retained}};
  j["wavelengths"] = std::vector<double>(o.wavelengths.begin(), o.wavelengths.end());
  j["depths"] = o.depths;
  if (o.depth_range) {
    j["depth_range"] = {{"near", o.depth_range->near},
                        {"far", o.depth_range->far},
                        {"count", o.depth_range->count}};
  }
  j["all_in_focus"] = o.all_in_focus;
  return j;
}

nlohmann::json to_json(const ProjectConfig& c) {
  json j = to_json(c.optics);
  j["render"] = {{"mask_sigma", c.render.mask_sigma}};
  j["objective"] = {{"ncc_weight", c.objective.ncc_weight},
                    {"concentration_weight", c.objective.concentration_weight}};
  return j;
}

ProjectConfig parse_config(const nlohmann::json& doc) {
  reject_unknown(doc,
                 {"preset", "lens", "element", "focus_distance", "sensor_distance",
                  "sensor_distance_override", "grid", "psf", "wavelengths", "depths",
                  "depth_range", "all_in_focus", "render", "objective"},
                 "config");
  ProjectConfig pc;
  try {
    pc.optics = preset(doc.value("preset", std::string("nyu-defocus")));
    OpticalConfig& o = pc.optics;

    if (doc.contains("lens")) {
      const json& lens = doc.at("lens");
      reject_unknown(lens, {"focal_length", "aperture_diameter", "f_number", "dispersion"}, "lens");
      const double f_number = o.lens.f_number();
      read(lens, "focal_length", o.lens.focal_length);
      o.lens.aperture_diameter = o.lens.focal_length / f_number;
      if (lens.contains("f_number")) {
        o.lens.aperture_diameter = o.lens.focal_length / lens.at("f_number").get<double>();
      }
      read(lens, "aperture_diameter", o.lens.aperture_diameter);
      if (lens.contains("dispersion")) {
        o.lens.dispersion = parse_dispersion(lens.at("dispersion"), o.lens.dispersion);
      }
      // elements inherited from the preset follow the lens
      if (auto* ff = std::get_if<FreeformSurface>(&o.element)) {
        ff->norm_radius = 0.5 * o.lens.aperture_diameter;
        ff->material = o.lens.dispersion;
      } else if (auto* an = std::get_if<AnnularSurface>(&o.element)) {
        const auto h = an->heights;
        *an = AnnularSurface::equal_area(0.5 * o.lens.aperture_diameter, o.lens.dispersion);
        an->heights = h;
      }
    }
    if (doc.contains("element")) o.element = parse_element(doc.at("element"), o);
    read(doc, "focus_distance", o.focus_distance);
    if (doc.contains("sensor_distance") && !doc.at("sensor_distance").is_null()) {
      // a resolved manifest echoes the derived distance; only honor it as an
      // override when flagged (or when no flag is present)
      if (doc.value("sensor_distance_override", true)) {
        o.sensor_distance_override = doc.at("sensor_distance").get<double>();
      }
    }
    if (doc.contains("grid")) {
      const json& g = doc.at("grid");
      reject_unknown(g, {"n", "pitch"}, "grid");
      read(g, "n", o.grid.n);
      read(g, "pitch", o.grid.pitch);
    }
    if (doc.contains("psf")) {
      const json& p = doc.at("psf");
      reject_unknown(p, {"size", "binning", "normalize", "min_retained"}, "psf");
      read(p, "size", o.psf.size);
      read(p, "binning", o.psf.binning);
      read(p, "normalize", o.psf.normalize);
      read(p, "min_retained", o.psf.min_retained);
    }
    if (doc.contains("wavelengths")) {
      const auto wl = doc.at("wavelengths").get<std::vector<double>>();
      if (wl.size() != 3) throw ConfigError("wavelengths must list exactly three values (R, G, B)");
      std::copy(wl.begin(), wl.end(), o.wavelengths.begin());
    }
    if (doc.contains("depth_range")) {
      const json& r = doc.at("depth_range");
      reject_unknown(r, {"near", "far", "count"}, "depth_range");
      DepthRange range = o.depth_range.value_or(DepthRange{});
      read(r, "near", range.near);
      read(r, "far", range.far);
      read(r, "count", range.count);
      o.depth_range = range;
      o.depths = depth_bins(range.near, range.far, range.count).centers;
    } else if (doc.contains("depths")) {
      o.depths = doc.at("depths").get<std::vector<double>>();
      o.depth_range.reset();
    }
    read(doc, "all_in_focus", o.all_in_focus);
    if (doc.contains("render")) {
      reject_unknown(doc.at("render"), {"mask_sigma"}, "render");
      read(doc.at("render"), "mask_sigma", pc.render.mask_sigma);
    }
    if (doc.contains("objective")) {
      reject_unknown(doc.at("objective"), {"ncc_weight", "concentration_weight"}, "objective");
      read(doc.at("objective"), "ncc_weight", pc.objective.ncc_weight);
      read(doc.at("objective"), "concentration_weight", pc.objective.concentration_weight);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  pc.optics.validate();
  pc.objective.validate();
  if (!(pc.render.mask_sigma >= 0.0)) throw ConfigError("mask_sigma must be non-negative");
  return pc;
}

ProjectConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

}  // namespace dopt
