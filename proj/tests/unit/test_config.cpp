#include "doctest.h"
#include "dopt/config_io.hpp"
#include "dopt/error.hpp"
#include "dopt/presets.hpp"

using namespace dopt;
using nlohmann::json;

TEST_CASE("default config is the NYU defocus preset") {
  const auto pc = parse_config(json::object());
  const auto& o = pc.optics;
  CHECK(o.lens.focal_length == 0.05);
  CHECK(o.lens.f_number() == doctest::Approx(8.0));
  CHECK(o.focus_distance == 1.0);
  CHECK(o.depths.size() == 12);
  CHECK(std::holds_alternative<std::monostate>(o.element));
  CHECK(pc.render.mask_sigma == 1.5);
  CHECK(pc.objective.concentration_weight == 0.1);
}

TEST_CASE("resolved config echoes every default") {
  const auto pc = parse_config(json{{"preset", "nyu-astigmatism"}});
  const json j = to_json(pc);
  for (const char* key : {"lens", "element", "focus_distance", "sensor_distance", "grid", "psf",
                          "wavelengths", "depths", "depth_range", "all_in_focus", "render",
                          "objective"}) {
    CAPTURE(key);
    CHECK(j.contains(key));
  }
  CHECK(j["element"]["type"] == "freeform");
  CHECK(j["element"]["coefficients"].size() == 36);
  CHECK(j["lens"]["dispersion"]["mode"] == "achromatic");
  CHECK(j["sensor_distance"].get<double>() == doctest::Approx(1.0 / 19.0));

  // the echo parses back to the same config
  json again = j;
  again.erase("sensor_distance_override");
  again["sensor_distance_override"] = false;
  const auto back = parse_config(again);
  CHECK(to_json(back) == j);
}

TEST_CASE("overrides") {
  SUBCASE("lens and grid") {
    const auto pc = parse_config(json::parse(R"({
      "lens": {"focal_length": 0.08, "f_number": 4},
      "grid": {"n": 1024, "pitch": 2e-5},
      "psf": {"size": 32, "binning": 1},
      "focus_distance": 7.6
    })"));
    CHECK(pc.optics.lens.aperture_diameter == doctest::Approx(0.02));
    CHECK(pc.optics.grid.n == 1024);
    CHECK(pc.optics.sensor_distance() == doctest::Approx(0.0808511).epsilon(1e-6));
  }
  SUBCASE("depth range recomputes the bins") {
    const auto pc = parse_config(json::parse(R"({"depth_range": {"near": 1, "far": 2, "count": 3}})"));
    REQUIRE(pc.optics.depths.size() == 3);
    CHECK(pc.optics.depths[1] == doctest::Approx(4.0 / 3.0));
  }
  SUBCASE("explicit depths") {
    const auto pc = parse_config(json::parse(R"({"depths": [0.8, 1.5]})"));
    CHECK(pc.optics.depths.size() == 2);
    CHECK(!pc.optics.depth_range.has_value());
  }
  SUBCASE("freeform element") {
    json doc = {{"element", {{"type", "freeform"}, {"coefficients", std::vector<double>(36, 0.0)}}}};
    doc["element"]["coefficients"][10] = 5e-7;
    const auto pc = parse_config(doc);
    const auto& ff = std::get<FreeformSurface>(pc.optics.element);
    CHECK(ff.coeffs[10] == 5e-7);
    CHECK(ff.norm_radius == doctest::Approx(3.125e-3));
  }
  SUBCASE("annular element") {
    const auto pc = parse_config(json::parse(R"({"element": {"type": "annular", "heights": [1e-7, 0, -1e-7]}})"));
    const auto& an = std::get<AnnularSurface>(pc.optics.element);
    CHECK(an.heights[2] == -1e-7);
    CHECK(an.ring_radii[2] == doctest::Approx(3.125e-3));
  }
  SUBCASE("cauchy dispersion") {
    const auto pc = parse_config(json::parse(R"({"lens": {"dispersion": {"mode": "cauchy"}}})"));
    CHECK(pc.optics.lens.dispersion.mode == DispersionModel::Mode::kCauchy);
  }
}

TEST_CASE("invalid configs") {
  CHECK_THROWS_WITH_AS(parse_config(json{{"lense", json::object()}}),
                       doctest::Contains("unknown key 'lense'"), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"preset", "nope"}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"element": {"type": "freeform", "coefficients": [1, 2]}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"grid": {"n": "big"}})")), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(json::parse(R"({"grid": {"n": 256, "pitch": 1e-5}})")),
                       doctest::Contains("aperture exceeds simulation grid"), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"objective": {"ncc_weight": 0, "concentration_weight": 0}})")),
                  ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("every preset parses") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    CHECK_NOTHROW(parse_config(json{{"preset", name}}));
  }
  const auto k = parse_config(json{{"preset", "kitti-chromatic"}});
  CHECK(k.optics.lens.focal_length == 0.08);
  CHECK(k.optics.focus_distance == 7.6);
  CHECK(k.optics.depth_range->far == 50.0);
}
