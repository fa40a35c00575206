#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "dopt/formation.hpp"

namespace dopt {

struct RectanglesParams {
  std::size_t height = 128;
  std::size_t width = 128;
  std::size_t min_count = 1;
  std::size_t max_count = 5;
  std::size_t min_side = 16;  // pixels
  std::size_t max_side = 64;
  double near = 1.0;  // meters
  double far = 5.0;
  std::size_t samples = 2000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RgbdSample {
  RGBImage rgb;
  DepthMap depth;
  std::string id;
};

/// White axis-aligned rectangles on black, each at a depth drawn uniformly in
/// inverse depth, composited far to near. Deterministic per (seed, index).
RgbdSample generate_rectangles(const RectanglesParams& params, std::size_t index);

/// Depth file encoding: PFM in meters, or 16-bit PNG times a scale (m/unit).
struct DepthFormat {
  enum class Kind { kPfm, kPng16 };
  Kind kind = Kind::kPfm;
  double scale = 1.0;
};

RgbdSample load_rgbd(const std::filesystem::path& rgb_path, const std::filesystem::path& depth_path,
                     const DepthFormat& format = {}, const std::string& id = "");

/// Writes rgb/<id>.png and depth/<id>.pfm under dir; returns the manifest
/// entry (relative paths).
nlohmann::json save_sample(const RgbdSample& sample, const std::filesystem::path& dir);

/// Zero-padded sample id, "%06d".
std::string sample_id(std::size_t index);

nlohmann::json to_json(const RectanglesParams& params);

}  // namespace dopt
