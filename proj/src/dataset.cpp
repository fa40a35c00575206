#include "dopt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "dopt/error.hpp"
#include "dopt/image_io.hpp"
#include "dopt/rng.hpp"

namespace dopt {
namespace {

struct Rect {
  std::size_t x0, y0, w, h;
  double depth;
};

std::string shape(std::size_t h, std::size_t w) {
  return std::to_string(h) + "x" + std::to_string(w);
}

}  // namespace

void RectanglesParams::validate() const {
  if (height < 32 || width < 32) throw ConfigError("rectangle images must be at least 32x32");
  if (min_count > max_count) throw ConfigError("rectangle count range is empty");
  if (min_side < 1 || min_side > max_side) throw ConfigError("rectangle side range is empty");
  if (!(near > 0.0) || !(far > near)) throw ConfigError("depth range requires 0 < near < far");
}

std::string sample_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

RgbdSample generate_rectangles(const RectanglesParams& params, std::size_t index) {
  params.validate();
  if (index >= params.samples) {
    throw ConfigError("sample index " + std::to_string(index) + " out of range (count " +
                      std::to_string(params.samples) + ")");
  }
  SplitMix64 rng(stream_seed(params.seed, index));
  const std::size_t k = rng.uniform_int(params.min_count, params.max_count);
  const double inv_near = 1.0 / params.near;
  const double inv_far = 1.0 / params.far;

  std::vector<Rect> rects;
  rects.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    Rect r{};
    r.w = std::min<std::size_t>(rng.uniform_int(params.min_side, params.max_side), params.width);
    r.h = std::min<std::size_t>(rng.uniform_int(params.min_side, params.max_side), params.height);
    r.x0 = rng.uniform_int(0, params.width - r.w);
    r.y0 = rng.uniform_int(0, params.height - r.h);
    r.depth = 1.0 / (inv_far + (inv_near - inv_far) * rng.uniform());
    rects.push_back(r);
  }
  // far to near; stable so equal depths keep draw order
  std::stable_sort(rects.begin(), rects.end(),
                   [](const Rect& a, const Rect& b) { return a.depth > b.depth; });

  RgbdSample s{RGBImage(params.height, params.width, 0.0),
               DepthMap(params.height, params.width, params.far), sample_id(index)};
  for (const Rect& r : rects) {
    for (std::size_t y = r.y0; y < r.y0 + r.h; ++y) {
      for (std::size_t x = r.x0; x < r.x0 + r.w; ++x) {
        for (auto& ch : s.rgb.channels) ch(y, x) = 1.0;
        s.depth(y, x) = r.depth;
      }
    }
  }
  return s;
}

RgbdSample load_rgbd(const std::filesystem::path& rgb_path, const std::filesystem::path& depth_path,
                     const DepthFormat& format, const std::string& id) {
  RgbdSample s;
  s.id = id.empty() ? rgb_path.stem().string() : id;
  s.rgb = srgb_decode(io::read_png_rgb8(rgb_path));
  if (format.kind == DepthFormat::Kind::kPfm) {
    s.depth = io::read_pfm_gray(depth_path);
  } else {
    const io::PngImage png = io::read_png(depth_path);
    if (png.channels != 1 || png.bit_depth != 16) {
      throw IoError("expected a 16-bit grayscale depth PNG: '" + depth_path.string() + "'");
    }
    s.depth = DepthMap(png.height, png.width);
    for (std::size_t i = 0; i < s.depth.size(); ++i) s.depth[i] = png.samples[i] * format.scale;
  }
  if (s.depth.rows() != s.rgb.height() || s.depth.cols() != s.rgb.width()) {
    throw IoError("RGB image '" + rgb_path.string() + "' is " +
                  shape(s.rgb.height(), s.rgb.width()) + " but depth map '" +
                  depth_path.string() + "' is " + shape(s.depth.rows(), s.depth.cols()));
  }
  return s;
}

nlohmann::json save_sample(const RgbdSample& sample, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "rgb");
  std::filesystem::create_directories(dir / "depth");
  const std::string rgb_rel = "rgb/" + sample.id + ".png";
  const std::string depth_rel = "depth/" + sample.id + ".pfm";
  io::write_png_rgb8(dir / rgb_rel, srgb_encode(sample.rgb));
  io::write_pfm(dir / depth_rel, sample.depth);
  return {{"id", sample.id}, {"rgb", rgb_rel}, {"depth", depth_rel}};
}

nlohmann::json to_json(const RectanglesParams& p) {
  return {{"height", p.height},     {"width", p.width},       {"min_count", p.min_count},
          {"max_count", p.max_count}, {"min_side", p.min_side}, {"max_side", p.max_side},
          {"near", p.near},         {"far", p.far},           {"samples", p.samples},
          {"seed", p.seed}};
}

}  // namespace dopt
