#include <cmath>
#include <set>

#include "doctest.h"
#include "dopt/dataset.hpp"
#include "dopt/error.hpp"
#include "dopt/image_io.hpp"
#include "dopt/rng.hpp"
#include "helpers.hpp"

using namespace dopt;

TEST_CASE("splitmix64 reference values") {
  // published SplitMix64 outputs for seed 0
  SplitMix64 g(0);
  CHECK(g.next() == 0xE220A8397B1DCDAFULL);
  CHECK(g.next() == 0x6E789E6AA1B965F4ULL);
  SplitMix64 u(7);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    const auto k = u.uniform_int(3, 5);
    CHECK(k >= 3);
    CHECK(k <= 5);
  }
}

TEST_CASE("rectangles") {
  RectanglesParams p;
  p.seed = 17;
  SUBCASE("deterministic per index") {
    const auto a = generate_rectangles(p, 5);
    const auto b = generate_rectangles(p, 5);
    CHECK(a.depth == b.depth);
    CHECK(a.rgb.channels[0] == b.rgb.channels[0]);
    CHECK(a.id == "000005");
    CHECK(!(generate_rectangles(p, 6).depth == a.depth));
  }
  SUBCASE("depth statistics") {
    for (std::size_t i = 0; i < 20; ++i) {
      const auto s = generate_rectangles(p, i);
      std::set<double> values(s.depth.begin(), s.depth.end());
      CHECK(values.size() <= p.max_count + 1);
      for (double d : values) {
        CHECK(d >= p.near);
        CHECK(d <= p.far);
      }
      for (std::size_t q = 0; q < s.depth.size(); ++q) {
        const double v = s.rgb.channels[0][q];
        CHECK((v == 0.0 || v == 1.0));
        if (s.depth[q] < p.far) CHECK(v == 1.0);
      }
    }
  }
  SUBCASE("no rectangles") {
    p.min_count = p.max_count = 0;
    const auto s = generate_rectangles(p, 0);
    CHECK(testing::sum(s.rgb.channels[1]) == 0.0);
    for (double d : s.depth) CHECK(d == p.far);
  }
  SUBCASE("full-frame rectangle") {
    p.min_count = p.max_count = 1;
    p.min_side = p.max_side = 128;
    const auto s = generate_rectangles(p, 3);
    CHECK(testing::sum(s.rgb.channels[2]) == 128.0 * 128.0);
    std::set<double> values(s.depth.begin(), s.depth.end());
    CHECK(values.size() == 1);
  }
  SUBCASE("occlusion keeps the nearer depth") {
    p.min_count = p.max_count = 2;
    p.min_side = p.max_side = 100;
    for (std::size_t i = 0; i < 10; ++i) {
      const auto s = generate_rectangles(p, i);
      // two 100 px squares in 128 px always overlap in the middle
      SplitMix64 rng(stream_seed(p.seed, i));
      rng.uniform_int(2, 2);
      double d[2];
      for (double& v : d) {
        rng.uniform_int(100, 100);
        rng.uniform_int(100, 100);
        rng.uniform_int(0, 28);
        rng.uniform_int(0, 28);
        v = 1.0 / (1.0 / p.far + (1.0 / p.near - 1.0 / p.far) * rng.uniform());
      }
      CHECK(s.depth(64, 64) == std::min(d[0], d[1]));
      CHECK(s.rgb.channels[0](64, 64) == 1.0);
    }
  }
  SUBCASE("validation") {
    p.height = 16;
    CHECK_THROWS_AS(generate_rectangles(p, 0), ConfigError);
    p.height = 128;
    CHECK_THROWS_AS(generate_rectangles(p, p.samples), ConfigError);
  }
}

TEST_CASE("pfm round trip") {
  const auto dir = testing::temp_dir("pfm");
  RealArray g(3, 5);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = 0.1 * i - 0.3;
  io::write_pfm(dir / "g.pfm", g);
  const auto back = io::read_pfm_gray(dir / "g.pfm");
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(back[i] == static_cast<float>(g[i]));

  ColorImage c(4, 2);
  for (int ch = 0; ch < 3; ++ch) c.channels[ch](3, 1) = 1.0 + ch;
  io::write_pfm(dir / "c.pfm", c);
  const auto cb = io::read_pfm_color(dir / "c.pfm");
  CHECK(cb.channels[2](3, 1) == 3.0);
  CHECK(cb.channels[0](0, 0) == 0.0);

  // standard header, rows stored bottom to top
  const auto raw = io::read_pfm(dir / "g.pfm");
  CHECK(raw.width == 5);
  CHECK(raw.height == 3);
  CHECK(raw.channels == 1);
  CHECK_THROWS_AS(io::read_pfm(dir / "missing.pfm"), IoError);
  CHECK_THROWS_AS(io::read_png(dir / "g.pfm"), IoError);
}

TEST_CASE("rgbd save and load") {
  const auto dir = testing::temp_dir("rgbd");
  RectanglesParams p;
  p.seed = 3;
  const auto s = generate_rectangles(p, 1);
  const auto entry = save_sample(s, dir);
  CHECK(entry["rgb"] == "rgb/000001.png");
  const auto back = load_rgbd(dir / "rgb/000001.png", dir / "depth/000001.pfm");
  for (std::size_t i = 0; i < s.depth.size(); ++i) {
    CHECK(back.depth[i] == static_cast<double>(static_cast<float>(s.depth[i])));
  }
  for (int c = 0; c < 3; ++c) {
    CHECK(testing::max_abs_diff(back.rgb.channels[c], s.rgb.channels[c]) <= 1.0 / 255.0);
  }

  SUBCASE("16-bit depth png with declared scale") {
    io::write_png_gray16(dir / "d16.png", 128, 128, std::vector<std::uint16_t>(128 * 128, 25600));
    const auto d = load_rgbd(dir / "rgb/000001.png", dir / "d16.png",
                             DepthFormat{DepthFormat::Kind::kPng16, 1.0 / 256.0});
    CHECK(d.depth(5, 7) == 100.0);
  }
  SUBCASE("size mismatch names both shapes") {
    io::write_pfm(dir / "small.pfm", RealArray(10, 12, 1.0));
    CHECK_THROWS_WITH_AS(load_rgbd(dir / "rgb/000001.png", dir / "small.pfm"),
                         doctest::Contains("128x128"), IoError);
    CHECK_THROWS_WITH_AS(load_rgbd(dir / "rgb/000001.png", dir / "small.pfm"),
                         doctest::Contains("10x12"), IoError);
  }
  SUBCASE("missing file names the path") {
    CHECK_THROWS_WITH_AS(load_rgbd(dir / "nope.png", dir / "depth/000001.pfm"),
                         doctest::Contains("nope.png"), IoError);
  }
}
