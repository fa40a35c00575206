#include <cmath>
#include <random>

#include "doctest.h"
#include "dopt/adjoint.hpp"
#include "dopt/error.hpp"
#include "dopt/lens_opt.hpp"
#include "helpers.hpp"

using namespace dopt;
using testing::small_nyu;

namespace {

RealArray random_array(std::size_t n, std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(-1, 1);
  RealArray a(n, n);
  for (auto& v : a) v = u(g);
  return a;
}

void randomize(OpticalConfig& cfg, double scale, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  auto p = element_params(cfg.element);
  for (auto& v : p) v = u(g);
  cfg.element = with_element_params(cfg.element, p);
}

OpticalConfig with_params(OpticalConfig cfg, std::span<const double> p) {
  cfg.element = with_element_params(cfg.element, p);
  return cfg;
}

double inner(const RealArray& a, const RealArray& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("grad_psf matches finite differences") {
  auto cfg = small_nyu(OpticalModel::kFreeform, 128, 3);
  randomize(cfg, 0.2e-6, 11);
  std::mt19937_64 g(5);
  const auto up = random_array(cfg.psf.size, g);
  const double z = cfg.depths[0], wl = 610e-9;
  const auto grad = grad_psf(cfg, z, wl, up);
  REQUIRE(grad.values.size() == 36);
  const auto params = element_params(cfg.element);
  auto loss = [&](std::span<const double> p) { return inner(up, psf(with_params(cfg, p), z, wl)); };
  CHECK(grad.loss == doctest::Approx(loss(params)).epsilon(1e-14));
  const auto rep = finite_difference_check(loss, params, grad.values, 1e-9);
  CHECK(rep.max_rel_error < 1e-4);

  double largest = 0;
  for (double v : grad.values) largest = std::max(largest, std::abs(v));
  CHECK(std::abs(grad.values[0]) < 1e-10 * largest);

  const auto zero = grad_psf(cfg, z, wl, RealArray(cfg.psf.size, cfg.psf.size));
  for (double v : zero.values) CHECK(v == 0.0);
}

TEST_CASE("annular gradient matches finite differences") {
  auto cfg = small_nyu(OpticalModel::kAnnular, 128, 3);
  randomize(cfg, 0.5e-6, 12);
  std::mt19937_64 g(6);
  std::vector<RealArray> up;
  for (int i = 0; i < 9; ++i) up.push_back(random_array(cfg.psf.size, g));
  const auto grad = grad_stack(cfg, up);
  REQUIRE(grad.values.size() == 3);
  auto loss = [&](std::span<const double> p) {
    const auto s = psf_stack(with_params(cfg, p));
    double l = 0;
    for (std::size_t i = 0; i < up.size(); ++i) l += inner(up[i], s.slices[i]);
    return l;
  };
  const auto rep = finite_difference_check(loss, element_params(cfg.element), grad.values, 1e-10);
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("stack gradient is the sum of slice gradients") {
  auto cfg = small_nyu(OpticalModel::kFreeform, 64, 2);
  cfg.grid.pitch = 100e-6;
  randomize(cfg, 0.3e-6, 2);
  std::mt19937_64 g(8);
  std::vector<RealArray> up;
  for (int i = 0; i < 6; ++i) up.push_back(random_array(cfg.psf.size, g));
  const auto total = grad_stack(cfg, up);
  std::vector<double> sum(36, 0.0);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t c = 0; c < 3; ++c) {
      const auto s = grad_psf(cfg, cfg.depths[j], cfg.wavelengths[c], up[j * 3 + c]);
      for (int m = 0; m < 36; ++m) sum[m] += s.values[m];
    }
  }
  double largest = 0;
  for (double v : sum) largest = std::max(largest, std::abs(v));
  for (int m = 0; m < 36; ++m) CHECK(std::abs(total.values[m] - sum[m]) <= 1e-10 * largest);
}

TEST_CASE("tape invariant") {
  auto cfg = small_nyu(OpticalModel::kFreeform, 64, 2);
  cfg.grid.pitch = 100e-6;
  auto tape = taped_psf_stack(cfg);
  std::vector<RealArray> up(6, RealArray(64, 64, 1.0));
  CHECK_NOTHROW(grad_stack(tape, up));
  tape.stack.slices[4][100] *= 1.0 + 1e-15;
  CHECK_THROWS_WITH_AS(grad_stack(tape, up), doctest::Contains("taped forward pass"),
                       NumericalError);
  up.pop_back();
  CHECK_THROWS_AS(grad_stack(cfg, up), ConfigError);
}

TEST_CASE("grad_render matches finite differences") {
  auto cfg = small_nyu(OpticalModel::kFreeform, 128, 3);
  cfg.psf.size = 32;
  cfg.grid.pitch = 50e-6;
  cfg.psf.min_retained = 0.0;
  randomize(cfg, 0.2e-6, 21);
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(0, 1);
  RGBImage img(32, 32);
  for (auto& ch : img.channels) {
    for (auto& v : ch) v = u(g);
  }
  DepthMap depth(32, 32);
  for (auto& v : depth) v = 0.7 + 6.0 * u(g);
  const auto masks = soften_masks(quantize_depth(depth, inverse_edges_for(cfg)), 1.5);
  SensorImage up(32, 32);
  for (auto& ch : up.channels) {
    for (auto& v : ch) v = u(g) - 0.5;
  }
  const auto grad = grad_render(img, masks, cfg, up);
  auto loss = [&](std::span<const double> p) {
    const auto out = render(img, masks, psf_stack(with_params(cfg, p)));
    double l = 0;
    for (int c = 0; c < 3; ++c) l += inner(out.channels[c], up.channels[c]);
    return l;
  };
  const auto params = element_params(cfg.element);
  const auto rep = finite_difference_check(loss, params, grad.values, 1e-9);
  double worst = 0;
  for (std::size_t m = 1; m < 7; ++m) worst = std::max(worst, rep.entries[m].rel_error);
  CHECK(worst < 1e-4);
  CHECK(rep.max_rel_error < 1e-4);

  SensorImage zero(32, 32);
  for (double v : grad_render(img, masks, cfg, zero).values) CHECK(v == 0.0);
}

TEST_CASE("single-layer delta image reduces to grad_psf") {
  auto cfg = small_nyu(OpticalModel::kFreeform, 64, 2);
  cfg.grid.pitch = 100e-6;
  cfg.psf.size = 16;
  cfg.psf.min_retained = 0.0;
  cfg.depths = {1.3};
  cfg.depth_range.reset();
  randomize(cfg, 0.3e-6, 4);
  RGBImage img(40, 40);
  img.channels[1](20, 20) = 1.0;
  LayerMasks m{{RealArray(40, 40, 1.0)}, {2.0, 0.0}};
  std::mt19937_64 g(1);
  SensorImage up(40, 40);
  for (auto& v : up.channels[1]) v = std::uniform_real_distribution<double>(-1, 1)(g);
  const auto a = grad_render(img, m, cfg, up);
  // out(20 + u - 8, 20 + v - 8) = PSF(u, v)
  RealArray psf_up(16, 16);
  for (std::size_t u = 0; u < 16; ++u) {
    for (std::size_t v = 0; v < 16; ++v) psf_up(u, v) = up.channels[1](12 + u, 12 + v);
  }
  const auto b = grad_psf(cfg, 1.3, cfg.wavelengths[1], psf_up);
  double largest = 0;
  for (double v : b.values) largest = std::max(largest, std::abs(v));
  for (int k = 0; k < 36; ++k) CHECK(std::abs(a.values[k] - b.values[k]) <= 1e-9 * largest);
}

TEST_CASE("finite difference check") {
  SUBCASE("quadratic") {
    const std::vector<double> a{0.3, -1.2, 2.5};
    auto loss = [](std::span<const double> p) {
      double s = 0;
      for (double v : p) s += v * v;
      return s;
    };
    std::vector<double> g{0.6, -2.4, 5.0};
    const auto rep = finite_difference_check(loss, a, g, 1e-3);
    CHECK(rep.max_rel_error < 1e-10);
    CHECK(rep.entries.size() == 3);
    CHECK_THROWS_AS(finite_difference_check(loss, a, g, 0.0), ConfigError);
  }
  SUBCASE("error versus step is V-shaped") {
    auto cfg = small_nyu(OpticalModel::kFreeform, 64, 2);
    cfg.grid.pitch = 100e-6;
    randomize(cfg, 0.5e-6, 9);
    const Objective obj;
    const auto ev = evaluate_objective(cfg, obj);
    auto loss = [&](std::span<const double> p) {
      return discriminability_loss(psf_stack(with_params(cfg, p)), obj).total;
    };
    const auto params = element_params(cfg.element);
    std::vector<double> err;
    for (double h : {1e-6, 1e-8, 1e-10, 1e-12, 1e-14}) {
      err.push_back(finite_difference_check(loss, params, ev.grad.values, h).max_rel_error);
    }
    const auto best = std::min_element(err.begin(), err.end()) - err.begin();
    CHECK(best > 0);
    CHECK(best < 4);
    for (long i = 0; i < best; ++i) CHECK(err[i] > err[i + 1]);
    for (long i = best; i + 1 < static_cast<long>(err.size()); ++i) CHECK(err[i] < err[i + 1]);
    CHECK(err[0] > 1e-2);
  }
}

TEST_CASE("bound simulator") {
  auto cfg = small_nyu(OpticalModel::kFreeform, 64, 3);
  cfg.grid.pitch = 100e-6;
  cfg.psf.size = 16;
  cfg.psf.min_retained = 0.0;
  randomize(cfg, 0.2e-6, 30);
  BoundSimulator sim(cfg);
  SensorImage up(24, 24, 0.1);
  CHECK_THROWS_WITH_AS(sim.backward(up), "no taped forward pass", ConfigError);

  RGBImage img(24, 24);
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& ch : img.channels) {
    for (auto& v : ch) v = u(g);
  }
  DepthMap depth(24, 24);
  for (auto& v : depth) v = 0.8 + 5 * u(g);
  for (auto& ch : up.channels) {
    for (auto& v : ch) v = u(g) - 0.5;
  }
  const auto out = sim.forward(img, depth);
  const auto masks = soften_masks(quantize_depth(depth, inverse_edges_for(cfg)), 1.5);
  const auto ref = render(img, masks, psf_stack(cfg));
  for (int c = 0; c < 3; ++c) CHECK(out.channels[c] == ref.channels[c]);
  const auto a = sim.backward(up);
  const auto b = grad_render(img, masks, cfg, up);
  CHECK(a.values == b.values);

  auto p = sim.params();
  CHECK(p.size() == 36);
  p[4] += 1e-7;
  sim.set_params(p);
  CHECK_THROWS_AS(sim.backward(up), ConfigError);
  CHECK_THROWS_AS(sim.forward(img, DepthMap(3, 3, 1.0)), ConfigError);
}
