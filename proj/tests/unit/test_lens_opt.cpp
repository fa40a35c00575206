#include <cmath>
#include <random>

#include "doctest.h"
#include "dopt/error.hpp"
#include "dopt/lens_opt.hpp"
#include "helpers.hpp"

using namespace dopt;
using testing::small_nyu;

namespace {

PSFStack random_stack(std::size_t J, std::size_t p, unsigned seed) {
  std::mt19937 g(seed);
  std::uniform_real_distribution<double> u(0, 1);
  PSFStack s;
  for (std::size_t j = 0; j < J; ++j) {
    s.depths.push_back(1.0 + j);
    for (int c = 0; c < 3; ++c) {
      RealArray a(p, p);
      for (auto& v : a) v = u(g);
      const double t = testing::sum(a);
      for (auto& v : a) v /= t;
      s.slices.push_back(a);
    }
  }
  return s;
}

}  // namespace

TEST_CASE("adam closed forms") {
  OptimizerState st;
  std::vector<double> p{0.5, -2.0};
  std::vector<double> g{1.0, 0.0};
  adam_step(st, g, p);
  CHECK(st.step == 1);
  CHECK(p[0] == doctest::Approx(0.5 - 1e-3 / (1.0 + 1e-8)).epsilon(1e-14));
  CHECK(p[1] == -2.0);
  const double first = 0.5 - p[0];
  adam_step(st, g, p);
  const double second = (0.5 - first) - p[0];
  CHECK(std::abs(second - first) / first < 0.01);

  OptimizerState z;
  std::vector<double> q{1.0, 2.0, 3.0};
  adam_step(z, std::vector<double>(3, 0.0), q);
  CHECK(q == std::vector<double>{1.0, 2.0, 3.0});
  CHECK_THROWS_AS(adam_step(z, std::vector<double>(2, 0.0), q), ConfigError);
}

TEST_CASE("discriminability loss") {
  const Objective ncc_only{1.0, 0.0};
  SUBCASE("identical slices") {
    auto s = random_stack(1, 8, 1);
    auto one = s.slices;
    for (int k = 0; k < 3; ++k) s.slices.insert(s.slices.end(), one.begin(), one.end());
    s.depths = {1, 2, 3, 4};
    CHECK(discriminability_loss(s, ncc_only).ncc == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("disjoint supports") {
    PSFStack s;
    s.depths = {1, 2, 3};
    for (std::size_t j = 0; j < 3; ++j) {
      for (int c = 0; c < 3; ++c) {
        RealArray a(8, 8);
        a[j * 5 + c] = 1.0;
        s.slices.push_back(a);
      }
    }
    CHECK(discriminability_loss(s, ncc_only).ncc == 0.0);
  }
  SUBCASE("gradient with respect to the psf entries") {
    const auto s = random_stack(3, 6, 4);
    const Objective obj;
    const auto l = discriminability_loss(s, obj, true);
    CHECK(l.total == doctest::Approx(l.ncc + 0.1 * l.concentration));
    const double h = 1e-7;
    for (std::size_t i : {0u, 4u, 8u}) {
      for (std::size_t q : {0u, 7u, 21u}) {
        auto up = s, dn = s;
        up.slices[i][q] += h;
        dn.slices[i][q] -= h;
        const double fd =
            (discriminability_loss(up, obj).total - discriminability_loss(dn, obj).total) / (2 * h);
        CHECK(l.upstream[i][q] == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
  SUBCASE("concentration term is linear") {
    const auto s = random_stack(2, 8, 5);
    const Objective conc{0.0, 1.0};
    const auto a = discriminability_loss(s, conc, true);
    const Objective conc3{0.0, 3.0};
    const auto b = discriminability_loss(s, conc3, true);
    for (std::size_t i = 0; i < a.upstream.size(); ++i) {
      for (std::size_t q = 0; q < a.upstream[i].size(); ++q) {
        CHECK(b.upstream[i][q] == doctest::Approx(3 * a.upstream[i][q]));
      }
    }
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(discriminability_loss(random_stack(1, 4, 1), Objective{}), ConfigError);
    CHECK_THROWS_AS(discriminability_loss(random_stack(2, 4, 1), Objective{0, 0}), ConfigError);
    CHECK_THROWS_AS(discriminability_loss(random_stack(2, 4, 1), Objective{-1, 1}), ConfigError);
  }
}

TEST_CASE("defocus stack is more ambiguous than astigmatism") {
  auto mk = [](OpticalModel m) { return make_preset(Scene::kNyu, m); };
  const Objective obj;
  const double defocus = discriminability_loss(psf_stack(mk(OpticalModel::kDefocus)), obj).ncc;
  const double astig = discriminability_loss(psf_stack(mk(OpticalModel::kAstigmatism)), obj).ncc;
  CHECK(defocus > astig);
}

TEST_CASE("init presets") {
  const auto base = make_preset(Scene::kNyu, OpticalModel::kDefocus);
  const auto a = apply_init(base, InitPreset::kAstigmatism);
  const auto& ff = std::get<FreeformSurface>(a.element);
  CHECK(ff.coeffs[5] == doctest::Approx(1.06e-6));
  CHECK(ff.norm_radius == doctest::Approx(3.125e-3));
  const auto d = apply_init(base, InitPreset::kDefocus);
  for (double c : std::get<FreeformSurface>(d.element).coeffs) CHECK(c == 0.0);
  const auto r = apply_init(base, InitPreset::kAnnular);
  CHECK(std::get<AnnularSurface>(r.element).ring_radii[2] == doctest::Approx(3.125e-3));
  CHECK(parse_init_preset("astigmatism-seeded") == InitPreset::kAstigmatism);
  CHECK(parse_init_preset("defocus") == InitPreset::kDefocus);
  CHECK_THROWS_AS(parse_init_preset("bogus"), ConfigError);
}

TEST_CASE("optimize") {
  auto base = small_nyu(OpticalModel::kDefocus, 64, 3);
  OptimizeOptions opt;
  opt.iterations = 6;
  opt.seed = 42;
  opt.adam.learning_rate = 1e-2;
  opt.snapshot_interval = 2;
  const Objective obj;
  const auto r = optimize(base, obj, InitPreset::kDefocus, opt);
  CHECK(r.history.loss.size() == 6);
  CHECK(r.history.snapshots.size() == 3);
  CHECK(r.best_loss == *std::min_element(r.history.loss.begin(), r.history.loss.end()));
  CHECK(r.best_loss <= r.initial_loss);
  CHECK(r.history.loss[r.best_iteration] == r.best_loss);
  CHECK(element_params(r.best_config.element) == r.best_params);
  CHECK(discriminability_loss(psf_stack(r.best_config), obj).total == r.best_loss);

  const auto again = optimize(base, obj, InitPreset::kDefocus, opt);
  CHECK(again.history.loss == r.history.loss);
  CHECK(again.best_params == r.best_params);

  opt.seed = 43;
  const auto other = optimize(base, obj, InitPreset::kDefocus, opt);
  CHECK(other.best_params != r.best_params);

  SUBCASE("annular") {
    opt.iterations = 3;
    const auto a = optimize(base, obj, InitPreset::kAnnular, opt);
    CHECK(a.best_params.size() == 3);
  }
  SUBCASE("coarse to fine") {
    auto b = small_nyu(OpticalModel::kDefocus, 64, 4);
    opt.iterations = 4;
    opt.coarse_to_fine = true;
    const auto c = optimize(b, obj, InitPreset::kDefocus, opt);
    CHECK(c.history.loss.size() == 4);
    CHECK(c.best_iteration >= 2);
    CHECK(c.best_config.depths.size() == 4);
  }
  SUBCASE("rejects zero iterations") {
    opt.iterations = 0;
    CHECK_THROWS_AS(optimize(base, obj, InitPreset::kDefocus, opt), ConfigError);
  }
  SUBCASE("non-finite state aborts with a snapshot") {
    opt.init_jitter = NAN;
    try {
      optimize(base, obj, InitPreset::kDefocus, opt);
      FAIL("expected abort");
    } catch (const OptimizationAborted& e) {
      CHECK(e.iteration() == 0);
      CHECK(e.params().size() == 36);
    }
  }
}
