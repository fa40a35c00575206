#include "dopt/lens_opt.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "dopt/formation.hpp"
#include "dopt/rng.hpp"

namespace dopt {
namespace {

constexpr std::size_t kC = PSFStack::kChannels;

double norm2(const RealArray& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

double dot(const RealArray& a, const RealArray& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

void Objective::validate() const {
  if (!(ncc_weight >= 0.0) || !(concentration_weight >= 0.0)) {
    throw ConfigError("objective weights must be non-negative");
  }
  if (!(ncc_weight > 0.0 || concentration_weight > 0.0)) {
    throw ConfigError("at least one objective weight must be positive");
  }
}

LossBreakdown discriminability_loss(const PSFStack& stack, const Objective& objective,
                                    bool with_gradient) {
  objective.validate();
  const std::size_t J = stack.depth_count();
  if (J < 2) throw ConfigError("discriminability loss needs at least two depth bins");
  const std::size_t p = stack.slices.front().rows();

  LossBreakdown out;
  if (with_gradient) out.upstream.assign(J * kC, RealArray(p, p));

  // second-moment weights r^2 / (P/2)^2 about the PSF center
  RealArray moment(p, p);
  const double half = static_cast<double>(p / 2);
  for (std::size_t r = 0; r < p; ++r) {
    for (std::size_t c = 0; c < p; ++c) {
      const double dy = static_cast<double>(r) - half;
      const double dx = static_cast<double>(c) - half;
      moment(r, c) = (dx * dx + dy * dy) / (half * half);
    }
  }

  const double pair_count = static_cast<double>(kC * J * (J - 1) / 2);
  const double ncc_scale = objective.ncc_weight / pair_count;
  std::vector<double> norms(J * kC);
  for (std::size_t i = 0; i < norms.size(); ++i) norms[i] = std::sqrt(norm2(stack.slices[i]));

  double ncc_sum = 0.0;
  for (std::size_t c = 0; c < kC; ++c) {
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t k = j + 1; k < J; ++k) {
        const RealArray& a = stack.at(j, c);
        const RealArray& b = stack.at(k, c);
        const double na = norms[j * kC + c];
        const double nb = norms[k * kC + c];
        const double ncc = dot(a, b) / (na * nb);
        ncc_sum += ncc;
        if (!with_gradient || ncc_scale == 0.0) continue;
        RealArray& ga = out.upstream[j * kC + c];
        RealArray& gb = out.upstream[k * kC + c];
        for (std::size_t q = 0; q < a.size(); ++q) {
          ga[q] += ncc_scale * (b[q] / (na * nb) - ncc * a[q] / (na * na));
          gb[q] += ncc_scale * (a[q] / (na * nb) - ncc * b[q] / (nb * nb));
        }
      }
    }
  }
  out.ncc = ncc_sum / pair_count;

  const double conc_scale = objective.concentration_weight / static_cast<double>(J * kC);
  double conc_sum = 0.0;
  for (std::size_t i = 0; i < J * kC; ++i) {
    conc_sum += dot(stack.slices[i], moment);
    if (with_gradient && conc_scale != 0.0) {
      RealArray& g = out.upstream[i];
      for (std::size_t q = 0; q < g.size(); ++q) g[q] += conc_scale * moment[q];
    }
  }
  out.concentration = conc_sum / static_cast<double>(J * kC);
  out.total = objective.ncc_weight * out.ncc + objective.concentration_weight * out.concentration;
  return out;
}

void adam_step(OptimizerState& state, std::span<const double> grad, std::span<double> params) {
  if (grad.size() != params.size()) throw ConfigError("gradient and parameter sizes differ");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw ConfigError("optimizer state size mismatch");
  const AdamSettings& s = state.settings;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = s.beta1 * state.m[i] + (1.0 - s.beta1) * grad[i];
    state.v[i] = s.beta2 * state.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

InitPreset parse_init_preset(const std::string& name) {
  if (name == "defocus" || name == "defocus-only") return InitPreset::kDefocus;
  if (name == "astigmatism" || name == "astigmatism-seeded") return InitPreset::kAstigmatism;
  if (name == "annular") return InitPreset::kAnnular;
  throw ConfigError("unknown init preset '" + name +
                    "' (expected defocus, astigmatism or annular)");
}

std::string to_string(InitPreset init) {
  switch (init) {
    case InitPreset::kDefocus:
      return "defocus";
    case InitPreset::kAstigmatism:
      return "astigmatism";
    case InitPreset::kAnnular:
      return "annular";
  }
  return "unknown";
}

OpticalConfig apply_init(const OpticalConfig& base, InitPreset init) {
  OpticalConfig cfg = base;
  const double radius = 0.5 * cfg.lens.aperture_diameter;
  if (init == InitPreset::kAnnular) {
    cfg.element = AnnularSurface::equal_area(radius, cfg.lens.dispersion);
    return cfg;
  }
  FreeformSurface ff;
  ff.norm_radius = radius;
  ff.material = cfg.lens.dispersion;
  if (init == InitPreset::kAstigmatism) {
    ff.coeffs[5] = 2.0 * cfg.lens.dispersion.design_wavelength;  // Noll 6
  }
  cfg.element = ff;
  return cfg;
}

ObjectiveEvaluation evaluate_objective(const OpticalConfig& config, const Objective& objective) {
  ObjectiveEvaluation ev;
  StackTape tape = taped_psf_stack(config);
  ev.loss = discriminability_loss(tape.stack, objective, true);
  ev.grad = grad_stack(tape, ev.loss.upstream);
  ev.grad.loss = ev.loss.total;
  return ev;
}

OptimizeResult optimize(const OpticalConfig& base, const Objective& objective, InitPreset init,
                        const OptimizeOptions& options) {
  if (options.iterations < 1) throw ConfigError("optimize needs at least one iteration");
  if (!(options.param_scale > 0.0)) throw ConfigError("param_scale must be positive");
  objective.validate();
  const auto t0 = std::chrono::steady_clock::now();

  OptimizeResult result;
  OpticalConfig cfg = apply_init(base, init);
  std::vector<double> params = element_params(cfg.element);
  SplitMix64 rng(options.seed);
  for (auto& p : params) p += options.init_jitter * (2.0 * rng.uniform() - 1.0);
  cfg.element = with_element_params(cfg.element, params);
  cfg.validate();
  result.initial_config = cfg;

  OpticalConfig coarse = cfg;
  const bool staged = options.coarse_to_fine && cfg.depth_range && cfg.depth_range->count >= 4;
  if (staged) {
    DepthRange r = *cfg.depth_range;
    r.count /= 2;
    coarse.depth_range = r;
    coarse.depths = depth_bins(r.near, r.far, r.count).centers;
  }

  // optimizer coordinates x = params / scale
  const double scale = options.param_scale;
  std::vector<double> x(params.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = params[i] / scale;

  OptimizerState state;
  state.settings = options.adam;
  result.history.seed = options.seed;
  result.best_loss = std::numeric_limits<double>::infinity();

  std::vector<double> g(x.size());
  for (std::size_t it = 0; it < options.iterations; ++it) {
    const bool use_coarse = staged && it < options.iterations / 2;
    OpticalConfig current = use_coarse ? coarse : cfg;
    for (std::size_t i = 0; i < x.size(); ++i) params[i] = x[i] * scale;
    current.element = with_element_params(current.element, params);

    ObjectiveEvaluation ev;
    try {
      ev = evaluate_objective(current, objective);
    } catch (const NumericalError& e) {
      throw OptimizationAborted(std::string(e.what()) + " at iteration " + std::to_string(it), it,
                                params, state);
    }
    if (!std::isfinite(ev.loss.total) || !all_finite(ev.grad.values)) {
      throw OptimizationAborted("non-finite loss or gradient at iteration " + std::to_string(it),
                                it, params, state);
    }
    if (it == 0) {
      result.initial_loss =
          use_coarse ? discriminability_loss(psf_stack(cfg), objective).total : ev.loss.total;
    }
    result.history.loss.push_back(ev.loss.total);
    result.history.ncc.push_back(ev.loss.ncc);
    result.history.concentration.push_back(ev.loss.concentration);
    if (options.snapshot_interval > 0 && it % options.snapshot_interval == 0) {
      result.history.snapshots.emplace_back(it, params);
    }
    // coarse-stage iterates use a different J and never compete for best
    if (!use_coarse && ev.loss.total < result.best_loss) {
      result.best_loss = ev.loss.total;
      result.best_params = params;
      result.best_iteration = it;
    }
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = ev.grad.values[i] * scale;
    adam_step(state, g, x);
  }
  result.best_config = cfg;
  result.best_config.element = with_element_params(cfg.element, result.best_params);
  result.history.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace dopt
