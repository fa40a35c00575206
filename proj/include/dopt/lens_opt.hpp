#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dopt/adjoint.hpp"
#include "dopt/error.hpp"
#include "dopt/optics.hpp"

namespace dopt {

/// Weights of the depth-discriminability proxy objective.
struct Objective {
  double ncc_weight = 1.0;
  double concentration_weight = 0.1;

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double ncc = 0.0;            // mean pairwise cosine similarity across depths
  double concentration = 0.0;  // mean normalized second moment
  std::vector<RealArray> upstream;  // dL/dPSF per slice (j * 3 + c), if requested
};

/// L = w_c mean_{c, j<j'} NCC(P_jc, P_j'c) + w_s mean_{j,c} M2(P_jc), where
/// M2 = sum_q P_q |q - center|^2 / (P/2)^2. Lower means distinct, compact PSFs.
LossBreakdown discriminability_loss(const PSFStack& stack, const Objective& objective,
                                    bool with_gradient = false);

struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::size_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
  AdamSettings settings;
};

/// Bias-corrected Adam update of params in place.
void adam_step(OptimizerState& state, std::span<const double> grad, std::span<double> params);

enum class InitPreset { kDefocus, kAstigmatism, kAnnular };

InitPreset parse_init_preset(const std::string& name);
std::string to_string(InitPreset init);

/// Attaches the element an init preset starts from (zero freeform, freeform
/// with the astigmatism seed, or zero annular rings) to the base config.
OpticalConfig apply_init(const OpticalConfig& base, InitPreset init);

struct OptimizeOptions {
  std::size_t iterations = 500;
  std::uint64_t seed = 0;
  AdamSettings adam;
  double param_scale = 1e-6;    // optimizer works in units of this many meters of sag
  double init_jitter = 5e-9;    // uniform +- jitter (meters) added to the initial params
  std::size_t snapshot_interval = 50;
  bool coarse_to_fine = false;  // first half at J/2 depth bins
};

struct RunHistory {
  std::vector<double> loss;
  std::vector<double> ncc;
  std::vector<double> concentration;
  std::vector<std::pair<std::size_t, std::vector<double>>> snapshots;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

struct OptimizeResult {
  OpticalConfig initial_config;
  OpticalConfig best_config;
  std::vector<double> best_params;
  double initial_loss = 0.0;
  double best_loss = 0.0;
  std::size_t best_iteration = 0;
  RunHistory history;
};

class OptimizationAborted : public NumericalError {
public:
  OptimizationAborted(const std::string& what, std::size_t iteration, std::vector<double> params,
                      OptimizerState state)
      : NumericalError(what), iteration_(iteration), params_(std::move(params)),
        state_(std::move(state)) {}

  std::size_t iteration() const { return iteration_; }
  const std::vector<double>& params() const { return params_; }
  const OptimizerState& state() const { return state_; }

private:
  std::size_t iteration_;
  std::vector<double> params_;
  OptimizerState state_;
};

/// Loss and parameter gradient of the proxy objective at a config.
struct ObjectiveEvaluation {
  LossBreakdown loss;
  ParamGradient grad;
};
ObjectiveEvaluation evaluate_objective(const OpticalConfig& config, const Objective& objective);

/// Adam on the element parameters. Returns the best-loss iterate.
OptimizeResult optimize(const OpticalConfig& base, const Objective& objective, InitPreset init,
                        const OptimizeOptions& options);

}  // namespace dopt
