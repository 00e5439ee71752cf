#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spdc/montecarlo.hpp"

namespace spdc {

/// Parameters of the count model: tau_max and the four efficiencies.
struct ModelParams {
  double tau_max = 1.0;
  Efficiencies etas = Efficiencies::uniform(0.05);
};

struct FitResult {
  double tau_max = 0.0;
  Efficiencies etas;
  double tau_max_err = 0.0;
  std::array<double, 4> eta_err{};
  /// Poisson-weighted sum of squares at the optimum.
  double residual = 0.0;
  int n_points = 0;
  bool converged = false;
  int iterations = 0;
  /// Condition number of the Gauss-Newton Hessian in fit coordinates.
  double hessian_condition = 0.0;
  /// Objective after every accepted step (simplex best vertex, then refinement).
  std::vector<double> objective_trace;
  std::string weighting = "poisson: (counts - n_pulses*p)^2 / max(counts, 1)";
};

/// Which click event a row counts: a single detector or an exact mask.
struct RatePattern {
  bool single = false;
  int detector = 0;
  ClickPattern mask = 0;

  static RatePattern parse(std::string_view name);
};

/// Expected fraction of pulses showing `pattern` at pump energy `energy`.
/// Singles use the single-detector closed form; same-basis masks use the
/// untruncated generating-function distribution; mixed-basis masks use the
/// exact block model.
double predict_rate(double tau_max, const Efficiencies& etas, double energy, double max_energy,
                    const RatePattern& pattern, Basis a = Basis::hv, Basis b = Basis::hv);

struct FitOptions {
  int max_simplex_iterations = 4000;
  int max_refine_iterations = 100;
  double simplex_tolerance = 1e-12;
  bool refine = true;
};

/// Heuristic start point: eta tau_max^2 from the low-energy slope of the
/// single rates, tau_max from their curvature toward saturation.
ModelParams initial_guess(const CountDataset& data);

/// Weighted least squares over (log tau_max, logit eta_i).
FitResult fit(const CountDataset& data, const std::optional<ModelParams>& guess = std::nullopt,
              const FitOptions& options = {});

/// Poisson-weighted objective of the given parameters.
double fit_objective(const CountDataset& data, const ModelParams& params);

}  // namespace spdc
