#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spdc/detection.hpp"

namespace spdc {

using BasisPair = std::pair<Basis, Basis>;
using NineBasisProbs = std::map<BasisPair, SubspaceProbs>;

/// One-pair visibilities V[X][Y], X analysing side a and Y side b.
struct VisibilitySet {
  std::array<std::array<double, 3>, 3> v{};

  double operator()(Basis a, Basis b) const {
    return v[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  }
  double& operator()(Basis a, Basis b) {
    return v[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  }

  static VisibilitySet from(const NineBasisProbs& probs);
};

/// Linear-inversion estimate over {|hh>, |hv>, |vh>, |vv>}.
struct DensityMatrix {
  Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
  /// Data-quality notes (inconsistent normalizations, redundant single-side
  /// estimates that disagree). Empty for exact model input.
  std::vector<std::string> warnings;

  double min_eigenvalue() const;
};

struct CriteriaResult {
  /// Absent when its denominator vanishes (fully dephased input).
  std::optional<double> c1;
  double c2 = 0.0;
  double min_pt_eigenvalue = 0.0;
  double total_spin_correlation = 0.0;
  bool entangled_by_c1 = false;
  bool entangled_by_c2 = false;
  bool entangled_by_ppt = false;
  /// min_pt_eigenvalue in [-tol, 0]
  bool ppt_boundary = false;
};

inline constexpr double kPptTolerance = 1e-10;

/// (P_anti - P_corr) / (P_anti + P_corr), anti = {hv, vh} outcome pairs.
double visibility(const SubspaceProbs& probs);

/// p_hv + p_vh - p_hh - p_vv = -<sigma_z x sigma_z> for same-basis inputs.
double visibility_as_spin_correlation(const SubspaceProbs& probs);

/// -(V_pm,pm + V_rl,rl + V_hv,hv)
double total_spin_correlation(const VisibilitySet& vis);

/// |V_pm,pm + V_rl,rl + V_hv,hv|; separable states stay <= 1.
double c2(const VisibilitySet& vis);

/// 16 p_hh p_vv / ((V_pm,pm + V_rl,rl)^2 + (V_pm,rl - V_rl,pm)^2); values
/// below 1 reveal a negative partial transpose of the six-term matrix.
double c1(const SubspaceProbs& probs_hvhv, const VisibilitySet& vis);

/// Pauli operator of a basis's +-1 outcome assignment (h,p,r -> +1).
Eigen::Matrix2cd basis_observable(Basis b);

/// Linear inversion from the nine basis-pair subspace probabilities.
DensityMatrix tomography(const NineBasisProbs& probs);

/// Smallest eigenvalue of rho with the second qubit transposed.
double partial_transpose_min_eigenvalue(const Eigen::Matrix4cd& rho);
Eigen::Vector4d partial_transpose_spectrum(const Eigen::Matrix4cd& rho);
Eigen::Matrix4cd partial_transpose(const Eigen::Matrix4cd& rho);

/// Exact normalized subspace probabilities a two-qubit rho produces in the
/// given analysis bases.
SubspaceProbs subspace_probs_from_density(const Eigen::Matrix4cd& rho, Basis a, Basis b);
NineBasisProbs nine_basis_probs_from_density(const Eigen::Matrix4cd& rho);

/// Tomography, partial transpose and both criteria from one data set.
CriteriaResult evaluate_criteria(const NineBasisProbs& probs);

/// Nine-basis probabilities of the ideal state via the fast exact route.
NineBasisProbs pdc_nine_basis_probs(double tau, int n_max, const Efficiencies& etas);

}  // namespace spdc
