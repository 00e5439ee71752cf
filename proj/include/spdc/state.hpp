#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "spdc/error.hpp"

namespace spdc {

/// Named polarization analysis bases. The first outcome of each basis
/// (h, p, r) is the "h-like" one.
enum class Basis { hv, pm, rl };

inline constexpr Basis kAllBases[] = {Basis::hv, Basis::pm, Basis::rl};

std::string_view to_string(Basis b);
Basis parse_basis(std::string_view name);

/// Interaction strength of one pump pulse. Built either directly from tau
/// or from the pump mapping tau = tau_max * sqrt(E / E_max).
struct InteractionParams {
  double tau = 0.0;
  double tau_max = 0.0;
  double pulse_energy = 0.0;  // uJ
  double max_energy = 1.0;    // uJ

  static InteractionParams from_pump(double tau_max, double pulse_energy,
                                     double max_energy);
};

/// 2x2 unitary acting on the (h, v) modes of one spatial mode.
///
/// Rows are the bras of the analysis basis, so single-photon amplitudes
/// transform as psi' = U psi and creation operators map as
/// h^+ -> U(0,0) h'^+ + U(1,0) v'^+, v^+ -> U(0,1) h'^+ + U(1,1) v'^+.
///   PM: p = (h + v)/sqrt2, m = (h - v)/sqrt2
///   RL: r = (h + i v)/sqrt2, l = (h - i v)/sqrt2
/// With this convention the +-1 observable of each basis is U^+ sigma_z U:
/// sigma_z for hv, sigma_x for pm, sigma_y for rl.
class PolarizationRotation {
 public:
  explicit PolarizationRotation(const Eigen::Matrix2cd& u,
                                std::optional<Basis> label = std::nullopt);

  static PolarizationRotation hv();
  static PolarizationRotation pm();
  static PolarizationRotation rl();
  static PolarizationRotation of(Basis b);

  const Eigen::Matrix2cd& matrix() const { return u_; }
  std::optional<Basis> label() const { return label_; }

 private:
  Eigen::Matrix2cd u_;
  std::optional<Basis> label_;
};

/// Truncated block-Fock representation of a two-mode polarization state with
/// equal photon number n on each side. Block n is (n+1)x(n+1) and entry
/// (m_a, m_b) is the amplitude of
///   |n-m_a>_{a_h} |m_a>_{a_v} |m_b>_{b_h} |n-m_b>_{b_v}.
class PairBlockState {
 public:
  PairBlockState(std::vector<Eigen::MatrixXcd> blocks, double tail_mass);

  int n_max() const { return static_cast<int>(blocks_.size()) - 1; }
  const Eigen::MatrixXcd& block(int n) const { return blocks_.at(static_cast<std::size_t>(n)); }
  const std::vector<Eigen::MatrixXcd>& blocks() const { return blocks_; }

  /// Upper bound on the probability carried by blocks n > n_max.
  double tail_mass() const { return tail_mass_; }

  double squared_norm() const;
  double block_squared_norm(int n) const { return block(n).squaredNorm(); }

 private:
  std::vector<Eigen::MatrixXcd> blocks_;
  double tail_mass_;
};

inline constexpr int kDefaultNmaxCap = 2000;

/// tanh^2(tau); the geometric ratio of the pair-number distribution.
double pair_ratio(double tau);

/// P(n) = (n+1) (1-x)^2 x^n evaluated in log space.
double pair_number_probability(double tau, int n);

/// Exact probability beyond truncation n_max:
/// sum_{n>N} (n+1)(1-x)^2 x^n = x^{N+1} ((N+2)(1-x) + x).
double truncation_tail(double tau, int n_max);

/// 1e-9 for tau <= 1.5, 1e-6 above.
double default_tail_tol(double tau);

/// Smallest N whose truncation tail is <= tail_tol.
/// Throws NumericInfeasible when N would exceed cap.
int select_n_max(double tau, double tail_tol, int cap = kDefaultNmaxCap);

/// The stimulated down-conversion output state truncated at n_max.
PairBlockState build_pdc_state(double tau, int n_max);

/// Diagonal amplitude magnitude tanh^n(tau)/cosh^2(tau) of block n.
double pdc_amplitude(double tau, int n);

/// Average pair number 2 sinh^2(tau).
double mean_pairs(double tau);

/// Generates D(0), D(1), ... the symmetric-power (n-photon) representations
/// of a 2x2 unitary. Index k of D(n) counts v photons of the n-photon Fock
/// state |n-k>_h |k>_v, so D(1) equals the input matrix.
///
/// Each step compresses D(n) x U onto the symmetric (n+1)-photon subspace,
/// D(n+1) = E^T (D(n) x U) E with E the isometric embedding that splits off
/// the last photon. Compression by an isometry cannot amplify rounding error.
template <typename Scalar = double>
class SymmetricPowerSequence {
 public:
  using Complex = std::complex<Scalar>;
  using Matrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;

  explicit SymmetricPowerSequence(const Eigen::Matrix<Complex, 2, 2>& u)
      : u_(u), current_(Matrix::Ones(1, 1)) {}

  int n() const { return n_; }
  const Matrix& current() const { return current_; }

  /// Advances to D(n+1) and returns it.
  const Matrix& next() {
    const int np1 = n_ + 1;
    // |np1-k, k> = eh(k) |n-k, k> x |h> + ev(k) |np1-k, k-1> x |v>
    std::vector<Scalar> eh(static_cast<std::size_t>(np1) + 1), ev(eh.size());
    for (int k = 0; k <= np1; ++k) {
      eh[k] = std::sqrt(static_cast<Scalar>(np1 - k) / np1);
      ev[k] = std::sqrt(static_cast<Scalar>(k) / np1);
    }
    Matrix out(np1 + 1, np1 + 1);
    for (int k = 0; k <= np1; ++k) {
      for (int j = 0; j <= np1; ++j) {
        Complex s(0);
        if (j < np1 && k < np1) s += eh[j] * eh[k] * u_(0, 0) * current_(j, k);
        if (j < np1 && k > 0) s += eh[j] * ev[k] * u_(0, 1) * current_(j, k - 1);
        if (j > 0 && k < np1) s += ev[j] * eh[k] * u_(1, 0) * current_(j - 1, k);
        if (j > 0 && k > 0) s += ev[j] * ev[k] * u_(1, 1) * current_(j - 1, k - 1);
        out(j, k) = s;
      }
    }
    current_ = std::move(out);
    n_ = np1;
    return current_;
  }

 private:
  Eigen::Matrix<Complex, 2, 2> u_;
  Matrix current_;
  int n_ = 0;
};

/// D(n) for unitary u, indexed by v-photon count.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
symmetric_power(const Eigen::MatrixBase<Derived>& u, int n) {
  using Complex = typename Derived::Scalar;
  SymmetricPowerSequence<typename Complex::value_type> seq(u.template cast<Complex>());
  while (seq.n() < n) seq.next();
  return seq.current();
}

/// Per-side basis change: B_n -> D_v(U_a) B_n D_h(U_b)^T, where D_h is D
/// re-indexed by h-photon count (side b's block index).
PairBlockState rotate(const PairBlockState& state, const PolarizationRotation& ua,
                      const PolarizationRotation& ub);

}  // namespace spdc
