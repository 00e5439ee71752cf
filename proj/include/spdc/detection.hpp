#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "spdc/state.hpp"

namespace spdc {

/// Detector order used everywhere: a_h, a_v, b_h, b_v.
enum Detector : int { kAh = 0, kAv = 1, kBh = 2, kBv = 3 };

inline constexpr std::array<std::string_view, 4> kDetectorNames = {"ah", "av", "bh", "bv"};

/// Collection efficiency of each threshold detector.
struct Efficiencies {
  double ah = 0.0;
  double av = 0.0;
  double bh = 0.0;
  double bv = 0.0;

  static Efficiencies uniform(double eta) { return {eta, eta, eta, eta}; }

  std::array<double, 4> as_array() const { return {ah, av, bh, bv}; }
  static Efficiencies from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }
  double operator[](int detector) const { return as_array()[static_cast<std::size_t>(detector)]; }

  /// Throws ConfigError unless every entry is in [0, 1].
  void validate() const;
};

/// Firing set of the four detectors, bit i set when detector i fires.
using ClickPattern = std::uint8_t;

inline constexpr bool fires(ClickPattern p, int detector) { return (p >> detector) & 1U; }

/// "1001" style mask ordered (a_h, a_v, b_h, b_v).
std::string pattern_mask(ClickPattern p);
ClickPattern parse_pattern_mask(std::string_view mask);

inline constexpr ClickPattern kPatternHH = 0b0101;  // a_h, b_h
inline constexpr ClickPattern kPatternHV = 0b1001;  // a_h, b_v
inline constexpr ClickPattern kPatternVH = 0b0110;  // a_v, b_h
inline constexpr ClickPattern kPatternVV = 0b1010;  // a_v, b_v

/// Exact probability of every firing pattern for one pulse.
struct ClickDistribution {
  std::array<double, 16> prob{};
  double tail_mass = 0.0;

  double operator[](ClickPattern p) const { return prob[p]; }
  double total() const;
  /// Probability that the given detector fires.
  double marginal(int detector) const;
};

/// Exactly-one-click-per-side probabilities for one pair of analysis bases.
struct SubspaceProbs {
  Basis basis_a = Basis::hv;
  Basis basis_b = Basis::hv;
  double P_hh = 0.0, P_hv = 0.0, P_vh = 0.0, P_vv = 0.0;
  double P_11 = 0.0;
  double p_hh = 0.0, p_hv = 0.0, p_vh = 0.0, p_vv = 0.0;

  /// Fills P_11 and the normalized values. Throws EmptySubspace if P_11 = 0.
  static SubspaceProbs from_unnormalized(Basis a, Basis b, double hh, double hv, double vh,
                                         double vv);
};

/// 1 - (1 - eta)^m.
double click_probability_single(int m, double eta);

/// Pattern distribution of the state as stored (no basis change).
ClickDistribution click_distribution(const PairBlockState& state, const Efficiencies& etas);

/// Pattern distribution after analysing side a in ua and side b in ub.
/// Rotates block by block without materializing the rotated state.
ClickDistribution click_distribution(const PairBlockState& state, const Efficiencies& etas,
                                     const PolarizationRotation& ua,
                                     const PolarizationRotation& ub);

/// Same quantity for the ideal down-conversion state, using joint-rotation
/// invariance: the rotated block weights are |c_n|^2 |D_h(U_b U_a^+)[m_b][m_a]|^2.
ClickDistribution pdc_click_distribution(double tau, int n_max, const Efficiencies& etas,
                                         const PolarizationRotation& ua,
                                         const PolarizationRotation& ub);

/// Untruncated same-basis distribution of the ideal state from the
/// generating function P(silent set S) = (1-x)^2 / ((1 - x alpha_S)(1 - x beta_S)).
ClickDistribution pdc_click_distribution_closed(double tau, const Efficiencies& etas);

/// eta tanh^2 / (1 - (1 - eta) tanh^2).
double single_detector_prob_closed(double tau, double eta);

/// Probability of the exact firing set from silent-set probabilities by
/// inclusion-exclusion; silent(S) must return P(all detectors in S silent).
template <typename SilentFn>
ClickDistribution from_silent_sets(SilentFn&& silent) {
  std::array<double, 16> g{};
  for (unsigned s = 0; s < 16; ++s) g[s] = silent(static_cast<std::uint8_t>(s));
  ClickDistribution d;
  for (unsigned f = 0; f < 16; ++f) {
    const unsigned complement = 15U & ~f;
    double p = 0.0;
    // subsets T of the firing set: (-1)^|T| P(complement u T silent)
    for (unsigned t = f;; t = (t - 1) & f) {
      const int sign = (__builtin_popcount(t) % 2 == 0) ? 1 : -1;
      p += sign * g[complement | t];
      if (t == 0) break;
    }
    d.prob[f] = p;
  }
  return d;
}

SubspaceProbs subspace_probs(const ClickDistribution& dist, Basis a, Basis b);

SubspaceProbs subspace_probs(const PairBlockState& state, const Efficiencies& etas,
                             const PolarizationRotation& ua, const PolarizationRotation& ub);

/// Multi-click coincidences ((2,1), (1,2) and (2,2) click subspaces: both
/// sides fire and at least three detectors fire) relative to P_11.
double subspace_ratio(const ClickDistribution& dist);
double subspace_ratio(const PairBlockState& state, const Efficiencies& etas);

/// Pattern distribution of the distinguishable-pairs model: n independent
/// singlets with the down-conversion pair-number law, each photon surviving
/// independently.
ClickDistribution ansatz_click_distribution(double tau, const Efficiencies& etas,
                                            const PolarizationRotation& ua,
                                            const PolarizationRotation& ub);

/// One-pair (same-basis) visibility of the distinguishable-pairs model.
double ansatz_visibility(double tau, double eta);

/// Joint outcome probabilities |<i j|U_a x U_b|psi->|^2 for a single singlet
/// pair, i indexing side a's outcome (0 = h-like), j side b's.
Eigen::Matrix2d singlet_outcome_probs(const PolarizationRotation& ua,
                                      const PolarizationRotation& ub);

/// Events of the beam-splitter fan-out arrangement: only the h mode of each
/// side is kept and split 50/50 onto two threshold detectors.
struct FanoutProbs {
  double three_fold = 0.0;  // a_h1, a_h2, b_h1 fire
  double four_fold = 0.0;   // a_h1, a_h2, b_h1, b_h2 fire
};

FanoutProbs fanout_probs_closed(double tau, double eta_a, double eta_b);

}  // namespace spdc
