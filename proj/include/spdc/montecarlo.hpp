#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spdc/detection.hpp"

namespace spdc {

using Rng = std::mt19937_64;

/// Uniform on [0, 1) from the top 53 bits; identical on every platform,
/// unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Sub-stream seed for the i-th independent stream (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

inline constexpr double kDefaultRepRate = 20000.0;  // pulses per second

struct PulseConfig {
  double tau = 0.0;
  Efficiencies etas;
  Basis basis_a = Basis::hv;
  Basis basis_b = Basis::hv;
  double rep_rate = kDefaultRepRate;
  std::uint64_t seed = 1;
  /// Fraction of pulses drawn from the distinguishable-pairs model.
  double background_weight = 0.0;
  /// Truncation tolerance for the sampling tables; non-positive selects the
  /// default for tau.
  double tail_tol = 0.0;

  void validate() const;
};

/// One line of the count schema. `pattern` is either a single detector name
/// ("ah", ...) counting pulses where it fired, or a 4-char exact firing mask.
struct CountRow {
  double pulse_energy_uJ = 0.0;
  Basis basis_a = Basis::hv;
  Basis basis_b = Basis::hv;
  std::string pattern;
  std::int64_t counts = 0;
  std::int64_t n_pulses = 0;
};

struct CountDataset {
  std::vector<CountRow> rows;
};

/// Aggregated exact-pattern counts of a batch of pulses.
struct PatternCounts {
  std::array<std::int64_t, 16> counts{};
  std::int64_t n_pulses = 0;

  std::int64_t detector_fired(int detector) const;
};

/// Inverse-CDF sampler for P(n) = (n+1)(1-x)^2 x^n, tabulated to n_max.
/// Draws landing in the tabulated tail return n_max.
class PairNumberSampler {
 public:
  PairNumberSampler(double tau, int n_max);
  int operator()(Rng& rng) const;
  int n_max() const { return static_cast<int>(cdf_.size()) - 1; }

 private:
  std::vector<double> cdf_;
};

/// Side occupations (a_h, a_v, b_h, b_v) of one pulse.
using Occupation = std::array<int, 4>;

/// Categorical draw of (m_a, m_b) with probability weights(m_a, m_b) / sum.
std::pair<int, int> sample_occupation(const Eigen::MatrixXd& weights, Rng& rng);

/// Occupation tuple of block index (m_a, m_b) in an n-pair block.
inline Occupation occupation_of(int n, int m_a, int m_b) { return {n - m_a, m_a, m_b, n - m_b}; }

/// Per-pulse sampler of the ideal down-conversion output in the analysis
/// bases. Given n, side a's block index is uniform (its reduced state is
/// maximally mixed in every basis) and side b's follows column m_a of
/// |D_h(U_b U_a^+)|^2; this is the exact |B_n[m_a][m_b]|^2 law of the rotated
/// state. Column tables are built lazily as larger n are drawn.
class PdcPulseSampler {
 public:
  PdcPulseSampler(double tau, int n_max, const PolarizationRotation& ua,
                  const PolarizationRotation& ub);

  Occupation operator()(Rng& rng);

 private:
  void extend_to(int n);

  PairNumberSampler pairs_;
  bool diagonal_;
  SymmetricPowerSequence<double> relative_;
  // cdf_[n](m_b, m_a) = P(side b index <= m_b | m_a)
  std::vector<Eigen::MatrixXf> cdf_;
};

/// Per-pulse sampler of the distinguishable-pairs model.
class AnsatzPulseSampler {
 public:
  AnsatzPulseSampler(double tau, int n_max, const PolarizationRotation& ua,
                     const PolarizationRotation& ub);

  Occupation operator()(Rng& rng) const;

 private:
  PairNumberSampler pairs_;
  std::array<double, 4> outcome_cdf_{};  // (h,h), (h,v), (v,h), (v,v)
};

/// Threshold detection of one occupation: each photon of mode i survives with
/// probability eta_i and any survivor fires that detector.
ClickPattern detect(const Occupation& occ, const Efficiencies& etas, Rng& rng);

/// Pulse-by-pulse simulation with a single deterministic stream.
PatternCounts simulate_pulses(const PulseConfig& config, std::int64_t n_pulses);

/// Rows (4 singles and 16 exact masks) for counts recorded at one energy.
std::vector<CountRow> count_rows(const PatternCounts& counts, double pulse_energy_uJ, Basis a,
                                 Basis b);

struct SynthesisOptions {
  std::vector<std::pair<Basis, Basis>> basis_pairs = {{Basis::hv, Basis::hv}};
  double background_weight = 0.0;
  double tail_tol = 0.0;
};

/// Counts at each pump energy with tau = tau_max sqrt(E / E_max), E_max the
/// largest energy. Each (energy, basis pair) uses its own derived stream.
CountDataset synthesize_dataset(double tau_max, const Efficiencies& etas,
                                const std::vector<double>& energies, std::int64_t n_pulses,
                                std::uint64_t seed, const SynthesisOptions& options = {});

/// Fan-out arrangement (see FanoutProbs): counts of three- and four-fold
/// events over n_pulses.
struct FanoutCounts {
  std::int64_t three_fold = 0;
  std::int64_t four_fold = 0;
  std::int64_t n_pulses = 0;
};

FanoutCounts simulate_fanout(double tau, double eta_a, double eta_b, std::int64_t n_pulses,
                             std::uint64_t seed);

}  // namespace spdc
