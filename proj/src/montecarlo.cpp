#include "spdc/montecarlo.hpp"

#include <algorithm>
#include <cmath>

namespace spdc {

namespace {

int truncation_for(double tau, double tail_tol) {
  return select_n_max(tau, tail_tol > 0.0 ? tail_tol : default_tail_tol(tau));
}

template <typename It>
int search(It begin, It end, double u) {
  const auto it = std::upper_bound(begin, end, u);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - begin, (end - begin) - 1));
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void PulseConfig::validate() const {
  if (!(tau >= 0.0)) throw ConfigError("tau must be non-negative");
  etas.validate();
  if (!(rep_rate > 0.0)) throw ConfigError("rep_rate must be positive");
  if (!(background_weight >= 0.0 && background_weight <= 1.0)) {
    throw ConfigError("background weight must lie in [0, 1]");
  }
}

std::int64_t PatternCounts::detector_fired(int detector) const {
  std::int64_t s = 0;
  for (unsigned p = 0; p < 16; ++p) {
    if (fires(static_cast<ClickPattern>(p), detector)) s += counts[p];
  }
  return s;
}

PairNumberSampler::PairNumberSampler(double tau, int n_max) {
  cdf_.resize(static_cast<std::size_t>(n_max) + 1);
  double acc = 0.0;
  for (int n = 0; n <= n_max; ++n) {
    acc += pair_number_probability(tau, n);
    cdf_[static_cast<std::size_t>(n)] = acc;
  }
}

int PairNumberSampler::operator()(Rng& rng) const {
  return search(cdf_.begin(), cdf_.end(), uniform01(rng));
}

std::pair<int, int> sample_occupation(const Eigen::MatrixXd& weights, Rng& rng) {
  const double total = weights.sum();
  if (!(total > 0.0)) throw ConfigError("occupation weights must have positive mass");
  double u = uniform01(rng) * total;
  for (Eigen::Index ma = 0; ma < weights.rows(); ++ma) {
    for (Eigen::Index mb = 0; mb < weights.cols(); ++mb) {
      u -= weights(ma, mb);
      if (u < 0.0) return {static_cast<int>(ma), static_cast<int>(mb)};
    }
  }
  // rounding: return the last entry with positive weight
  for (Eigen::Index k = weights.size() - 1; k >= 0; --k) {
    const Eigen::Index ma = k / weights.cols(), mb = k % weights.cols();
    if (weights(ma, mb) > 0.0) return {static_cast<int>(ma), static_cast<int>(mb)};
  }
  return {0, 0};
}

PdcPulseSampler::PdcPulseSampler(double tau, int n_max, const PolarizationRotation& ua,
                                 const PolarizationRotation& ub)
    : pairs_(tau, n_max), relative_(ub.matrix() * ua.matrix().adjoint()) {
  const Eigen::Matrix2cd w = ub.matrix() * ua.matrix().adjoint();
  diagonal_ = std::abs(w(0, 1)) < 1e-15 && std::abs(w(1, 0)) < 1e-15;
  if (!diagonal_) cdf_.push_back(Eigen::MatrixXf::Ones(1, 1));
}

void PdcPulseSampler::extend_to(int n) {
  while (static_cast<int>(cdf_.size()) <= n) {
    const Eigen::MatrixXcd& d = relative_.next();
    // column m_a of the h-indexed representation
    const Eigen::MatrixXd w = d.reverse().cwiseAbs2();
    Eigen::MatrixXf c(w.rows(), w.cols());
    for (Eigen::Index col = 0; col < w.cols(); ++col) {
      double acc = 0.0;
      const double total = w.col(col).sum();
      for (Eigen::Index row = 0; row < w.rows(); ++row) {
        acc += w(row, col);
        c(row, col) = static_cast<float>(acc / total);
      }
      c(w.rows() - 1, col) = 1.0f;
    }
    cdf_.push_back(std::move(c));
  }
}

Occupation PdcPulseSampler::operator()(Rng& rng) {
  const int n = pairs_(rng);
  const int ma = std::min(n, static_cast<int>(uniform01(rng) * (n + 1)));
  if (diagonal_) return occupation_of(n, ma, ma);
  extend_to(n);
  const Eigen::MatrixXf& c = cdf_[static_cast<std::size_t>(n)];
  const float* col = c.data() + static_cast<Eigen::Index>(ma) * c.rows();
  const int mb = search(col, col + c.rows(), uniform01(rng));
  return occupation_of(n, ma, mb);
}

AnsatzPulseSampler::AnsatzPulseSampler(double tau, int n_max, const PolarizationRotation& ua,
                                       const PolarizationRotation& ub)
    : pairs_(tau, n_max) {
  const Eigen::Matrix2d p = singlet_outcome_probs(ua, ub);
  const double v[4] = {p(0, 0), p(0, 1), p(1, 0), p(1, 1)};
  double acc = 0.0;
  for (int k = 0; k < 4; ++k) outcome_cdf_[static_cast<std::size_t>(k)] = (acc += v[k]);
  outcome_cdf_[3] = 1.0;
}

Occupation AnsatzPulseSampler::operator()(Rng& rng) const {
  const int n = pairs_(rng);
  Occupation occ{0, 0, 0, 0};
  for (int pair = 0; pair < n; ++pair) {
    const int k = search(outcome_cdf_.begin(), outcome_cdf_.end(), uniform01(rng));
    const int ia = k >> 1, ib = k & 1;
    ++occ[static_cast<std::size_t>(ia == 0 ? kAh : kAv)];
    ++occ[static_cast<std::size_t>(ib == 0 ? kBh : kBv)];
  }
  return occ;
}

ClickPattern detect(const Occupation& occ, const Efficiencies& etas, Rng& rng) {
  ClickPattern p = 0;
  for (int d = 0; d < 4; ++d) {
    const int k = occ[static_cast<std::size_t>(d)];
    if (k == 0) continue;
    const double fire = click_probability_single(k, etas[d]);
    if (uniform01(rng) < fire) p |= static_cast<ClickPattern>(1U << d);
  }
  return p;
}

PatternCounts simulate_pulses(const PulseConfig& config, std::int64_t n_pulses) {
  config.validate();
  if (n_pulses < 0) throw ConfigError("pulse count must be non-negative");
  const int n_max = truncation_for(config.tau, config.tail_tol);
  const auto ua = PolarizationRotation::of(config.basis_a);
  const auto ub = PolarizationRotation::of(config.basis_b);
  PdcPulseSampler pdc(config.tau, n_max, ua, ub);
  const AnsatzPulseSampler ansatz(config.tau, n_max, ua, ub);
  const bool mixed = config.background_weight > 0.0;

  Rng rng(config.seed);
  PatternCounts out;
  out.n_pulses = n_pulses;
  for (std::int64_t i = 0; i < n_pulses; ++i) {
    const bool background = mixed && uniform01(rng) < config.background_weight;
    const Occupation occ = background ? ansatz(rng) : pdc(rng);
    ++out.counts[detect(occ, config.etas, rng)];
  }
  return out;
}

std::vector<CountRow> count_rows(const PatternCounts& counts, double pulse_energy_uJ, Basis a,
                                 Basis b) {
  std::vector<CountRow> rows;
  rows.reserve(20);
  for (int d = 0; d < 4; ++d) {
    rows.push_back({pulse_energy_uJ, a, b, std::string(kDetectorNames[static_cast<std::size_t>(d)]),
                    counts.detector_fired(d), counts.n_pulses});
  }
  for (unsigned p = 0; p < 16; ++p) {
    rows.push_back({pulse_energy_uJ, a, b, pattern_mask(static_cast<ClickPattern>(p)),
                    counts.counts[p], counts.n_pulses});
  }
  return rows;
}

CountDataset synthesize_dataset(double tau_max, const Efficiencies& etas,
                                const std::vector<double>& energies, std::int64_t n_pulses,
                                std::uint64_t seed, const SynthesisOptions& options) {
  if (energies.empty()) throw ConfigError("at least one pump energy is required");
  for (double e : energies) {
    if (!(e > 0.0)) throw ConfigError("pump energies must be positive");
  }
  const double e_max = *std::max_element(energies.begin(), energies.end());
  CountDataset ds;
  std::uint64_t stream = 0;
  for (double e : energies) {
    const auto ip = InteractionParams::from_pump(tau_max, e, e_max);
    for (const auto& [a, b] : options.basis_pairs) {
      PulseConfig cfg;
      cfg.tau = ip.tau;
      cfg.etas = etas;
      cfg.basis_a = a;
      cfg.basis_b = b;
      cfg.seed = derive_seed(seed, stream++);
      cfg.background_weight = options.background_weight;
      cfg.tail_tol = options.tail_tol;
      const auto rows = count_rows(simulate_pulses(cfg, n_pulses), e, a, b);
      ds.rows.insert(ds.rows.end(), rows.begin(), rows.end());
    }
  }
  return ds;
}

FanoutCounts simulate_fanout(double tau, double eta_a, double eta_b, std::int64_t n_pulses,
                             std::uint64_t seed) {
  Efficiencies::uniform(eta_a).validate();
  Efficiencies::uniform(eta_b).validate();
  const PairNumberSampler pairs(tau, select_n_max(tau, default_tail_tol(tau)));
  Rng rng(seed);
  FanoutCounts out;
  out.n_pulses = n_pulses;
  // each photon reaches port 1 or 2 with probability 1/2, then survives
  auto split = [&](int photons, double eta) {
    unsigned fired = 0;
    for (int k = 0; k < photons && fired != 3U; ++k) {
      const double u = uniform01(rng);
      if (u < 0.5 * eta) {
        fired |= 1U;
      } else if (u < eta) {
        fired |= 2U;
      }
    }
    return fired;
  };
  for (std::int64_t i = 0; i < n_pulses; ++i) {
    const int n = pairs(rng);
    const int m = std::min(n, static_cast<int>(uniform01(rng) * (n + 1)));
    // h photons: n - m on side a, m on side b (v modes blocked)
    const unsigned a = split(n - m, eta_a);
    const unsigned b = split(m, eta_b);
    if (a == 3U && (b & 1U)) ++out.three_fold;
    if (a == 3U && b == 3U) ++out.four_fold;
  }
  return out;
}

}  // namespace spdc
