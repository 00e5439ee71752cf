#include "spdc/detection.hpp"

#include <cmath>
#include <numeric>

namespace spdc {

namespace {

// Rows indexed by photon count k: q^k with q = 1 - eta (q^0 = 1 also for eta = 1).
Eigen::VectorXd silent_powers(double eta, int k_max) {
  Eigen::VectorXd v(k_max + 1);
  const double q = 1.0 - eta;
  v(0) = 1.0;
  for (int k = 1; k <= k_max; ++k) v(k) = v(k - 1) * q;
  return v;
}

struct SilentTables {
  std::array<Eigen::VectorXd, 4> q;

  SilentTables(const Efficiencies& etas, int k_max) {
    const auto e = etas.as_array();
    for (int d = 0; d < 4; ++d) q[d] = silent_powers(e[d], k_max);
  }

  double factor(int detector, int photons, bool fire) const {
    const double s = q[detector](photons);
    return fire ? 1.0 - s : s;
  }
};

// Side factors for block n: rows are the four per-side patterns (bit 0 = h
// detector, bit 1 = v detector), columns the block index on that side.
Eigen::Matrix<double, 4, Eigen::Dynamic> side_a_factors(const SilentTables& t, int n) {
  Eigen::Matrix<double, 4, Eigen::Dynamic> f(4, n + 1);
  for (int m = 0; m <= n; ++m) {
    for (int p = 0; p < 4; ++p) {
      f(p, m) = t.factor(kAh, n - m, p & 1) * t.factor(kAv, m, p & 2);
    }
  }
  return f;
}

Eigen::Matrix<double, 4, Eigen::Dynamic> side_b_factors(const SilentTables& t, int n) {
  Eigen::Matrix<double, 4, Eigen::Dynamic> f(4, n + 1);
  for (int m = 0; m <= n; ++m) {
    for (int p = 0; p < 4; ++p) {
      f(p, m) = t.factor(kBh, m, p & 1) * t.factor(kBv, n - m, p & 2);
    }
  }
  return f;
}

void accumulate_block(ClickDistribution& d, const SilentTables& t, int n,
                      const Eigen::MatrixXd& weights) {
  const Eigen::Matrix4d side = side_a_factors(t, n) * weights * side_b_factors(t, n).transpose();
  for (int pa = 0; pa < 4; ++pa) {
    for (int pb = 0; pb < 4; ++pb) d.prob[pa | (pb << 2)] += side(pa, pb);
  }
}

void check_tau_eta(double tau, double eta) {
  if (!(tau >= 0.0)) throw ConfigError("tau must be non-negative");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in [0, 1]");
}

}  // namespace

void Efficiencies::validate() const {
  for (int d = 0; d < 4; ++d) {
    const double e = (*this)[d];
    if (!(e >= 0.0 && e <= 1.0)) {
      throw ConfigError("efficiency " + std::string(kDetectorNames[d]) + " = " +
                        std::to_string(e) + " outside [0, 1]");
    }
  }
}

std::string pattern_mask(ClickPattern p) {
  std::string s(4, '0');
  for (int d = 0; d < 4; ++d) {
    if (fires(p, d)) s[static_cast<std::size_t>(d)] = '1';
  }
  return s;
}

ClickPattern parse_pattern_mask(std::string_view mask) {
  if (mask.size() != 4) throw ConfigError("pattern mask must have 4 characters: " + std::string(mask));
  ClickPattern p = 0;
  for (int d = 0; d < 4; ++d) {
    const char c = mask[static_cast<std::size_t>(d)];
    if (c == '1') {
      p |= static_cast<ClickPattern>(1U << d);
    } else if (c != '0') {
      throw ConfigError("pattern mask must contain only 0/1: " + std::string(mask));
    }
  }
  return p;
}

double ClickDistribution::total() const { return std::accumulate(prob.begin(), prob.end(), 0.0); }

double ClickDistribution::marginal(int detector) const {
  double s = 0.0;
  for (unsigned p = 0; p < 16; ++p) {
    if (fires(static_cast<ClickPattern>(p), detector)) s += prob[p];
  }
  return s;
}

SubspaceProbs SubspaceProbs::from_unnormalized(Basis a, Basis b, double hh, double hv,
                                               double vh, double vv) {
  SubspaceProbs s;
  s.basis_a = a;
  s.basis_b = b;
  s.P_hh = hh;
  s.P_hv = hv;
  s.P_vh = vh;
  s.P_vv = vv;
  s.P_11 = hh + hv + vh + vv;
  if (!(s.P_11 > 0.0)) {
    throw EmptySubspace("no exactly-one-click-per-side events for " +
                        std::string(to_string(a)) + "/" + std::string(to_string(b)));
  }
  s.p_hh = hh / s.P_11;
  s.p_hv = hv / s.P_11;
  s.p_vh = vh / s.P_11;
  s.p_vv = vv / s.P_11;
  return s;
}

double click_probability_single(int m, double eta) {
  if (m < 0) throw ConfigError("photon number must be non-negative");
  check_tau_eta(0.0, eta);
  if (m == 0) return 0.0;
  if (eta == 1.0) return 1.0;
  return -std::expm1(m * std::log1p(-eta));
}

ClickDistribution click_distribution(const PairBlockState& state, const Efficiencies& etas) {
  etas.validate();
  const SilentTables t(etas, state.n_max());
  ClickDistribution d;
  d.tail_mass = state.tail_mass();
  for (int n = 0; n <= state.n_max(); ++n) {
    accumulate_block(d, t, n, state.block(n).cwiseAbs2());
  }
  return d;
}

ClickDistribution click_distribution(const PairBlockState& state, const Efficiencies& etas,
                                     const PolarizationRotation& ua,
                                     const PolarizationRotation& ub) {
  etas.validate();
  const SilentTables t(etas, state.n_max());
  SymmetricPowerSequence<double> da(ua.matrix());
  SymmetricPowerSequence<double> db(ub.matrix());
  ClickDistribution d;
  d.tail_mass = state.tail_mass();
  for (int n = 0; n <= state.n_max(); ++n) {
    if (n > 0) {
      da.next();
      db.next();
    }
    const Eigen::MatrixXcd rotated =
        da.current() * state.block(n) * db.current().reverse().transpose();
    accumulate_block(d, t, n, rotated.cwiseAbs2());
  }
  return d;
}

ClickDistribution pdc_click_distribution(double tau, int n_max, const Efficiencies& etas,
                                         const PolarizationRotation& ua,
                                         const PolarizationRotation& ub) {
  check_tau_eta(tau, 0.0);
  etas.validate();
  const SilentTables t(etas, n_max);
  const Eigen::Matrix2cd relative = ub.matrix() * ua.matrix().adjoint();
  const bool diagonal = std::abs(relative(0, 1)) < 1e-15 && std::abs(relative(1, 0)) < 1e-15;
  SymmetricPowerSequence<double> seq(relative);
  ClickDistribution d;
  d.tail_mass = truncation_tail(tau, n_max);
  for (int n = 0; n <= n_max; ++n) {
    if (n > 0 && !diagonal) seq.next();
    const double a = pdc_amplitude(tau, n);
    Eigen::MatrixXd w;
    if (diagonal) {
      w = Eigen::MatrixXd::Identity(n + 1, n + 1) * (a * a);
    } else {
      // w(m_a, m_b) = a^2 |D_h[m_b][m_a]|^2 with D_h the h-indexed D_v
      w = (a * a) * seq.current().reverse().cwiseAbs2().transpose();
    }
    accumulate_block(d, t, n, w);
  }
  return d;
}

ClickDistribution pdc_click_distribution_closed(double tau, const Efficiencies& etas) {
  check_tau_eta(tau, 0.0);
  etas.validate();
  const double x = pair_ratio(tau);
  const double sech = 1.0 / std::cosh(tau);
  const double D = sech * sech;
  // a_h and b_v see the same photon number, as do a_v and b_h; each pair of
  // detectors contributes an independent geometric factor
  auto pair_factor = [&](double e1, double e2, bool f1, bool f2) {
    auto H = [&](double w) { return 1.0 / (D + x * w); };
    const double w12 = e1 + e2 - e1 * e2;
    if (!f1 && !f2) return D * H(w12);
    if (f1 != f2) {
      const double ef = f1 ? e1 : e2, es = f1 ? e2 : e1;
      return D * x * (1.0 - es) * ef * H(es) * H(w12);
    }
    return D * x * e1 * e2 * H(w12) * (x * (1.0 - e1) * H(0.0) * H(e1) + x * H(0.0) * H(e2) + H(e2));
  };
  ClickDistribution d;
  for (unsigned f = 0; f < 16; ++f) {
    const auto p = static_cast<ClickPattern>(f);
    d.prob[f] = pair_factor(etas.ah, etas.bv, fires(p, kAh), fires(p, kBv)) *
                pair_factor(etas.av, etas.bh, fires(p, kAv), fires(p, kBh));
  }
  return d;
}

double single_detector_prob_closed(double tau, double eta) {
  check_tau_eta(tau, eta);
  const double x = pair_ratio(tau);
  return eta * x / (1.0 - (1.0 - eta) * x);
}

SubspaceProbs subspace_probs(const ClickDistribution& dist, Basis a, Basis b) {
  return SubspaceProbs::from_unnormalized(a, b, dist[kPatternHH], dist[kPatternHV],
                                          dist[kPatternVH], dist[kPatternVV]);
}

SubspaceProbs subspace_probs(const PairBlockState& state, const Efficiencies& etas,
                             const PolarizationRotation& ua, const PolarizationRotation& ub) {
  const auto d = click_distribution(state, etas, ua, ub);
  return subspace_probs(d, ua.label().value_or(Basis::hv), ub.label().value_or(Basis::hv));
}

double subspace_ratio(const ClickDistribution& dist) {
  double higher = 0.0;
  for (unsigned p = 0; p < 16; ++p) {
    const bool side_a = (p & 0b0011U) != 0;
    const bool side_b = (p & 0b1100U) != 0;
    if (side_a && side_b && __builtin_popcount(p) >= 3) higher += dist.prob[p];
  }
  const double p11 = dist[kPatternHH] + dist[kPatternHV] + dist[kPatternVH] + dist[kPatternVV];
  if (!(p11 > 0.0)) throw EmptySubspace("subspace ratio undefined: P_11 = 0");
  return higher / p11;
}

double subspace_ratio(const PairBlockState& state, const Efficiencies& etas) {
  return subspace_ratio(click_distribution(state, etas));
}

Eigen::Matrix2d singlet_outcome_probs(const PolarizationRotation& ua,
                                      const PolarizationRotation& ub) {
  const double s = 1.0 / std::sqrt(2.0);
  Eigen::Matrix2cd singlet;
  singlet << 0.0, s,
             -s, 0.0;
  return (ua.matrix() * singlet * ub.matrix().transpose()).cwiseAbs2();
}

ClickDistribution ansatz_click_distribution(double tau, const Efficiencies& etas,
                                            const PolarizationRotation& ua,
                                            const PolarizationRotation& ub) {
  check_tau_eta(tau, 0.0);
  etas.validate();
  const double x = pair_ratio(tau);
  const double sech = 1.0 / std::cosh(tau);
  const double norm = std::pow(sech, 4);
  const Eigen::Matrix2d outcome = singlet_outcome_probs(ua, ub);
  const auto e = etas.as_array();

  if (x >= 0.5) {
    auto silent = [&](std::uint8_t s) {
      auto keep = [&](int d) { return ((s >> d) & 1U) ? 1.0 - e[static_cast<std::size_t>(d)] : 1.0; };
      const double sa[2] = {keep(kAh), keep(kAv)};
      const double sb[2] = {keep(kBh), keep(kBv)};
      double q = 0.0;
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) q += outcome(i, j) * sa[i] * sb[j];
      }
      const double den = 1.0 - x * q;
      return norm / (den * den);
    };
    return from_silent_sets(silent);
  }

  // weak pumping: n independent pairs, fired set tracked exactly
  std::array<std::pair<ClickPattern, double>, 12> step{};
  int k = 0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const int da = i == 0 ? kAh : kAv, db = j == 0 ? kBh : kBv;
      const double ea = e[static_cast<std::size_t>(da)], eb = e[static_cast<std::size_t>(db)];
      const auto ma = static_cast<ClickPattern>(1U << da), mb = static_cast<ClickPattern>(1U << db);
      step[k++] = {static_cast<ClickPattern>(ma | mb), outcome(i, j) * ea * eb};
      step[k++] = {ma, outcome(i, j) * ea * (1.0 - eb)};
      step[k++] = {mb, outcome(i, j) * (1.0 - ea) * eb};
    }
  }
  double none = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      none += outcome(i, j) * (1.0 - e[static_cast<std::size_t>(i == 0 ? kAh : kAv)]) *
              (1.0 - e[static_cast<std::size_t>(j == 0 ? kBh : kBv)]);
    }
  }
  std::array<double, 16> cur{}, next{};
  cur[0] = 1.0;
  ClickDistribution d;
  double weight = norm;  // (n + 1) x^n sech^4
  for (int n = 0;; ++n) {
    for (unsigned f = 0; f < 16; ++f) d.prob[f] += weight * cur[f];
    // remaining mass beyond n relative to the first multi-pair order
    if (n >= 4 && truncation_tail(tau, n) < 1e-18 * x * x) break;
    next.fill(0.0);
    for (unsigned f = 0; f < 16; ++f) {
      if (cur[f] == 0.0) continue;
      next[f] += cur[f] * none;
      for (const auto& [m, w] : step) next[f | m] += cur[f] * w;
    }
    cur = next;
    weight = norm * (n + 2) * std::pow(x, n + 1);
  }
  return d;
}

double ansatz_visibility(double tau, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("ansatz visibility needs eta in (0, 1]");
  const auto d = ansatz_click_distribution(tau, Efficiencies::uniform(eta),
                                           PolarizationRotation::hv(), PolarizationRotation::hv());
  const auto s = subspace_probs(d, Basis::hv, Basis::hv);
  return (s.P_hv + s.P_vh - s.P_hh - s.P_vv) / s.P_11;
}

FanoutProbs fanout_probs_closed(double tau, double eta_a, double eta_b) {
  check_tau_eta(tau, eta_a);
  check_tau_eta(tau, eta_b);
  const double x = pair_ratio(tau);
  const double sech = 1.0 / std::cosh(tau);
  const double D = sech * sech;
  // one side's h photons split evenly over two ports of weight eta / 2 each
  auto one = [&](double eta) { return x * 0.5 * eta / (D + x * 0.5 * eta); };
  auto both = [&](double eta) {
    const double w = 0.5 * eta;
    return 2.0 * x * x * w * w / ((D + x * eta) * (D + x * w));
  };
  return {both(eta_a) * one(eta_b), both(eta_a) * both(eta_b)};
}

}  // namespace spdc
