#include "spdc/state.hpp"

#include <cmath>
#include <string>

namespace spdc {

namespace {

constexpr double kUnitaryTol = 1e-12;

double log_cosh(double tau) {
  // tau + log((1 + e^{-2tau}) / 2), finite for any tau >= 0
  return tau + std::log1p(std::exp(-2.0 * tau)) - std::log(2.0);
}

// 1 - tanh^2 without cancellation at large tau.
double sech2(double tau) {
  const double c = std::cosh(tau);
  return 1.0 / (c * c);
}

void check_tau(double tau) {
  if (!(tau >= 0.0) || !std::isfinite(tau)) {
    throw ConfigError("tau must be finite and non-negative, got " + std::to_string(tau));
  }
}

}  // namespace

std::string_view to_string(Basis b) {
  switch (b) {
    case Basis::hv: return "hv";
    case Basis::pm: return "pm";
    case Basis::rl: return "rl";
  }
  return "?";
}

Basis parse_basis(std::string_view name) {
  if (name == "hv") return Basis::hv;
  if (name == "pm") return Basis::pm;
  if (name == "rl") return Basis::rl;
  throw ConfigError("unknown basis '" + std::string(name) + "' (expected hv, pm or rl)");
}

InteractionParams InteractionParams::from_pump(double tau_max, double pulse_energy,
                                               double max_energy) {
  if (!(max_energy > 0.0)) throw ConfigError("max_energy must be positive");
  if (!(pulse_energy >= 0.0)) throw ConfigError("pulse_energy must be non-negative");
  if (!(tau_max >= 0.0)) throw ConfigError("tau_max must be non-negative");
  return {tau_max * std::sqrt(pulse_energy / max_energy), tau_max, pulse_energy, max_energy};
}

PolarizationRotation::PolarizationRotation(const Eigen::Matrix2cd& u, std::optional<Basis> label)
    : u_(u), label_(label) {
  if (!(u_.adjoint() * u_).isIdentity(kUnitaryTol)) {
    throw ConfigError("polarization rotation is not unitary");
  }
  if (std::abs(std::abs(u_.determinant()) - 1.0) > kUnitaryTol) {
    throw ConfigError("polarization rotation has |det| != 1");
  }
}

PolarizationRotation PolarizationRotation::hv() {
  return PolarizationRotation(Eigen::Matrix2cd::Identity(), Basis::hv);
}

PolarizationRotation PolarizationRotation::pm() {
  const double s = 1.0 / std::sqrt(2.0);
  Eigen::Matrix2cd u;
  u << s, s,
       s, -s;
  return PolarizationRotation(u, Basis::pm);
}

PolarizationRotation PolarizationRotation::rl() {
  const double s = 1.0 / std::sqrt(2.0);
  const std::complex<double> i(0.0, 1.0);
  Eigen::Matrix2cd u;
  u << s, -i * s,
       s, i * s;
  return PolarizationRotation(u, Basis::rl);
}

PolarizationRotation PolarizationRotation::of(Basis b) {
  switch (b) {
    case Basis::hv: return hv();
    case Basis::pm: return pm();
    case Basis::rl: return rl();
  }
  throw ConfigError("unknown basis");
}

PairBlockState::PairBlockState(std::vector<Eigen::MatrixXcd> blocks, double tail_mass)
    : blocks_(std::move(blocks)), tail_mass_(tail_mass) {
  if (blocks_.empty()) throw ConfigError("PairBlockState needs at least the n = 0 block");
  for (std::size_t n = 0; n < blocks_.size(); ++n) {
    const auto dim = static_cast<Eigen::Index>(n + 1);
    if (blocks_[n].rows() != dim || blocks_[n].cols() != dim) {
      throw ConfigError("block " + std::to_string(n) + " must be " + std::to_string(dim) +
                        "x" + std::to_string(dim));
    }
  }
  if (!(tail_mass_ >= 0.0)) throw ConfigError("tail_mass must be non-negative");
}

double PairBlockState::squared_norm() const {
  double s = 0.0;
  for (const auto& b : blocks_) s += b.squaredNorm();
  return s;
}

double pair_ratio(double tau) {
  const double t = std::tanh(tau);
  return t * t;
}

double pdc_amplitude(double tau, int n) {
  check_tau(tau);
  if (n == 0) return std::exp(-2.0 * log_cosh(tau));
  if (tau == 0.0) return 0.0;
  return std::exp(n * std::log(std::tanh(tau)) - 2.0 * log_cosh(tau));
}

double pair_number_probability(double tau, int n) {
  const double a = pdc_amplitude(tau, n);
  return (n + 1) * a * a;
}

double truncation_tail(double tau, int n_max) {
  check_tau(tau);
  if (tau == 0.0) return 0.0;
  const double x = pair_ratio(tau);
  const double one_minus_x = sech2(tau);
  const double log_xn = (n_max + 1) * std::log(x);
  return std::exp(log_xn) * ((n_max + 2) * one_minus_x + x);
}

double default_tail_tol(double tau) { return tau <= 1.5 ? 1e-9 : 1e-6; }

int select_n_max(double tau, double tail_tol, int cap) {
  check_tau(tau);
  if (!(tail_tol > 0.0 && tail_tol < 1.0)) {
    throw ConfigError("tail_tol must lie in (0, 1)");
  }
  for (int n = 0; n <= cap; ++n) {
    if (truncation_tail(tau, n) <= tail_tol) return n;
  }
  throw NumericInfeasible("truncation for tau=" + std::to_string(tau) + " at tail_tol=" +
                          std::to_string(tail_tol) + " exceeds the n_max cap of " +
                          std::to_string(cap));
}

PairBlockState build_pdc_state(double tau, int n_max) {
  check_tau(tau);
  if (n_max < 0) throw ConfigError("n_max must be non-negative");
  if (!std::isfinite(std::cosh(tau))) throw NumericInfeasible("cosh^2(tau) overflows");
  std::vector<Eigen::MatrixXcd> blocks;
  blocks.reserve(static_cast<std::size_t>(n_max) + 1);
  for (int n = 0; n <= n_max; ++n) {
    const double a = pdc_amplitude(tau, n);
    Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(n + 1, n + 1);
    for (int m = 0; m <= n; ++m) b(m, m) = (m % 2 == 0) ? a : -a;
    blocks.push_back(std::move(b));
  }
  return PairBlockState(std::move(blocks), truncation_tail(tau, n_max));
}

double mean_pairs(double tau) {
  check_tau(tau);
  const double s = std::sinh(tau);
  return 2.0 * s * s;
}

PairBlockState rotate(const PairBlockState& state, const PolarizationRotation& ua,
                      const PolarizationRotation& ub) {
  SymmetricPowerSequence<double> da(ua.matrix());
  SymmetricPowerSequence<double> db(ub.matrix());
  std::vector<Eigen::MatrixXcd> out;
  out.reserve(state.blocks().size());
  for (int n = 0; n <= state.n_max(); ++n) {
    if (n > 0) {
      da.next();
      db.next();
    }
    const auto& b = state.block(n);
    if (da.current().rows() != b.rows() || db.current().rows() != b.cols()) {
      throw ConfigError("block/representation dimension mismatch at n=" + std::to_string(n));
    }
    // side b is indexed by h count: reverse both indices of D_v
    out.push_back(da.current() * b * db.current().reverse().transpose());
  }
  return PairBlockState(std::move(out), state.tail_mass());
}

}  // namespace spdc
