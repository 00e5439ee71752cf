#include "spdc/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace spdc {

namespace {

constexpr double kHermitianTol = 1e-8;
constexpr double kNormalizationSpread = 0.05;
constexpr double kSingleSideSpread = 0.01;

Eigen::Matrix4cd kron(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
  Eigen::Matrix4cd k;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) k(2 * i + r, 2 * j + c) = a(i, j) * b(r, c);
  return k;
}

double correlation(const SubspaceProbs& p) { return p.p_hh + p.p_vv - p.p_hv - p.p_vh; }
double side_a_mean(const SubspaceProbs& p) { return p.p_hh + p.p_hv - p.p_vh - p.p_vv; }
double side_b_mean(const SubspaceProbs& p) { return p.p_hh + p.p_vh - p.p_hv - p.p_vv; }

const SubspaceProbs& lookup(const NineBasisProbs& probs, Basis a, Basis b) {
  const auto it = probs.find({a, b});
  if (it == probs.end()) {
    throw ConfigError("missing basis pair " + std::string(to_string(a)) + "/" +
                      std::string(to_string(b)));
  }
  return it->second;
}

}  // namespace

VisibilitySet VisibilitySet::from(const NineBasisProbs& probs) {
  VisibilitySet vis;
  for (const auto& [pair, p] : probs) vis(pair.first, pair.second) = visibility(p);
  return vis;
}

double DensityMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(rho, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double visibility(const SubspaceProbs& probs) {
  const double anti = probs.P_hv + probs.P_vh;
  const double corr = probs.P_hh + probs.P_vv;
  if (!(anti + corr > 0.0)) throw EmptySubspace("visibility undefined: empty subspace");
  return (anti - corr) / (anti + corr);
}

double visibility_as_spin_correlation(const SubspaceProbs& probs) {
  if (probs.basis_a != probs.basis_b) {
    throw ConfigError("spin-correlation form needs the same basis on both sides");
  }
  const double v = -correlation(probs);
  if (std::abs(v - visibility(probs)) > 1e-12) {
    throw std::logic_error("visibility and spin anti-correlation disagree");
  }
  return v;
}

double total_spin_correlation(const VisibilitySet& vis) {
  return -(vis(Basis::pm, Basis::pm) + vis(Basis::rl, Basis::rl) + vis(Basis::hv, Basis::hv));
}

double c2(const VisibilitySet& vis) { return std::abs(total_spin_correlation(vis)); }

double c1(const SubspaceProbs& probs_hvhv, const VisibilitySet& vis) {
  const double same = vis(Basis::pm, Basis::pm) + vis(Basis::rl, Basis::rl);
  const double cross = vis(Basis::pm, Basis::rl) - vis(Basis::rl, Basis::pm);
  const double den = same * same + cross * cross;
  if (!(den > 1e-20)) {
    throw CriterionInapplicable("C1 denominator vanishes (no pm/rl coherence)");
  }
  return 16.0 * probs_hvhv.p_hh * probs_hvhv.p_vv / den;
}

Eigen::Matrix2cd basis_observable(Basis b) {
  const auto u = PolarizationRotation::of(b).matrix();
  Eigen::Matrix2cd z;
  z << 1.0, 0.0,
       0.0, -1.0;
  return u.adjoint() * z * u;
}

DensityMatrix tomography(const NineBasisProbs& probs) {
  DensityMatrix out;
  double p11_min = INFINITY, p11_max = 0.0;
  for (Basis a : kAllBases) {
    for (Basis b : kAllBases) {
      const auto& p = lookup(probs, a, b);
      if (!(p.P_11 > 0.0)) throw EmptySubspace("tomography input has an empty subspace");
      p11_min = std::min(p11_min, p.P_11);
      p11_max = std::max(p11_max, p.P_11);
    }
  }
  if (p11_max / p11_min - 1.0 > kNormalizationSpread) {
    std::ostringstream os;
    os << "P_11 varies by " << 100.0 * (p11_max / p11_min - 1.0)
       << "% across basis pairs (data quality)";
    out.warnings.push_back(os.str());
  }

  const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
  out.rho = kron(id, id);
  for (Basis a : kAllBases) {
    double lo = INFINITY, hi = -INFINITY, sum = 0.0;
    for (Basis b : kAllBases) {
      const double s = side_a_mean(lookup(probs, a, b));
      lo = std::min(lo, s);
      hi = std::max(hi, s);
      sum += s;
    }
    if (hi - lo > kSingleSideSpread) {
      out.warnings.push_back("side-a <" + std::string(to_string(a)) +
                             "> estimates disagree across basis pairs");
    }
    out.rho += (sum / 3.0) * kron(basis_observable(a), id);
  }
  for (Basis b : kAllBases) {
    double lo = INFINITY, hi = -INFINITY, sum = 0.0;
    for (Basis a : kAllBases) {
      const double s = side_b_mean(lookup(probs, a, b));
      lo = std::min(lo, s);
      hi = std::max(hi, s);
      sum += s;
    }
    if (hi - lo > kSingleSideSpread) {
      out.warnings.push_back("side-b <" + std::string(to_string(b)) +
                             "> estimates disagree across basis pairs");
    }
    out.rho += (sum / 3.0) * kron(id, basis_observable(b));
  }
  for (Basis a : kAllBases) {
    for (Basis b : kAllBases) {
      out.rho += correlation(lookup(probs, a, b)) *
                 kron(basis_observable(a), basis_observable(b));
    }
  }
  out.rho /= 4.0;
  return out;
}

Eigen::Matrix4cd partial_transpose(const Eigen::Matrix4cd& rho) {
  Eigen::Matrix4cd pt;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) pt(2 * i + l, 2 * k + j) = rho(2 * i + j, 2 * k + l);
  return pt;
}

Eigen::Vector4d partial_transpose_spectrum(const Eigen::Matrix4cd& rho) {
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > kHermitianTol) {
    throw ConfigError("partial transpose needs a Hermitian matrix");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(partial_transpose(rho),
                                                     Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double partial_transpose_min_eigenvalue(const Eigen::Matrix4cd& rho) {
  return partial_transpose_spectrum(rho).minCoeff();
}

SubspaceProbs subspace_probs_from_density(const Eigen::Matrix4cd& rho, Basis a, Basis b) {
  const Eigen::Matrix4cd u =
      kron(PolarizationRotation::of(a).matrix(), PolarizationRotation::of(b).matrix());
  const Eigen::Matrix4cd r = u * rho * u.adjoint();
  // basis order hh, hv, vh, vv
  return SubspaceProbs::from_unnormalized(a, b, r(0, 0).real(), r(1, 1).real(), r(2, 2).real(),
                                          r(3, 3).real());
}

NineBasisProbs nine_basis_probs_from_density(const Eigen::Matrix4cd& rho) {
  NineBasisProbs out;
  for (Basis a : kAllBases)
    for (Basis b : kAllBases) out.emplace(BasisPair{a, b}, subspace_probs_from_density(rho, a, b));
  return out;
}

CriteriaResult evaluate_criteria(const NineBasisProbs& probs) {
  CriteriaResult r;
  const auto vis = VisibilitySet::from(probs);
  const auto rho = tomography(probs);
  r.min_pt_eigenvalue = partial_transpose_min_eigenvalue(rho.rho);
  r.entangled_by_ppt = r.min_pt_eigenvalue < -kPptTolerance;
  r.ppt_boundary = !r.entangled_by_ppt && r.min_pt_eigenvalue <= 0.0;
  r.total_spin_correlation = total_spin_correlation(vis);
  r.c2 = c2(vis);
  r.entangled_by_c2 = r.c2 > 1.0;
  try {
    r.c1 = c1(lookup(probs, Basis::hv, Basis::hv), vis);
    r.entangled_by_c1 = *r.c1 < 1.0;
  } catch (const CriterionInapplicable&) {
    r.c1.reset();
  }
  return r;
}

NineBasisProbs pdc_nine_basis_probs(double tau, int n_max, const Efficiencies& etas) {
  NineBasisProbs out;
  for (Basis a : kAllBases) {
    for (Basis b : kAllBases) {
      const auto d = pdc_click_distribution(tau, n_max, etas, PolarizationRotation::of(a),
                                            PolarizationRotation::of(b));
      out.emplace(BasisPair{a, b}, subspace_probs(d, a, b));
    }
  }
  return out;
}

}  // namespace spdc
