#include "spdc/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

namespace spdc {

namespace {

constexpr int kParams = 5;
using Vec = Eigen::Matrix<double, kParams, 1>;
using Mat = Eigen::Matrix<double, kParams, kParams>;

double logit(double p) { return std::log(p / (1.0 - p)); }
double logistic(double y) { return 1.0 / (1.0 + std::exp(-y)); }

Vec to_coords(const ModelParams& p) {
  Vec v;
  v(0) = std::log(p.tau_max);
  const auto e = p.etas.as_array();
  for (int d = 0; d < 4; ++d) v(d + 1) = logit(std::clamp(e[static_cast<std::size_t>(d)], 1e-9, 1.0 - 1e-9));
  return v;
}

ModelParams from_coords(const Vec& v) {
  ModelParams p;
  p.tau_max = std::exp(v(0));
  p.etas = {logistic(v(1)), logistic(v(2)), logistic(v(3)), logistic(v(4))};
  return p;
}

struct Point {
  double energy;
  Basis a, b;
  RatePattern pattern;
  double counts;
  double n_pulses;
  double weight;  // 1 / max(counts, 1)
};

// Rows grouped by (energy, basis pair) so each group needs one distribution.
struct Problem {
  std::vector<Point> points;
  double max_energy = 0.0;

  explicit Problem(const CountDataset& data) {
    for (const auto& r : data.rows) {
      if (r.n_pulses <= 0) throw ConfigError("row with non-positive n_pulses");
      if (r.counts < 0 || r.counts > r.n_pulses) throw ConfigError("row counts outside [0, n_pulses]");
      if (!(r.pulse_energy_uJ > 0.0)) throw ConfigError("pump energies must be positive");
      points.push_back({r.pulse_energy_uJ, r.basis_a, r.basis_b, RatePattern::parse(r.pattern),
                        static_cast<double>(r.counts), static_cast<double>(r.n_pulses),
                        1.0 / std::max<double>(static_cast<double>(r.counts), 1.0)});
      max_energy = std::max(max_energy, r.pulse_energy_uJ);
    }
  }

  Eigen::VectorXd residuals(const ModelParams& p) const {
    Eigen::VectorXd r(static_cast<Eigen::Index>(points.size()));
    std::map<std::tuple<double, Basis, Basis>, ClickDistribution> cache;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& pt = points[i];
      double pred;
      if (pt.pattern.single) {
        const double tau = p.tau_max * std::sqrt(pt.energy / max_energy);
        pred = single_detector_prob_closed(tau, p.etas[pt.pattern.detector]);
      } else {
        const auto key = std::make_tuple(pt.energy, pt.a, pt.b);
        auto it = cache.find(key);
        if (it == cache.end()) {
          const double tau = p.tau_max * std::sqrt(pt.energy / max_energy);
          ClickDistribution d;
          if (pt.a == pt.b) {
            d = pdc_click_distribution_closed(tau, p.etas);
          } else {
            d = pdc_click_distribution(tau, select_n_max(tau, default_tail_tol(tau)), p.etas,
                                       PolarizationRotation::of(pt.a),
                                       PolarizationRotation::of(pt.b));
          }
          it = cache.emplace(key, d).first;
        }
        pred = it->second[pt.pattern.mask];
      }
      r(static_cast<Eigen::Index>(i)) = (pt.counts - pt.n_pulses * pred) * std::sqrt(pt.weight);
    }
    return r;
  }

  double objective(const Vec& v) const {
    const auto p = from_coords(v);
    if (!std::isfinite(p.tau_max) || p.tau_max > 20.0) return INFINITY;
    return residuals(p).squaredNorm();
  }

  Eigen::MatrixXd jacobian(const Vec& v) const {
    Eigen::MatrixXd j(static_cast<Eigen::Index>(points.size()), kParams);
    for (int k = 0; k < kParams; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(v(k)));
      Vec up = v, dn = v;
      up(k) += h;
      dn(k) -= h;
      j.col(k) = (residuals(from_coords(up)) - residuals(from_coords(dn))) / (2.0 * h);
    }
    return j;
  }
};

void check_identifiable(const Problem& prob) {
  std::set<double> energies;
  std::set<std::string> patterns;
  std::array<bool, 4> touched{};
  bool any_counts = false;
  for (const auto& pt : prob.points) {
    energies.insert(pt.energy);
    patterns.insert(pt.pattern.single ? std::string(kDetectorNames[static_cast<std::size_t>(pt.pattern.detector)])
                                      : pattern_mask(pt.pattern.mask));
    if (pt.pattern.single) {
      touched[static_cast<std::size_t>(pt.pattern.detector)] = true;
    } else {
      touched.fill(true);
    }
    any_counts = any_counts || pt.counts > 0;
  }
  if (energies.size() < 2) throw Unidentifiable("fit needs at least two distinct pump energies");
  if (!any_counts) throw Unidentifiable("dataset has no counts");
  if (patterns.size() < 2) throw Unidentifiable("single-pattern dataset cannot separate tau_max from the efficiencies");
  for (int d = 0; d < 4; ++d) {
    if (!touched[static_cast<std::size_t>(d)]) {
      throw Unidentifiable("no row constrains eta_" + std::string(kDetectorNames[static_cast<std::size_t>(d)]));
    }
  }
}

struct SimplexOutcome {
  Vec best;
  double value;
  int iterations;
  bool converged;
};

SimplexOutcome nelder_mead(const Problem& prob, const Vec& start, const Vec& step, int max_iter,
                           double tol, std::vector<double>& trace) {
  std::array<Vec, kParams + 1> x;
  std::array<double, kParams + 1> f;
  x[0] = start;
  for (int k = 0; k < kParams; ++k) {
    x[k + 1] = start;
    x[k + 1](k) += step(k);
  }
  for (int k = 0; k <= kParams; ++k) f[k] = prob.objective(x[k]);

  int it = 0;
  bool converged = false;
  std::array<int, kParams + 1> order;
  for (; it < max_iter; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) { return f[i] < f[j]; });
    const int best = order.front(), worst = order.back(), second = order[kParams - 1];
    if (trace.empty() || f[best] < trace.back()) trace.push_back(f[best]);

    double size = 0.0;
    for (int k = 0; k <= kParams; ++k) size = std::max(size, (x[k] - x[best]).cwiseAbs().maxCoeff());
    if (std::abs(f[worst] - f[best]) <= tol * (std::abs(f[best]) + 1e-300) && size < 1e-9) {
      converged = true;
      break;
    }

    Vec centroid = Vec::Zero();
    for (int k = 0; k <= kParams; ++k) {
      if (k != worst) centroid += x[k];
    }
    centroid /= kParams;

    const Vec xr = centroid + (centroid - x[worst]);
    const double fr = prob.objective(xr);
    if (fr < f[best]) {
      const Vec xe = centroid + 2.0 * (centroid - x[worst]);
      const double fe = prob.objective(xe);
      if (fe < fr) {
        x[worst] = xe, f[worst] = fe;
      } else {
        x[worst] = xr, f[worst] = fr;
      }
      continue;
    }
    if (fr < f[second]) {
      x[worst] = xr, f[worst] = fr;
      continue;
    }
    const bool outside = fr < f[worst];
    const Vec xc = outside ? Vec(centroid + 0.5 * (xr - centroid))
                           : Vec(centroid + 0.5 * (x[worst] - centroid));
    const double fc = prob.objective(xc);
    if (fc < std::min(fr, f[worst])) {
      x[worst] = xc, f[worst] = fc;
      continue;
    }
    for (int k = 0; k <= kParams; ++k) {
      if (k == best) continue;
      x[k] = x[best] + 0.5 * (x[k] - x[best]);
      f[k] = prob.objective(x[k]);
    }
  }
  const int best = static_cast<int>(std::min_element(f.begin(), f.end()) - f.begin());
  return {x[best], f[best], it, converged};
}

}  // namespace

RatePattern RatePattern::parse(std::string_view name) {
  RatePattern p;
  for (int d = 0; d < 4; ++d) {
    if (name == kDetectorNames[static_cast<std::size_t>(d)]) {
      p.single = true;
      p.detector = d;
      return p;
    }
  }
  p.mask = parse_pattern_mask(name);
  return p;
}

double predict_rate(double tau_max, const Efficiencies& etas, double energy, double max_energy,
                    const RatePattern& pattern, Basis a, Basis b) {
  if (!(energy > 0.0 && energy <= max_energy)) {
    throw ConfigError("energy must lie in (0, max_energy]");
  }
  const double tau = InteractionParams::from_pump(tau_max, energy, max_energy).tau;
  if (pattern.single) return single_detector_prob_closed(tau, etas[pattern.detector]);
  if (a == b) return pdc_click_distribution_closed(tau, etas)[pattern.mask];
  return pdc_click_distribution(tau, select_n_max(tau, default_tail_tol(tau)), etas,
                                PolarizationRotation::of(a), PolarizationRotation::of(b))[pattern.mask];
}

double fit_objective(const CountDataset& data, const ModelParams& params) {
  return Problem(data).residuals(params).squaredNorm();
}

ModelParams initial_guess(const CountDataset& data) {
  // single-detector rates per detector: energy -> fraction
  std::array<std::map<double, double>, 4> singles;
  double e_max = 0.0;
  for (const auto& r : data.rows) {
    e_max = std::max(e_max, r.pulse_energy_uJ);
    const auto p = RatePattern::parse(r.pattern);
    if (p.single && r.n_pulses > 0) {
      singles[static_cast<std::size_t>(p.detector)][r.pulse_energy_uJ] =
          static_cast<double>(r.counts) / static_cast<double>(r.n_pulses);
    }
  }
  ModelParams best;
  double best_score = INFINITY;
  for (int g = 1; g <= 400; ++g) {
    const double tau_max = 0.01 * g;
    ModelParams cand{tau_max, Efficiencies::uniform(0.05)};
    std::array<double, 4> eta = cand.etas.as_array();
    double score = 0.0;
    bool usable = false;
    for (int d = 0; d < 4; ++d) {
      const auto& s = singles[static_cast<std::size_t>(d)];
      const auto lo = std::find_if(s.begin(), s.end(), [](const auto& kv) { return kv.second > 0.0; });
      if (lo == s.end()) continue;
      // invert the single-detector law at the lowest energy with counts
      const double x = pair_ratio(tau_max * std::sqrt(lo->first / e_max));
      const double r = std::min(lo->second, 0.999);
      const double e = std::clamp(r * (1.0 - x) / (x * (1.0 - r)), 1e-6, 0.999);
      eta[static_cast<std::size_t>(d)] = e;
      for (const auto& [energy, rate] : s) {
        if (rate <= 0.0) continue;
        const double pred = single_detector_prob_closed(tau_max * std::sqrt(energy / e_max), e);
        score += std::pow(std::log(pred / rate), 2);
      }
      usable = true;
    }
    if (!usable) return ModelParams{};
    cand.etas = Efficiencies::from_array(eta);
    if (score < best_score) {
      best_score = score;
      best = cand;
    }
  }
  // detectors without singles share the mean efficiency of the others
  auto e = best.etas.as_array();
  double mean = 0.0;
  int count = 0;
  for (int d = 0; d < 4; ++d) {
    if (!singles[static_cast<std::size_t>(d)].empty()) mean += e[static_cast<std::size_t>(d)], ++count;
  }
  if (count > 0) {
    for (int d = 0; d < 4; ++d) {
      if (singles[static_cast<std::size_t>(d)].empty()) e[static_cast<std::size_t>(d)] = mean / count;
    }
  }
  best.etas = Efficiencies::from_array(e);
  return best;
}

FitResult fit(const CountDataset& data, const std::optional<ModelParams>& guess,
              const FitOptions& options) {
  const Problem prob(data);
  check_identifiable(prob);
  const ModelParams start = guess.value_or(initial_guess(data));
  if (!(start.tau_max > 0.0)) throw ConfigError("initial tau_max must be positive");
  start.etas.validate();

  FitResult out;
  out.n_points = static_cast<int>(prob.points.size());

  Vec step;
  step << 0.1, 0.3, 0.3, 0.3, 0.3;
  auto simplex = nelder_mead(prob, to_coords(start), step, options.max_simplex_iterations,
                             options.simplex_tolerance, out.objective_trace);
  // one restart around the best vertex guards against a collapsed simplex
  if (simplex.iterations < options.max_simplex_iterations) {
    auto again = nelder_mead(prob, simplex.best, 0.1 * step,
                             options.max_simplex_iterations - simplex.iterations,
                             options.simplex_tolerance, out.objective_trace);
    again.iterations += simplex.iterations;
    if (again.value <= simplex.value) simplex = again;
  }
  Vec v = simplex.best;
  double f = simplex.value;
  out.iterations = simplex.iterations;
  bool converged = simplex.converged;

  if (options.refine) {
    // Levenberg-Marquardt on the weighted residuals
    double lambda = 1e-3;
    bool refined = false;
    for (int it = 0; it < options.max_refine_iterations; ++it) {
      const Eigen::MatrixXd j = prob.jacobian(v);
      const Eigen::VectorXd r = prob.residuals(from_coords(v));
      const Mat jtj = j.transpose() * j;
      const Vec g = j.transpose() * r;
      if (g.norm() <= 1e-9 * std::max(1.0, f)) {
        refined = true;
        break;
      }
      bool accepted = false;
      for (int tries = 0; tries < 20 && !accepted; ++tries) {
        Mat a = jtj;
        a.diagonal() *= (1.0 + lambda);
        const Vec delta = a.ldlt().solve(-g);
        const Vec cand = v + delta;
        const double fc = prob.objective(cand);
        if (fc < f) {
          const double decrease = f - fc;
          v = cand;
          f = fc;
          out.objective_trace.push_back(f);
          lambda = std::max(lambda * 0.3, 1e-12);
          accepted = true;
          if (decrease <= 1e-14 * std::max(1.0, f) || delta.norm() < 1e-12) refined = true;
        } else {
          lambda *= 10.0;
        }
      }
      ++out.iterations;
      if (!accepted || refined) {
        refined = true;
        break;
      }
    }
    converged = converged || refined;
  }

  const ModelParams best = from_coords(v);
  out.tau_max = best.tau_max;
  out.etas = best.etas;
  out.residual = f;
  out.converged = converged && std::isfinite(f);

  const Eigen::MatrixXd j = prob.jacobian(v);
  const Mat jtj = j.transpose() * j;
  Eigen::SelfAdjointEigenSolver<Mat> es(jtj);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  out.hessian_condition = lo > 0.0 ? hi / lo : INFINITY;
  if (lo > 0.0) {
    const Mat cov = jtj.inverse();
    out.tau_max_err = best.tau_max * std::sqrt(cov(0, 0));
    const auto e = best.etas.as_array();
    for (int d = 0; d < 4; ++d) {
      const double ed = e[static_cast<std::size_t>(d)];
      out.eta_err[static_cast<std::size_t>(d)] = ed * (1.0 - ed) * std::sqrt(cov(d + 1, d + 1));
    }
  } else {
    out.tau_max_err = INFINITY;
    out.eta_err.fill(INFINITY);
  }
  return out;
}

}  // namespace spdc
