#include <cmath>
#include <map>

#include "doctest.h"
#include "spdc/montecarlo.hpp"
#include "test_util.hpp"

using namespace spdc;

namespace {

double sigma(double p, double n) { return std::sqrt(std::max(p * (1.0 - p), 0.0) / n); }

// Largest |empirical - exact| in units of the binomial standard error.
double worst_z(const PatternCounts& c, const ClickDistribution& exact) {
  const double n = static_cast<double>(c.n_pulses);
  double worst = 0.0;
  for (unsigned p = 0; p < 16; ++p) {
    const double f = static_cast<double>(c.counts[p]) / n;
    const double s = sigma(exact.prob[p], n);
    const double z = s > 0.0 ? std::abs(f - exact.prob[p]) / s : (c.counts[p] == 0 ? 0.0 : INFINITY);
    worst = std::max(worst, z);
  }
  return worst;
}

double visibility_of(const PatternCounts& c) {
  const double anti = static_cast<double>(c.counts[kPatternHV] + c.counts[kPatternVH]);
  const double corr = static_cast<double>(c.counts[kPatternHH] + c.counts[kPatternVV]);
  return (anti - corr) / (anti + corr);
}

}  // namespace

TEST_CASE("uniform01 and seed derivation") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(rng);
    CHECK((u >= 0.0 && u < 1.0));
  }
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}

TEST_CASE("pair-number sampling") {
  Rng rng(5);
  const PairNumberSampler vac(0.0, select_n_max(0.0, 1e-9));
  for (int i = 0; i < 100; ++i) CHECK(vac(rng) == 0);

  SUBCASE("mean at tau 1.3") {
    const double tau = 1.3, x = pair_ratio(tau);
    const PairNumberSampler s(tau, select_n_max(tau, 1e-12));
    const int n = 1000000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += s(rng);
    const double var = 2.0 * x / ((1.0 - x) * (1.0 - x));
    CHECK(std::abs(sum / n - 5.77) < 4.0 * std::sqrt(var / n) + 0.005);
    CHECK(std::abs(sum / n - mean_pairs(tau)) < 4.0 * std::sqrt(var / n));
  }
  SUBCASE("vacuum probability at tau 0.8") {
    const double tau = 0.8, x = pair_ratio(tau);
    const PairNumberSampler s(tau, select_n_max(tau, 1e-12));
    const int n = 1000000;
    int zeros = 0;
    for (int i = 0; i < n; ++i) zeros += s(rng) == 0;
    const double p0 = (1.0 - x) * (1.0 - x);
    CHECK(p0 == doctest::Approx(1.0 / std::pow(std::cosh(tau), 4)));
    CHECK(std::abs(static_cast<double>(zeros) / n - p0) < 4.0 * sigma(p0, n));
  }
}

TEST_CASE("occupation sampling") {
  Rng rng(9);
  SUBCASE("diagonal blocks keep m_a = m_b") {
    const auto st = build_pdc_state(1.0, 20);
    for (int n : {1, 4, 9}) {
      const Eigen::MatrixXd w = st.block(n).cwiseAbs2();
      for (int i = 0; i < 200; ++i) {
        const auto [ma, mb] = sample_occupation(w, rng);
        CHECK(ma == mb);
      }
    }
    const auto hv = PolarizationRotation::hv();
    PdcPulseSampler sampler(1.0, 40, hv, hv);
    for (int i = 0; i < 2000; ++i) {
      const auto occ = sampler(rng);
      CHECK(occ[kAv] == occ[kBh]);
      CHECK(occ[kAh] == occ[kBv]);
    }
  }
  SUBCASE("one singlet pair in any joint basis") {
    std::vector<Eigen::MatrixXcd> blocks = {Eigen::MatrixXcd::Zero(1, 1), Eigen::MatrixXcd::Zero(2, 2)};
    blocks[1](0, 0) = 1.0 / std::sqrt(2.0);
    blocks[1](1, 1) = -1.0 / std::sqrt(2.0);
    const PairBlockState singlet(blocks, 0.0);
    std::mt19937_64 urng(4);
    const PolarizationRotation u(testutil::random_unitary(urng));
    const Eigen::MatrixXd w = rotate(singlet, u, u).block(1).cwiseAbs2();
    const int n = 100000;
    std::map<Occupation, int> seen;
    for (int i = 0; i < n; ++i) {
      const auto [ma, mb] = sample_occupation(w, rng);
      ++seen[occupation_of(1, ma, mb)];
    }
    CHECK(seen.size() == 2);
    const int first = seen[Occupation{1, 0, 0, 1}];
    CHECK(std::abs(first / static_cast<double>(n) - 0.5) < 4.0 * sigma(0.5, n));
    CHECK(first + seen[Occupation{0, 1, 1, 0}] == n);
  }
  CHECK_THROWS_AS(sample_occupation(Eigen::MatrixXd::Zero(2, 2), rng), ConfigError);
}

TEST_CASE("simulate_pulses") {
  SUBCASE("no detection without efficiency") {
    PulseConfig cfg;
    cfg.tau = 1.5;
    cfg.etas = Efficiencies::uniform(0.0);
    const auto c = simulate_pulses(cfg, 20000);
    CHECK(c.counts[0] == 20000);
  }
  SUBCASE("single-detector rate at strong pumping") {
    PulseConfig cfg;
    cfg.tau = 2.3;
    cfg.etas = Efficiencies::uniform(0.019);
    cfg.seed = 77;
    const int n = 1000000;
    const auto c = simulate_pulses(cfg, n);
    const double p = single_detector_prob_closed(2.3, 0.019);
    CHECK(p == doctest::Approx(0.3165).epsilon(5e-4));
    CHECK(std::abs(static_cast<double>(c.detector_fired(kAh)) / n - p) < 4.0 * sigma(p, n));
  }
  SUBCASE("empirical pattern frequencies match the exact distribution") {
    struct Case {
      double tau;
      Basis a, b;
      Efficiencies etas;
    };
    const Case cases[] = {
        {0.8, Basis::hv, Basis::pm, Efficiencies::uniform(0.3)},
        {1.3, Basis::pm, Basis::rl, Efficiencies{0.1, 0.2, 0.15, 0.05}},
    };
    std::uint64_t seed = 100;
    for (const auto& k : cases) {
      PulseConfig cfg;
      cfg.tau = k.tau;
      cfg.etas = k.etas;
      cfg.basis_a = k.a;
      cfg.basis_b = k.b;
      cfg.seed = seed++;
      const auto exact = pdc_click_distribution(k.tau, select_n_max(k.tau, 1e-12), k.etas,
                                                PolarizationRotation::of(k.a), PolarizationRotation::of(k.b));
      CHECK(worst_z(simulate_pulses(cfg, 1000000), exact) < 4.0);
    }
  }
  SUBCASE("seed determinism") {
    PulseConfig cfg;
    cfg.tau = 1.1;
    cfg.etas = Efficiencies::uniform(0.2);
    cfg.basis_b = Basis::rl;
    cfg.seed = 3;
    const auto a = simulate_pulses(cfg, 50000), b = simulate_pulses(cfg, 50000);
    CHECK(a.counts == b.counts);
    cfg.seed = 4;
    CHECK(simulate_pulses(cfg, 50000).counts != a.counts);
  }
  SUBCASE("config validation") {
    PulseConfig cfg;
    cfg.rep_rate = 0.0;
    CHECK_THROWS_AS(simulate_pulses(cfg, 10), ConfigError);
    cfg.rep_rate = kDefaultRepRate;
    cfg.background_weight = 1.5;
    CHECK_THROWS_AS(simulate_pulses(cfg, 10), ConfigError);
  }
}

TEST_CASE("ansatz pulses reproduce the ansatz distribution") {
  const double tau = 0.9;
  const Efficiencies etas{0.3, 0.25, 0.2, 0.35};
  const auto pm = PolarizationRotation::pm(), hv = PolarizationRotation::hv();
  const AnsatzPulseSampler s(tau, select_n_max(tau, 1e-12), hv, pm);
  Rng rng(31);
  PatternCounts c;
  c.n_pulses = 1000000;
  for (std::int64_t i = 0; i < c.n_pulses; ++i) ++c.counts[detect(s(rng), etas, rng)];
  CHECK(worst_z(c, ansatz_click_distribution(tau, etas, hv, pm)) < 4.0);
}

TEST_CASE("background weight interpolates the visibility monotonically") {
  const double tau = 1.0;
  const auto etas = Efficiencies::uniform(0.09);
  const auto hv = PolarizationRotation::hv();
  const auto ideal = pdc_click_distribution_closed(tau, etas);
  const auto ansatz = ansatz_click_distribution(tau, etas, hv, hv);
  double previous = 2.0;
  for (double w : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    PulseConfig cfg;
    cfg.tau = tau;
    cfg.etas = etas;
    cfg.background_weight = w;
    cfg.seed = 500;
    const auto c = simulate_pulses(cfg, 1000000);
    const double v = visibility_of(c);
    CHECK(v < previous);
    previous = v;

    double anti = 0.0, corr = 0.0;
    for (ClickPattern p : {kPatternHV, kPatternVH}) anti += w * ansatz[p] + (1.0 - w) * ideal[p];
    for (ClickPattern p : {kPatternHH, kPatternVV}) corr += w * ansatz[p] + (1.0 - w) * ideal[p];
    const double exact = (anti - corr) / (anti + corr);
    const double events = static_cast<double>(c.counts[kPatternHV] + c.counts[kPatternVH] + c.counts[kPatternHH] +
                                              c.counts[kPatternVV]);
    CHECK(std::abs(v - exact) < 4.0 * std::sqrt((1.0 - exact * exact) / events));
  }
}

TEST_CASE("count rows and dataset synthesis") {
  PulseConfig cfg;
  cfg.tau = 0.7;
  cfg.etas = Efficiencies::uniform(0.4);
  cfg.seed = derive_seed(12, 0);
  const auto c = simulate_pulses(cfg, 20000);
  const auto rows = count_rows(c, 2.0, Basis::hv, Basis::hv);
  REQUIRE(rows.size() == 20);
  CHECK(rows[0].pattern == "ah");
  CHECK(rows[0].counts == c.detector_fired(kAh));
  std::int64_t total = 0;
  for (std::size_t i = 4; i < rows.size(); ++i) total += rows[i].counts;
  CHECK(total == 20000);
  for (const auto& r : rows) CHECK((r.counts >= 0 && r.counts <= r.n_pulses));

  // a single energy is the maximum, so tau = tau_max and stream 0 is used
  const auto ds = synthesize_dataset(0.7, cfg.etas, {2.0}, 20000, 12);
  REQUIRE(ds.rows.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(ds.rows[i].counts == rows[i].counts);

  SynthesisOptions opt;
  opt.basis_pairs = {{Basis::hv, Basis::hv}, {Basis::pm, Basis::rl}};
  const auto two = synthesize_dataset(0.7, cfg.etas, {0.5, 2.0}, 1000, 12, opt);
  CHECK(two.rows.size() == 80);
  CHECK(synthesize_dataset(0.7, cfg.etas, {0.5, 2.0}, 1000, 12, opt).rows.back().counts == two.rows.back().counts);

  CHECK_THROWS_AS(synthesize_dataset(0.7, cfg.etas, {}, 10, 1), ConfigError);
  CHECK_THROWS_AS(synthesize_dataset(0.7, cfg.etas, {1.0, -1.0}, 10, 1), ConfigError);
}

TEST_CASE("fan-out simulation matches the closed form") {
  const double tau = 1.2;
  const auto c = simulate_fanout(tau, 0.4, 0.3, 1000000, 8);
  const auto p = fanout_probs_closed(tau, 0.4, 0.3);
  const double n = static_cast<double>(c.n_pulses);
  CHECK(std::abs(c.three_fold / n - p.three_fold) < 4.0 * sigma(p.three_fold, n));
  CHECK(std::abs(c.four_fold / n - p.four_fold) < 4.0 * sigma(p.four_fold, n));
}

TEST_CASE("multi-pair events rise more steeply with pump energy") {
  // exact slopes at low pumping approach 1, 2, 3, 4
  auto slopes = [](double t1, double t2, double eta) {
    const auto etas = Efficiencies::uniform(eta);
    const auto d1 = pdc_click_distribution_closed(t1, etas), d2 = pdc_click_distribution_closed(t2, etas);
    const auto f1 = fanout_probs_closed(t1, eta, eta), f2 = fanout_probs_closed(t2, eta, eta);
    // energy scales as tau^2
    const double de = 2.0 * std::log(t2 / t1);
    return std::array<double, 4>{std::log(d2[kPatternHV] / d1[kPatternHV]) / de,
                                 std::log(d2[kPatternHH] / d1[kPatternHH]) / de,
                                 std::log(f2.three_fold / f1.three_fold) / de,
                                 std::log(f2.four_fold / f1.four_fold) / de};
  };
  const auto exact = slopes(0.01, 0.0101, 0.1);
  for (int k = 0; k < 4; ++k) CHECK(exact[static_cast<std::size_t>(k)] == doctest::Approx(k + 1.0).epsilon(1e-3));

  // the same ordering in simulated counts
  const double tau_max = 0.5;
  const std::vector<double> energies = {0.25, 1.0};
  const auto ds = synthesize_dataset(tau_max, Efficiencies::uniform(0.5), energies, 2000000, 41);
  std::map<std::pair<double, std::string>, double> count;
  for (const auto& r : ds.rows) count[{r.pulse_energy_uJ, r.pattern}] = static_cast<double>(r.counts);
  const double de = std::log(4.0);
  const double one_pair = std::log(count[{1.0, "1001"}] / count[{0.25, "1001"}]) / de;
  const double two_pair = std::log(count[{1.0, "1010"}] / count[{0.25, "1010"}]) / de;
  const auto lo = simulate_fanout(tau_max * 0.5, 0.5, 0.5, 2000000, 42);
  const auto hi = simulate_fanout(tau_max, 0.5, 0.5, 2000000, 43);
  const double three = std::log(static_cast<double>(hi.three_fold) / lo.three_fold) / de;
  const double four = std::log(static_cast<double>(hi.four_fold) / lo.four_fold) / de;
  CHECK(one_pair < two_pair);
  CHECK(two_pair < three);
  CHECK(three < four);
}

TEST_CASE("single counts and one-pair coincidences rise in parallel") {
  const auto ds = synthesize_dataset(0.3, Efficiencies::uniform(0.5), {0.25, 1.0}, 1000000, 44);
  std::map<std::pair<double, std::string>, double> count;
  for (const auto& r : ds.rows) count[{r.pulse_energy_uJ, r.pattern}] = static_cast<double>(r.counts);
  const double de = std::log(4.0);
  const double single = std::log(count[{1.0, "ah"}] / count[{0.25, "ah"}]) / de;
  const double one_pair = std::log(count[{1.0, "1001"}] / count[{0.25, "1001"}]) / de;
  CHECK(single == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(single - one_pair) < 0.1);
}
