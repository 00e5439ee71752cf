#include <cmath>

#include "doctest.h"
#include "spdc/fitting.hpp"

using namespace spdc;

namespace {

const std::vector<std::string> kSingles = {"ah", "av", "bh", "bv"};
const std::vector<std::string> kWithMasks = {"ah", "av", "bh", "bv", "1001", "0110", "1010", "0101", "1111"};

// Counts equal to the rounded model expectation.
CountDataset model_dataset(double tau_max, const Efficiencies& etas, const std::vector<double>& energies,
                           std::int64_t n_pulses, const std::vector<std::string>& patterns,
                           Basis a = Basis::hv, Basis b = Basis::hv) {
  const double e_max = *std::max_element(energies.begin(), energies.end());
  CountDataset ds;
  for (double e : energies) {
    for (const auto& name : patterns) {
      const double p = predict_rate(tau_max, etas, e, e_max, RatePattern::parse(name), a, b);
      ds.rows.push_back({e, a, b, name, std::llround(p * static_cast<double>(n_pulses)), n_pulses});
    }
  }
  return ds;
}

std::vector<double> energy_grid(int n, double e_max) {
  std::vector<double> out;
  for (int i = 1; i <= n; ++i) out.push_back(e_max * i / n);
  return out;
}

}  // namespace

TEST_CASE("pattern names") {
  const auto s = RatePattern::parse("bv");
  CHECK(s.single);
  CHECK(s.detector == kBv);
  const auto m = RatePattern::parse("1001");
  CHECK_FALSE(m.single);
  CHECK(m.mask == kPatternHV);
  CHECK_THROWS_AS(RatePattern::parse("xx"), ConfigError);
}

TEST_CASE("predict_rate") {
  const auto etas = Efficiencies::uniform(0.019);
  CHECK(predict_rate(2.3, etas, 1.0, 1.0, RatePattern::parse("ah")) == doctest::Approx(0.3165).epsilon(5e-4));
  CHECK(predict_rate(2.3, etas, 1.0, 1.0, RatePattern::parse("ah")) == single_detector_prob_closed(2.3, 0.019));

  for (const auto& name : kWithMasks) {
    if (name == "0000") continue;
    CHECK(predict_rate(2.3, etas, 1e-14, 1.0, RatePattern::parse(name)) < 1e-14);
  }

  // the sixteen exact masks are complementary
  double firing = 0.0;
  for (unsigned p = 1; p < 16; ++p) {
    firing += predict_rate(2.3, etas, 1.0, 1.0, RatePattern::parse(pattern_mask(static_cast<ClickPattern>(p))));
  }
  const double silent = predict_rate(2.3, etas, 1.0, 1.0, RatePattern::parse("0000"));
  CHECK(std::abs(silent + firing - 1.0) < 1e-9);

  // mixed bases go through the block model
  const double mixed = predict_rate(0.9, etas, 1.0, 1.0, RatePattern::parse("1001"), Basis::hv, Basis::pm);
  const auto d = pdc_click_distribution(0.9, select_n_max(0.9, 1e-9), etas, PolarizationRotation::hv(),
                                        PolarizationRotation::pm());
  CHECK(mixed == doctest::Approx(d[kPatternHV]).epsilon(1e-12));

  CHECK_THROWS_AS(predict_rate(2.3, etas, 0.0, 1.0, RatePattern::parse("ah")), ConfigError);
  CHECK_THROWS_AS(predict_rate(2.3, etas, 1.5, 1.0, RatePattern::parse("ah")), ConfigError);
}

TEST_CASE("noiseless recovery") {
  const auto truth = Efficiencies::uniform(0.05);
  const auto ds = model_dataset(1.0, truth, energy_grid(8, 1.0), 1000000000000000LL, kWithMasks);
  const auto r = fit(ds);
  CHECK(r.converged);
  CHECK(r.tau_max == doctest::Approx(1.0).epsilon(1e-6));
  for (int d = 0; d < 4; ++d) CHECK(r.etas[d] == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(r.n_points == static_cast<int>(ds.rows.size()));
  CHECK(r.tau_max_err >= 0.0);
  for (double e : r.eta_err) CHECK(e >= 0.0);
}

TEST_CASE("objective trace decreases monotonically") {
  const Efficiencies truth{0.03, 0.05, 0.04, 0.06};
  auto ds = synthesize_dataset(1.8, truth, energy_grid(6, 3.0), 200000, 5);
  const auto r = fit(ds);
  REQUIRE(r.objective_trace.size() > 2);
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
    CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);
  }
  CHECK(r.residual == doctest::Approx(r.objective_trace.back()));
  CHECK(r.residual == doctest::Approx(fit_objective(ds, {r.tau_max, r.etas})).epsilon(1e-12));

  SUBCASE("refitting the fitted model's own predictions") {
    const auto again = fit(model_dataset(r.tau_max, r.etas, energy_grid(6, 3.0), 1000000000000000LL, kWithMasks));
    CHECK(again.tau_max == doctest::Approx(r.tau_max).epsilon(1e-8));
    for (int d = 0; d < 4; ++d) CHECK(again.etas[d] == doctest::Approx(r.etas[d]).epsilon(1e-8));
  }
}

TEST_CASE("singles alone identify tau_max and the efficiencies") {
  const auto ds = model_dataset(2.0, Efficiencies{0.02, 0.025, 0.018, 0.03}, energy_grid(10, 1.0), 1000000000LL,
                                kSingles);
  const auto r = fit(ds);
  CHECK(r.converged);
  CHECK(r.tau_max == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(std::isfinite(r.hessian_condition));
  CHECK(r.hessian_condition > 1.0);
  CHECK(r.hessian_condition < 1e10);
}

TEST_CASE("unidentifiable datasets are rejected") {
  const auto etas = Efficiencies::uniform(0.05);
  CHECK_THROWS_AS(fit(model_dataset(1.0, etas, {1.0}, 1000000, kWithMasks)), Unidentifiable);
  CHECK_THROWS_AS(fit(model_dataset(1.0, etas, {0.5, 1.0}, 1000000, {"1001"})), Unidentifiable);
  CHECK_THROWS_AS(fit(model_dataset(1.0, etas, {0.5, 1.0}, 1000000, {"ah", "av", "bh"})), Unidentifiable);
  auto empty = model_dataset(1.0, etas, {0.5, 1.0}, 1000000, kWithMasks);
  for (auto& r : empty.rows) r.counts = 0;
  CHECK_THROWS_AS(fit(empty), Unidentifiable);
  auto bad = model_dataset(1.0, etas, {0.5, 1.0}, 1000, kWithMasks);
  bad.rows[0].counts = 2000;
  CHECK_THROWS_AS(fit(bad), ConfigError);
}

TEST_CASE("iteration cap reports non-convergence with the best point") {
  const auto ds = model_dataset(1.0, Efficiencies::uniform(0.05), energy_grid(5, 1.0), 1000000000LL, kWithMasks);
  FitOptions opt;
  opt.max_simplex_iterations = 3;
  opt.refine = false;
  const ModelParams start{0.5, Efficiencies::uniform(0.2)};
  const auto r = fit(ds, start, opt);
  CHECK_FALSE(r.converged);
  CHECK(r.residual <= fit_objective(ds, start));
}

TEST_CASE("fit is deterministic") {
  const auto ds = synthesize_dataset(1.2, Efficiencies::uniform(0.04), energy_grid(5, 2.0), 100000, 9);
  const auto a = fit(ds), b = fit(ds);
  CHECK(a.tau_max == b.tau_max);
  CHECK(a.residual == b.residual);
  CHECK(a.objective_trace == b.objective_trace);
}

TEST_CASE("fits in the three same-basis settings agree") {
  SynthesisOptions opt;
  std::vector<FitResult> fits;
  std::uint64_t seed = 70;
  for (Basis b : kAllBases) {
    opt.basis_pairs = {{b, b}};
    fits.push_back(fit(synthesize_dataset(2.3, Efficiencies::uniform(0.019), energy_grid(12, 1.0), 200000, seed++, opt)));
  }
  for (std::size_t i = 0; i < fits.size(); ++i) {
    CHECK(fits[i].converged);
    for (std::size_t j = i + 1; j < fits.size(); ++j) {
      const double joint = std::hypot(fits[i].tau_max_err, fits[j].tau_max_err);
      CHECK(std::abs(fits[i].tau_max - fits[j].tau_max) < 3.0 * joint);
    }
  }
}
