#include "spdc/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "spdc/io.hpp"

namespace spdc::cli {

using nlohmann::json;

namespace {

double number_from(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + text + "'");
  }
  if (used != text.size()) throw ConfigError("not a number: '" + text + "'");
  return v;
}

std::vector<double> numbers_of(const json& j, const char* key) {
  if (j.is_number()) return {j.get<double>()};
  if (j.is_string()) return parse_number_list(j.get<std::string>());
  if (j.is_array()) {
    std::vector<double> out;
    for (const auto& v : j) {
      if (!v.is_number()) throw ConfigError(std::string("'") + key + "' entries must be numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }
  throw ConfigError(std::string("'") + key + "' must be a number, list or range string");
}

std::vector<BasisPair> all_pairs() {
  std::vector<BasisPair> out;
  for (Basis a : kAllBases)
    for (Basis b : kAllBases) out.emplace_back(a, b);
  return out;
}

std::vector<BasisPair> bases_of(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nine" || s == "all") return all_pairs();
    return {parse_basis_pair(s)};
  }
  if (j.is_array() && j.size() == 2 && j[0].is_string() && j[1].is_string() &&
      j[0].get<std::string>().find('/') == std::string::npos) {
    return {{parse_basis(j[0].get<std::string>()), parse_basis(j[1].get<std::string>())}};
  }
  if (j.is_array()) {
    std::vector<BasisPair> out;
    for (const auto& v : j) {
      if (!v.is_string()) throw ConfigError("'bases' entries must be strings like \"hv/pm\"");
      out.push_back(parse_basis_pair(v.get<std::string>()));
    }
    return out;
  }
  throw ConfigError("'bases' must be a pair of basis names, a list of \"a/b\" strings or \"nine\"");
}

std::string pair_name(const BasisPair& p) {
  return std::string(to_string(p.first)) + "/" + std::string(to_string(p.second));
}

std::string stem_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) {
    return path.substr(0, dot);
  }
  return path;
}

std::string text_of(double v) { return std::isfinite(v) ? io::format_double(v) : "nan"; }

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  return f;
}

void write_config_echo(const RunConfig& cfg, const std::string& command) {
  if (cfg.output_path.empty()) return;
  json j = cfg.to_json();
  j["command"] = command;
  j["schema_version"] = io::kSchemaVersion;
  j["monte_carlo_workers"] = 1;
  auto f = open_output(cfg.output_path + ".config.json");
  f << j.dump(2) << '\n';
}

// Writes to the configured output file, or to `out` when none is set.
template <typename Fn>
void emit(const RunConfig& cfg, std::ostream& out, Fn&& write) {
  if (cfg.output_path.empty()) {
    write(out);
  } else {
    auto f = open_output(cfg.output_path);
    write(f);
  }
}

const std::string& require_format(const std::string& fmt, std::initializer_list<const char*> allowed,
                                  const char* command) {
  for (const char* a : allowed) {
    if (fmt == a) return fmt;
  }
  throw ConfigError("format '" + fmt + "' is not supported by " + command);
}

json matrix_json(const Eigen::Matrix4d& m) {
  json rows = json::array();
  for (int i = 0; i < 4; ++i) {
    json row = json::array();
    for (int k = 0; k < 4; ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

double max_abs_diff(const ClickDistribution& a, const ClickDistribution& b) {
  double m = 0.0;
  for (unsigned p = 0; p < 16; ++p) m = std::max(m, std::abs(a.prob[p] - b.prob[p]));
  return m;
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string s; std::getline(ss, s, ':');) parts.push_back(s);
    if (parts.size() != 3) throw ConfigError("range must be start:stop:step, got '" + text + "'");
    const double start = number_from(parts[0]), stop = number_from(parts[1]),
                 step = number_from(parts[2]);
    if (!(step > 0.0) || !(stop >= start)) throw ConfigError("range needs step > 0 and stop >= start");
    const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
    if (count > 1000000) throw ConfigError("range has too many points");
    std::vector<double> out;
    for (long i = 0; i < count; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
  }
  std::vector<double> out;
  for (const auto& f : io::split_csv_line(text)) {
    if (f.empty()) throw ConfigError("empty entry in list '" + text + "'");
    out.push_back(number_from(f));
  }
  return out;
}

Efficiencies parse_etas(const std::string& text) {
  const auto v = parse_number_list(text);
  if (v.size() == 1) return Efficiencies::uniform(v[0]);
  if (v.size() == 4) return Efficiencies::from_array({v[0], v[1], v[2], v[3]});
  throw ConfigError("--eta takes one value or four comma-separated values");
}

BasisPair parse_basis_pair(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) throw ConfigError("basis pair must look like hv/pm, got '" + text + "'");
  return {parse_basis(text.substr(0, slash)), parse_basis(text.substr(slash + 1))};
}

json load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config " + path + " must hold a JSON object");
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const char* const known[] = {"tau", "tau_max", "etas", "bases", "energies", "n_pulses",
                                      "seed", "tail_tol", "output_path", "input_path", "format",
                                      "eta_grid", "background_weight", "rep_rate", "fanout",
                                      "max_iterations", "command", "schema_version", "monte_carlo_workers"};
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  RunConfig c;
  try {
    if (j.contains("tau")) c.taus = numbers_of(j["tau"], "tau");
    if (j.contains("tau_max")) c.tau_max = j["tau_max"].get<double>();
    if (j.contains("etas")) {
      const auto v = numbers_of(j["etas"], "etas");
      if (v.size() == 1) {
        c.etas = Efficiencies::uniform(v[0]);
      } else if (v.size() == 4) {
        c.etas = Efficiencies::from_array({v[0], v[1], v[2], v[3]});
      } else {
        throw ConfigError("'etas' takes one value or four");
      }
    }
    if (j.contains("bases")) c.bases = bases_of(j["bases"]);
    if (j.contains("energies")) c.energies = numbers_of(j["energies"], "energies");
    if (j.contains("n_pulses")) {
      const double n = j["n_pulses"].get<double>();
      if (!(n >= 1.0 && n <= 9e15) || n != std::floor(n)) {
        throw ConfigError("n_pulses must be a positive integer");
      }
      c.n_pulses = static_cast<std::int64_t>(n);
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("tail_tol")) c.tail_tol = j["tail_tol"].get<double>();
    if (j.contains("output_path")) c.output_path = j["output_path"].get<std::string>();
    if (j.contains("input_path")) c.input_path = j["input_path"].get<std::string>();
    if (j.contains("format")) c.format = j["format"].get<std::string>();
    if (j.contains("eta_grid")) c.eta_grid = numbers_of(j["eta_grid"], "eta_grid");
    if (j.contains("background_weight")) c.background_weight = j["background_weight"].get<double>();
    if (j.contains("rep_rate")) c.rep_rate = j["rep_rate"].get<double>();
    if (j.contains("fanout")) c.fanout = j["fanout"].get<bool>();
    if (j.contains("max_iterations")) c.max_iterations = j["max_iterations"].get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

json RunConfig::to_json() const {
  json j;
  if (!taus.empty()) j["tau"] = taus;
  if (tau_max) j["tau_max"] = *tau_max;
  if (etas) {
    const auto e = etas->as_array();
    j["etas"] = std::vector<double>(e.begin(), e.end());
  }
  if (!bases.empty()) {
    std::vector<std::string> b;
    for (const auto& p : bases) b.push_back(pair_name(p));
    j["bases"] = b;
  }
  if (!energies.empty()) j["energies"] = energies;
  j["n_pulses"] = n_pulses;
  j["seed"] = seed;
  j["tail_tol"] = tail_tol;
  if (!output_path.empty()) j["output_path"] = output_path;
  if (!input_path.empty()) j["input_path"] = input_path;
  if (!format.empty()) j["format"] = format;
  if (!eta_grid.empty()) j["eta_grid"] = eta_grid;
  j["background_weight"] = background_weight;
  j["rep_rate"] = rep_rate;
  j["fanout"] = fanout;
  if (max_iterations > 0) j["max_iterations"] = max_iterations;
  return j;
}

void RunConfig::validate() const {
  for (double t : taus) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("tau values must be finite and >= 0");
  }
  if (tau_max && !(*tau_max > 0.0 && std::isfinite(*tau_max))) {
    throw ConfigError("tau_max must be positive");
  }
  if (etas) etas->validate();
  for (double e : energies) {
    if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("energies must be positive");
  }
  for (double e : eta_grid) {
    if (!(e > 0.0 && e <= 1.0)) throw ConfigError("eta_grid values must lie in (0, 1]");
  }
  if (n_pulses < 1) throw ConfigError("n_pulses must be >= 1");
  if (!(tail_tol >= 0.0 && tail_tol < 1.0)) throw ConfigError("tail_tol must lie in [0, 1)");
  if (!format.empty() && format != "csv" && format != "json" && format != "kv" && format != "text") {
    throw ConfigError("format must be one of csv, json, kv, text");
  }
  if (!(background_weight >= 0.0 && background_weight <= 1.0)) {
    throw ConfigError("background_weight must lie in [0, 1]");
  }
  if (!(rep_rate > 0.0) || !std::isfinite(rep_rate)) throw ConfigError("rep_rate must be positive");
  if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
}

Efficiencies RunConfig::etas_or_default() const { return etas.value_or(Efficiencies::uniform(0.019)); }

double RunConfig::tail_tol_for(double tau) const {
  return tail_tol > 0.0 ? tail_tol : default_tail_tol(tau);
}

SweepRow sweep_point(double tau, const Efficiencies& etas, double tail_tol) {
  SweepRow r;
  r.tau = tau;
  const int n_max = select_n_max(tau, tail_tol);
  r.tail_mass = truncation_tail(tau, n_max);
  r.mean_pairs = mean_pairs(tau);
  r.p_single = single_detector_prob_closed(tau, etas.ah);
  const auto closed = pdc_click_distribution_closed(tau, etas);
  r.p11 = subspace_probs(closed, Basis::hv, Basis::hv).P_11;
  r.subspace_ratio = subspace_ratio(closed);
  const auto nine = pdc_nine_basis_probs(tau, n_max, etas);
  r.visibilities = VisibilitySet::from(nine);
  const auto crit = evaluate_criteria(nine);
  r.c1 = crit.c1;
  r.c2 = crit.c2;
  r.min_pt_eig = crit.min_pt_eigenvalue;
  const auto hv = PolarizationRotation::hv();
  r.ansatz_visibility =
      visibility(subspace_probs(ansatz_click_distribution(tau, etas, hv, hv), Basis::hv, Basis::hv));
  return r;
}

OracleLine oracle_point(double tau, double eta, double tail_tol) {
  OracleLine o;
  o.tau = tau;
  o.eta = eta;
  o.n_max = select_n_max(tau, tail_tol);
  o.tail_mass = truncation_tail(tau, o.n_max);
  const auto etas = Efficiencies::uniform(eta);
  const auto state = build_pdc_state(tau, o.n_max);
  const auto block = click_distribution(state, etas);
  const double single = single_detector_prob_closed(tau, eta);
  for (int d = 0; d < 4; ++d) {
    o.single_vs_block = std::max(o.single_vs_block, std::abs(block.marginal(d) - single));
  }
  const auto closed = pdc_click_distribution_closed(tau, etas);
  o.closed_vs_block = max_abs_diff(closed, block);
  for (Basis b : kAllBases) {
    const auto u = PolarizationRotation::of(b);
    o.fast_vs_closed =
        std::max(o.fast_vs_closed, max_abs_diff(pdc_click_distribution(tau, o.n_max, etas, u, u), closed));
  }
  const auto pm = PolarizationRotation::pm(), rl = PolarizationRotation::rl();
  o.fast_vs_general = max_abs_diff(pdc_click_distribution(tau, o.n_max, etas, pm, rl),
                                   click_distribution(state, etas, pm, rl));
  const double bound = o.tail_mass + 1e-9;
  o.pass = o.single_vs_block <= bound && o.closed_vs_block <= bound && o.fast_vs_closed <= bound &&
           o.fast_vs_general <= bound;
  return o;
}

NineBasisProbs nine_basis_probs_from_counts(const CountDataset& data, std::optional<double> energy) {
  if (data.rows.empty()) throw ConfigError("dataset is empty");
  double e = 0.0;
  if (energy) {
    e = *energy;
  } else {
    for (const auto& r : data.rows) e = std::max(e, r.pulse_energy_uJ);
  }
  // (pair) -> [hh, hv, vh, vv] fractions, NaN while missing
  std::map<BasisPair, std::array<double, 4>> found;
  const ClickPattern wanted[4] = {kPatternHH, kPatternHV, kPatternVH, kPatternVV};
  for (const auto& r : data.rows) {
    if (r.pulse_energy_uJ != e || r.pattern.size() != 4) continue;
    const ClickPattern p = parse_pattern_mask(r.pattern);
    for (int k = 0; k < 4; ++k) {
      if (p != wanted[k]) continue;
      auto [it, fresh] = found.try_emplace({r.basis_a, r.basis_b});
      if (fresh) it->second.fill(NAN);
      it->second[static_cast<std::size_t>(k)] =
          static_cast<double>(r.counts) / static_cast<double>(r.n_pulses);
    }
  }
  NineBasisProbs out;
  for (const auto& pair : all_pairs()) {
    const auto it = found.find(pair);
    if (it == found.end() || std::any_of(it->second.begin(), it->second.end(),
                                         [](double v) { return std::isnan(v); })) {
      throw ConfigError("missing coincidence data for basis pair " + pair_name(pair) +
                        " at energy " + io::format_double(e));
    }
    const auto& v = it->second;
    out.emplace(pair, SubspaceProbs::from_unnormalized(pair.first, pair.second, v[0], v[1], v[2], v[3]));
  }
  return out;
}

json tomography_report(const NineBasisProbs& probs) {
  const auto rho = tomography(probs);
  const auto crit = evaluate_criteria(probs);
  json j;
  j["schema_version"] = io::kSchemaVersion;
  json p = json::object();
  for (const auto& [pair, sp] : probs) {
    p[pair_name(pair)] = {{"p_hh", sp.p_hh}, {"p_hv", sp.p_hv}, {"p_vh", sp.p_vh},
                          {"p_vv", sp.p_vv}, {"P_11", sp.P_11}};
  }
  j["probabilities"] = p;
  j["basis_order"] = {"hh", "hv", "vh", "vv"};
  j["rho_real"] = matrix_json(rho.rho.real());
  j["rho_imag"] = matrix_json(rho.rho.imag());
  const auto spec = partial_transpose_spectrum(rho.rho);
  j["pt_spectrum"] = std::vector<double>(spec.data(), spec.data() + 4);
  j["min_eigenvalue"] = rho.min_eigenvalue();
  j["C1"] = crit.c1 ? json(*crit.c1) : json(nullptr);
  j["C2"] = crit.c2;
  j["min_pt_eig"] = crit.min_pt_eigenvalue;
  const bool entangled = crit.entangled_by_c1 || crit.entangled_by_c2 || crit.entangled_by_ppt;
  j["flags"] = {{"entangled_by_c1", crit.entangled_by_c1},
                {"entangled_by_c2", crit.entangled_by_c2},
                {"entangled_by_ppt", crit.entangled_by_ppt},
                {"ppt_boundary", crit.ppt_boundary},
                {"separable_by_all_criteria", !entangled},
                {"c1_applicable", crit.c1.has_value()},
                {"physical", rho.min_eigenvalue() >= -kPptTolerance}};
  j["warnings"] = rho.warnings;
  return j;
}

json fit_report(const FitResult& f) {
  json j;
  j["schema_version"] = io::kSchemaVersion;
  j["tau_max"] = f.tau_max;
  j["tau_max_err"] = f.tau_max_err;
  const auto e = f.etas.as_array();
  for (int d = 0; d < 4; ++d) {
    const std::string name(kDetectorNames[static_cast<std::size_t>(d)]);
    j["eta_" + name] = e[static_cast<std::size_t>(d)];
    j["eta_" + name + "_err"] = f.eta_err[static_cast<std::size_t>(d)];
  }
  j["residual"] = f.residual;
  j["n_points"] = f.n_points;
  j["converged"] = f.converged;
  j["iterations"] = f.iterations;
  j["hessian_condition"] = f.hessian_condition;
  j["weighting"] = f.weighting;
  return j;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  if (cfg.taus.empty()) throw ConfigError("sweep needs a tau grid (--tau)");
  const std::string fmt = require_format(cfg.format.empty() ? "csv" : cfg.format, {"csv", "json"}, "sweep");
  const auto etas = cfg.etas_or_default();
  std::vector<SweepRow> rows;
  for (double tau : cfg.taus) rows.push_back(sweep_point(tau, etas, cfg.tail_tol_for(tau)));

  auto values = [](const SweepRow& r) {
    std::vector<double> v = {r.tau, r.mean_pairs, r.p_single, r.p11, r.subspace_ratio};
    for (Basis a : kAllBases)
      for (Basis b : kAllBases) v.push_back(r.visibilities(a, b));
    v.insert(v.end(), {r.c1.value_or(NAN), r.c2, r.min_pt_eig, r.ansatz_visibility, r.tail_mass});
    return v;
  };
  emit(cfg, out, [&](std::ostream& os) {
    if (fmt == "csv") {
      os << io::kSweepHeader << '\n';
      for (const auto& r : rows) {
        const auto v = values(r);
        for (std::size_t k = 0; k < v.size(); ++k) os << (k ? "," : "") << text_of(v[k]);
        os << '\n';
      }
    } else {
      json j;
      j["schema_version"] = io::kSchemaVersion;
      j["columns"] = io::split_csv_line(io::kSweepHeader);
      j["rows"] = json::array();
      for (const auto& r : rows) {
        json row = json::array();
        for (double v : values(r)) row.push_back(std::isfinite(v) ? json(v) : json(nullptr));
        j["rows"].push_back(row);
      }
      os << j.dump(2) << '\n';
    }
  });
  write_config_echo(cfg, "sweep");
  return kExitOk;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  std::optional<double> tau_max = cfg.tau_max;
  if (!tau_max && cfg.taus.size() == 1) tau_max = cfg.taus.front();
  if (!tau_max) throw ConfigError("simulate needs --tau-max");
  if (cfg.energies.empty()) throw ConfigError("simulate needs --energies");
  require_format(cfg.format.empty() ? "csv" : cfg.format, {"csv"}, "simulate");
  const auto etas = cfg.etas_or_default();
  SynthesisOptions opt;
  if (!cfg.bases.empty()) opt.basis_pairs = cfg.bases;
  opt.background_weight = cfg.background_weight;
  opt.tail_tol = cfg.tail_tol;
  const auto data = synthesize_dataset(*tau_max, etas, cfg.energies, cfg.n_pulses, cfg.seed, opt);
  emit(cfg, out, [&](std::ostream& os) { io::write_counts_csv(os, data); });
  if (cfg.output_path.empty()) return kExitOk;

  const std::string stem = stem_of(cfg.output_path);
  {
    auto f = open_output(stem + "_rates.csv");
    f << "pulse_energy_uJ,basis_a,basis_b,pattern,rate_per_s\n";
    for (const auto& r : data.rows) {
      f << io::format_double(r.pulse_energy_uJ) << ',' << to_string(r.basis_a) << ','
        << to_string(r.basis_b) << ',' << r.pattern << ','
        << io::format_double(cfg.rep_rate * static_cast<double>(r.counts) /
                             static_cast<double>(r.n_pulses))
        << '\n';
    }
  }
  if (cfg.fanout) {
    auto f = open_output(stem + "_fanout.csv");
    f << "pulse_energy_uJ,tau,three_fold,four_fold,n_pulses,p_three_fold,p_four_fold\n";
    const double e_max = *std::max_element(cfg.energies.begin(), cfg.energies.end());
    std::uint64_t stream = 1000000;
    for (double e : cfg.energies) {
      const double tau = InteractionParams::from_pump(*tau_max, e, e_max).tau;
      const auto c = simulate_fanout(tau, etas.ah, etas.bh, cfg.n_pulses, derive_seed(cfg.seed, stream++));
      const auto p = fanout_probs_closed(tau, etas.ah, etas.bh);
      f << io::format_double(e) << ',' << io::format_double(tau) << ',' << c.three_fold << ','
        << c.four_fold << ',' << c.n_pulses << ',' << io::format_double(p.three_fold) << ','
        << io::format_double(p.four_fold) << '\n';
    }
  }
  write_config_echo(cfg, "simulate");
  return kExitOk;
}

int cmd_fit(const RunConfig& cfg, std::ostream& out) {
  if (cfg.input_path.empty()) throw ConfigError("fit needs a count file");
  const std::string fmt = require_format(cfg.format.empty() ? "kv" : cfg.format, {"kv", "json"}, "fit");
  const auto data = io::read_counts_file(cfg.input_path);
  std::optional<ModelParams> guess;
  if (cfg.tau_max || cfg.etas) {
    ModelParams g = initial_guess(data);
    if (cfg.tau_max) g.tau_max = *cfg.tau_max;
    if (cfg.etas) g.etas = *cfg.etas;
    guess = g;
  }
  FitOptions options;
  if (cfg.max_iterations > 0) {
    options.max_simplex_iterations = cfg.max_iterations;
    options.max_refine_iterations = cfg.max_iterations;
  }
  const auto result = fit(data, guess, options);
  const json report = fit_report(result);
  emit(cfg, out, [&](std::ostream& os) {
    if (fmt == "json") {
      os << report.dump(2) << '\n';
      return;
    }
    for (const auto& [key, value] : report.items()) {
      os << key << '=';
      if (value.is_string()) {
        os << value.get<std::string>();
      } else if (value.is_number_float()) {
        os << text_of(value.get<double>());
      } else {
        os << value.dump();
      }
      os << '\n';
    }
  });
  write_config_echo(cfg, "fit");
  return result.converged ? kExitOk : kExitFitNotConverged;
}

int cmd_tomo(const RunConfig& cfg, std::ostream& out) {
  require_format(cfg.format.empty() ? "json" : cfg.format, {"json"}, "tomo");
  NineBasisProbs probs;
  json source;
  if (!cfg.input_path.empty()) {
    std::optional<double> energy;
    if (cfg.energies.size() == 1) energy = cfg.energies.front();
    if (cfg.energies.size() > 1) throw ConfigError("tomo selects at most one energy");
    probs = nine_basis_probs_from_counts(io::read_counts_file(cfg.input_path), energy);
    source = {{"counts", cfg.input_path}};
  } else if (cfg.taus.size() == 1) {
    const double tau = cfg.taus.front();
    const auto etas = cfg.etas_or_default();
    probs = pdc_nine_basis_probs(tau, select_n_max(tau, cfg.tail_tol_for(tau)), etas);
    const auto e = etas.as_array();
    source = {{"model_tau", tau}, {"etas", std::vector<double>(e.begin(), e.end())}};
  } else {
    throw ConfigError("tomo needs a count file or a single --tau");
  }
  json report = tomography_report(probs);
  report["source"] = source;
  emit(cfg, out, [&](std::ostream& os) { os << report.dump(2) << '\n'; });
  write_config_echo(cfg, "tomo");
  return kExitOk;
}

int cmd_oracle_check(const RunConfig& cfg, std::ostream& out) {
  const std::string fmt = require_format(cfg.format.empty() ? "text" : cfg.format, {"text", "json"},
                                         "oracle-check");
  const std::vector<double> taus = cfg.taus.empty() ? std::vector<double>{0.2, 0.5, 1.0, 1.3, 1.85} : cfg.taus;
  std::vector<double> etas = cfg.eta_grid;
  if (etas.empty() && cfg.etas) {
    const auto e = cfg.etas->as_array();
    if (std::adjacent_find(e.begin(), e.end(), std::not_equal_to<>()) != e.end()) {
      throw ConfigError("oracle-check uses equal efficiencies; pass --eta-grid");
    }
    etas = {e[0]};
  }
  if (etas.empty()) etas = {0.019, 0.09, 0.5, 1.0};
  for (double e : etas) {
    if (!(e > 0.0 && e <= 1.0)) throw ConfigError("oracle-check efficiencies must lie in (0, 1]");
  }

  std::vector<OracleLine> lines;
  for (double tau : taus)
    for (double eta : etas) lines.push_back(oracle_point(tau, eta, cfg.tail_tol_for(tau)));
  const bool all_pass = std::all_of(lines.begin(), lines.end(), [](const auto& l) { return l.pass; });

  emit(cfg, out, [&](std::ostream& os) {
    if (fmt == "json") {
      json j;
      j["schema_version"] = io::kSchemaVersion;
      j["pass"] = all_pass;
      j["points"] = json::array();
      for (const auto& l : lines) {
        j["points"].push_back({{"tau", l.tau}, {"eta", l.eta}, {"n_max", l.n_max},
                               {"tail_mass", l.tail_mass}, {"single_vs_block", l.single_vs_block},
                               {"closed_vs_block", l.closed_vs_block},
                               {"fast_vs_closed", l.fast_vs_closed},
                               {"fast_vs_general", l.fast_vs_general}, {"pass", l.pass}});
      }
      os << j.dump(2) << '\n';
      return;
    }
    os << std::scientific << std::setprecision(3);
    for (const auto& l : lines) {
      os << (l.pass ? "PASS" : "FAIL") << "  tau=" << io::format_double(l.tau)
         << " eta=" << io::format_double(l.eta) << " n_max=" << l.n_max << " tail=" << l.tail_mass
         << " single=" << l.single_vs_block << " closed=" << l.closed_vs_block
         << " fast=" << l.fast_vs_closed << " general=" << l.fast_vs_general << '\n';
    }
    os << (all_pass ? "oracle-check: all points pass" : "oracle-check: discrepancies above bound")
       << '\n';
  });
  write_config_echo(cfg, "oracle-check");
  return all_pass ? kExitOk : kExitCheckFailed;
}

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (name == "sweep") return cmd_sweep(cfg, out);
    if (name == "simulate") return cmd_simulate(cfg, out);
    if (name == "fit") return cmd_fit(cfg, out);
    if (name == "tomo") return cmd_tomo(cfg, out);
    if (name == "oracle-check") return cmd_oracle_check(cfg, out);
    err << "error: unknown command '" << name << "'\n";
    return kExitConfig;
  } catch (const NumericInfeasible& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const EmptySubspace& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Unidentifiable& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace spdc::cli
