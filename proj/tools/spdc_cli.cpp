#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spdc/commands.hpp"

namespace {

using nlohmann::json;
using namespace spdc;

struct Flags {
  std::string tau, tau_max, eta, basis_a, basis_b, bases, energies, pulses, seed, tail_tol, config,
      out, format, eta_grid, background, rep_rate, max_iterations, input;
  bool no_fanout = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--tau", f.tau, "tau list (a,b,c) or range start:stop:step");
  sub->add_option("--tau-max", f.tau_max, "interaction parameter at the largest pump energy");
  sub->add_option("--eta", f.eta, "efficiency: one value or four (ah,av,bh,bv)");
  sub->add_option("--basis-a", f.basis_a, "analysis basis of side a (hv, pm, rl)");
  sub->add_option("--basis-b", f.basis_b, "analysis basis of side b (hv, pm, rl)");
  sub->add_option("--bases", f.bases, "basis pairs: nine, or a list like hv/hv,pm/rl");
  sub->add_option("--energies", f.energies, "pump pulse energies in uJ");
  sub->add_option("--pulses", f.pulses, "pulses per energy and basis pair");
  sub->add_option("--seed", f.seed, "random seed");
  sub->add_option("--tail-tol", f.tail_tol, "truncation tail tolerance");
  sub->add_option("--config", f.config, "JSON config file");
  sub->add_option("--out", f.out, "output path (stdout when absent)");
  sub->add_option("--format", f.format, "csv, json, kv or text");
  sub->add_option("--eta-grid", f.eta_grid, "oracle-check efficiency grid");
  sub->add_option("--background-weight", f.background, "fraction of distinguishable-pair pulses");
  sub->add_option("--rep-rate", f.rep_rate, "pulse repetition rate in Hz");
  sub->add_option("--max-iterations", f.max_iterations, "iteration cap of each fit stage");
  sub->add_flag("--no-fanout", f.no_fanout, "skip the fan-out simulation");
  sub->add_option("input", f.input, "count file (fit, tomo)");
}

double single_number(const std::string& s) {
  const auto v = cli::parse_number_list(s);
  if (v.size() != 1) throw ConfigError("expected a single number, got '" + s + "'");
  return v.front();
}

// Flag values merged over the config file; RunConfig::from_json validates
// the result.
json merged_config(const CLI::App& sub, const Flags& f) {
  json j = f.config.empty() ? json::object() : cli::load_config_json(f.config);
  auto given = [&](const char* name) { return sub.count(name) > 0; };
  if (given("--tau")) j["tau"] = cli::parse_number_list(f.tau);
  if (given("--tau-max")) j["tau_max"] = single_number(f.tau_max);
  if (given("--eta")) {
    const auto e = cli::parse_etas(f.eta).as_array();
    j["etas"] = std::vector<double>(e.begin(), e.end());
  }
  if (given("--bases")) {
    if (f.bases == "nine" || f.bases == "all") {
      j["bases"] = f.bases;
    } else {
      std::vector<std::string> pairs;
      std::stringstream ss(f.bases);
      for (std::string p; std::getline(ss, p, ',');) pairs.push_back(p);
      j["bases"] = pairs;
    }
  }
  if (given("--basis-a") || given("--basis-b")) {
    BasisPair pair{Basis::hv, Basis::hv};
    if (j.contains("bases")) {
      const auto prev = cli::RunConfig::from_json({{"bases", j["bases"]}}).bases;
      if (prev.size() == 1) pair = prev.front();
    }
    if (given("--basis-a")) pair.first = parse_basis(f.basis_a);
    if (given("--basis-b")) pair.second = parse_basis(f.basis_b);
    j["bases"] = {std::string(to_string(pair.first)), std::string(to_string(pair.second))};
  }
  if (given("--energies")) j["energies"] = cli::parse_number_list(f.energies);
  if (given("--pulses")) j["n_pulses"] = single_number(f.pulses);
  if (given("--seed")) {
    std::size_t used = 0;
    try {
      j["seed"] = std::stoull(f.seed, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != f.seed.size() || f.seed.front() == '-') {
      throw ConfigError("seed must be a non-negative integer");
    }
  }
  if (given("--tail-tol")) j["tail_tol"] = single_number(f.tail_tol);
  if (given("--out")) j["output_path"] = f.out;
  if (given("--format")) j["format"] = f.format;
  if (given("--eta-grid")) j["eta_grid"] = cli::parse_number_list(f.eta_grid);
  if (given("--background-weight")) j["background_weight"] = single_number(f.background);
  if (given("--rep-rate")) j["rep_rate"] = single_number(f.rep_rate);
  if (given("--max-iterations")) j["max_iterations"] = static_cast<int>(single_number(f.max_iterations));
  if (given("--no-fanout")) j["fanout"] = false;
  if (given("input")) j["input_path"] = f.input;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-pair down-conversion model: sweeps, simulation, fitting, tomography"};
  app.require_subcommand(1);
  Flags flags;
  const char* const commands[][2] = {
      {"sweep", "criteria and visibilities over a tau grid (CSV)"},
      {"simulate", "Monte Carlo count dataset over pump energies (CSV)"},
      {"fit", "fit tau_max and efficiencies to a count file"},
      {"tomo", "tomography and entanglement criteria (JSON)"},
      {"oracle-check", "cross-check closed forms against the exact block model"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c[0], c[1]);
    add_common(sub, flags);
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitConfig;
  }

  for (auto* sub : subs) {
    if (!sub->parsed()) continue;
    cli::RunConfig cfg;
    try {
      cfg = cli::RunConfig::from_json(merged_config(*sub, flags));
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return cli::kExitConfig;
    }
    return cli::run_command(sub->get_name(), cfg, std::cout, std::cerr);
  }
  return cli::kExitConfig;
}
