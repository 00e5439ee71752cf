#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spdc/criteria.hpp"
#include "spdc/fitting.hpp"

namespace spdc::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitFitNotConverged = 4,
};

/// Parameters shared by all commands. Built from a JSON object whose keys
/// mirror the command-line flags; flag values are merged over file values
/// before parsing, so flags win.
struct RunConfig {
  std::vector<double> taus;
  std::optional<double> tau_max;
  std::optional<Efficiencies> etas;
  std::vector<BasisPair> bases;
  std::vector<double> energies;
  std::int64_t n_pulses = 1000000;
  std::uint64_t seed = 1;
  /// Non-positive selects the default for each tau.
  double tail_tol = 0.0;
  std::string output_path;
  std::string input_path;
  std::string format;
  std::vector<double> eta_grid;
  double background_weight = 0.0;
  double rep_rate = kDefaultRepRate;
  bool fanout = true;
  /// Caps both fit stages; zero keeps the defaults.
  int max_iterations = 0;

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;

  Efficiencies etas_or_default() const;
  double tail_tol_for(double tau) const;
};

/// "0.1,0.5,1" or "start:stop:step" (inclusive of stop up to rounding).
std::vector<double> parse_number_list(const std::string& text);

/// One value (all detectors) or four comma-separated values.
Efficiencies parse_etas(const std::string& text);

/// "hv/pm" style pair.
BasisPair parse_basis_pair(const std::string& text);

/// JSON config file contents (must be an object).
nlohmann::json load_config_json(const std::string& path);

struct SweepRow {
  double tau = 0.0;
  double mean_pairs = 0.0;
  double p_single = 0.0;
  double p11 = 0.0;
  double subspace_ratio = 0.0;
  VisibilitySet visibilities;
  std::optional<double> c1;
  double c2 = 0.0;
  double min_pt_eig = 0.0;
  double ansatz_visibility = 0.0;
  double tail_mass = 0.0;
};

SweepRow sweep_point(double tau, const Efficiencies& etas, double tail_tol);

struct OracleLine {
  double tau = 0.0;
  double eta = 0.0;
  int n_max = 0;
  double tail_mass = 0.0;
  double single_vs_block = 0.0;
  double closed_vs_block = 0.0;
  double fast_vs_closed = 0.0;
  double fast_vs_general = 0.0;
  bool pass = false;
};

OracleLine oracle_point(double tau, double eta, double tail_tol);

/// Nine-basis subspace probabilities from exact-mask rows at one energy
/// (the largest in the file unless `energy` is given).
NineBasisProbs nine_basis_probs_from_counts(const CountDataset& data,
                                            std::optional<double> energy = std::nullopt);

/// Tomography report for the given probabilities.
nlohmann::json tomography_report(const NineBasisProbs& probs);

nlohmann::json fit_report(const FitResult& fit);

int cmd_sweep(const RunConfig& cfg, std::ostream& out);
int cmd_simulate(const RunConfig& cfg, std::ostream& out);
int cmd_fit(const RunConfig& cfg, std::ostream& out);
int cmd_tomo(const RunConfig& cfg, std::ostream& out);
int cmd_oracle_check(const RunConfig& cfg, std::ostream& out);

/// Dispatches by name; maps library exceptions onto exit codes and reports
/// them on `err`.
int run_command(const std::string& name, const RunConfig& cfg, std::ostream& out,
                std::ostream& err);

}  // namespace spdc::cli
