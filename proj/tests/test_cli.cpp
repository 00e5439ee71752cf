#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

struct ScratchDir {
  fs::path path = fs::temp_directory_path() / ("spdc_cli_test_" + std::to_string(::getpid()));
  ScratchDir() { fs::create_directories(path); }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

fs::path scratch() {
  static const ScratchDir dir;
  return dir.path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const std::string& args) {
  const auto out = scratch() / "stdout.txt";
  const std::string cmd = std::string(SPDC_CLI_PATH) + " " + args + " > " + out.string() + " 2> " +
                          (scratch() / "stderr.txt").string();
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out)};
}

std::string path(const std::string& name) { return (scratch() / name).string(); }

}  // namespace

TEST_CASE("sweep writes the documented columns") {
  const auto r = run("sweep --tau 0.001,1.3 --eta 0.02");
  REQUIRE(r.status == 0);
  std::istringstream lines(r.out);
  std::string header, first, second;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK(header ==
        "tau,mean_pairs,p_single_eq4,p11,subspace_ratio,V_hvhv,V_hvpm,V_hvrl,V_pmhv,V_pmpm,V_pmrl,V_rlhv,V_rlpm,"
        "V_rlrl,C1,C2,min_pt_eig,ansatz_visibility,tail_mass");
  auto field = [](const std::string& row, int k) {
    std::stringstream ss(row);
    std::string f;
    for (int i = 0; i <= k; ++i) std::getline(ss, f, ',');
    return std::stod(f);
  };
  CHECK(field(first, 14) < 1e-4);
  CHECK(field(first, 15) > 3.0 - 1e-4);
  CHECK(field(second, 14) < 1.0);
  CHECK(field(second, 15) > 1.0);
}

TEST_CASE("sweep output and config echo") {
  const auto out = path("sweep.csv");
  REQUIRE(run("sweep --tau 0.25:1:0.25 --eta 0.09 --out " + out).status == 0);
  const auto echo = json::parse(slurp(out + ".config.json"));
  CHECK(echo["schema_version"] == 1);
  CHECK(echo["command"] == "sweep");
  CHECK(echo["tau"].size() == 4);

  // rerunning from the echo alone reproduces the output
  const auto first = slurp(out);
  fs::remove(out);
  REQUIRE(run("sweep --config " + out + ".config.json").status == 0);
  CHECK(slurp(out) == first);

  const auto j = run("sweep --tau 0.5 --format json");
  REQUIRE(j.status == 0);
  const auto parsed = json::parse(j.out);
  CHECK(parsed["schema_version"] == 1);
  CHECK(parsed["columns"].size() == 19);
}

TEST_CASE("flags override config values") {
  const auto cfg = path("override.json");
  std::ofstream(cfg) << R"({"tau": [0.2, 0.4], "etas": 0.5})";
  const auto r = run("sweep --config " + cfg + " --tau 0.3");
  REQUIRE(r.status == 0);
  CHECK(r.out.find("\n0.3,") != std::string::npos);
  CHECK(r.out.find("\n0.2,") == std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(run("sweep").status == 2);
  CHECK(run("sweep --tau 0.5 --eta 1.5").status == 2);
  CHECK(run("sweep --tau 0.5 --eta 0.1,0.2").status == 2);
  CHECK(run("sweep --tau 0.5 --format xml").status == 2);
  CHECK(run("sweep --tau 0.5 --config /nonexistent/cfg.json").status == 2);
  CHECK(run("simulate --tau-max 1 --energies 1 --basis-a xy").status == 2);
  CHECK(run("bogus").status == 2);
  CHECK(run("sweep --tau 5 --tail-tol 1e-12").status == 3);
  CHECK(run("sweep --tau 0.5 --eta 0").status == 3);
  CHECK(run("fit " + path("missing.csv")).status == 2);
}

TEST_CASE("simulate is deterministic and feeds fit") {
  const auto a = path("sim_a.csv"), b = path("sim_b.csv");
  const std::string args = "simulate --tau-max 1.5 --eta 0.05 --energies 0.25,0.5,0.75,1 --pulses 100000 --seed 5 ";
  REQUIRE(run(args + "--out " + a).status == 0);
  REQUIRE(run(args + "--out " + b).status == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(path("sim_a_rates.csv")) == slurp(path("sim_b_rates.csv")));
  CHECK(slurp(path("sim_a_fanout.csv")) == slurp(path("sim_b_fanout.csv")));
  CHECK(slurp(a).rfind("pulse_energy_uJ,basis_a,basis_b,pattern,counts,n_pulses\n", 0) == 0);
  CHECK(run("simulate --tau-max 1.5 --eta 0.05 --energies 0.25,0.5,0.75,1 --pulses 100000 --seed 6 --out " + b)
            .status == 0);
  CHECK(slurp(a) != slurp(b));

  const auto fit = run("fit " + a);
  REQUIRE(fit.status == 0);
  CHECK(fit.out.find("converged=true") != std::string::npos);
  CHECK(fit.out.find("schema_version=1") != std::string::npos);
  CHECK(fit.out.find("weighting=poisson") != std::string::npos);

  const auto fj = run("fit " + a + " --format json");
  REQUIRE(fj.status == 0);
  const auto report = json::parse(fj.out);
  CHECK(report["tau_max"].get<double>() == doctest::Approx(1.5).epsilon(0.05));

  CHECK(run("fit " + a + " --max-iterations 1").status == 4);
}

TEST_CASE("saturating single rates at the repetition rate") {
  const auto out = path("sat.csv");
  REQUIRE(run("simulate --tau-max 2.3 --eta 0.019 --energies 0.1,1 --pulses 20000 --no-fanout --out " + out).status ==
          0);
  std::ifstream in(path("sat_rates.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "pulse_energy_uJ,basis_a,basis_b,pattern,rate_per_s");
  double low = 0.0, high = 0.0;
  while (std::getline(in, line)) {
    if (line.find(",ah,") == std::string::npos) continue;
    const double rate = std::stod(line.substr(line.rfind(',') + 1));
    (line.rfind("0.1,", 0) == 0 ? low : high) = rate;
  }
  CHECK(high > 3.0 * low);
  CHECK(high < 20000.0);
  CHECK(high > 0.25 * 20000.0);
  CHECK_FALSE(fs::exists(path("sat_fanout.csv")));
}

TEST_CASE("tomo from nine-basis counts and from the model") {
  const auto counts = path("nine.csv");
  REQUIRE(run("simulate --tau-max 0.3 --eta 0.5 --energies 1 --pulses 200000 --bases nine --no-fanout --out " +
              counts)
              .status == 0);
  const auto r = run("tomo " + counts);
  REQUIRE(r.status == 0);
  const auto j = json::parse(r.out);
  CHECK(j["schema_version"] == 1);
  CHECK(j["probabilities"].size() == 9);
  CHECK(j["rho_real"][1][2].get<double>() < -0.3);
  CHECK(j["flags"]["entangled_by_c2"] == true);

  const auto m = json::parse(run("tomo --tau 1.85 --eta 0.019").out);
  CHECK(m["rho_real"][0][0].get<double>() > 0.05);
  CHECK(m["rho_real"][3][3].get<double>() > 0.05);
  double imag = 0.0;
  for (const auto& row : m["rho_imag"])
    for (const auto& v : row) imag = std::max(imag, std::abs(v.get<double>()));
  CHECK(imag < 1e-6);

  const auto hv_only = path("hv_only.csv");
  REQUIRE(run("simulate --tau-max 0.3 --eta 0.5 --energies 1 --pulses 1000 --no-fanout --out " + hv_only).status == 0);
  CHECK(run("tomo " + hv_only).status == 2);
}

TEST_CASE("tomo on all-equal counts") {
  const auto counts = path("flat.csv");
  {
    std::ofstream f(counts);
    f << "pulse_energy_uJ,basis_a,basis_b,pattern,counts,n_pulses\n";
    for (const char* a : {"hv", "pm", "rl"})
      for (const char* b : {"hv", "pm", "rl"})
        for (const char* p : {"1010", "1001", "0110", "0101"}) f << "1," << a << ',' << b << ',' << p << ",100,10000\n";
  }
  const auto r = run("tomo " + counts);
  REQUIRE(r.status == 0);
  const auto j = json::parse(r.out);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) CHECK(j["rho_real"][i][k].get<double>() == doctest::Approx(i == k ? 0.25 : 0.0));
  CHECK(j["C1"].is_null());
  CHECK(j["flags"]["separable_by_all_criteria"] == true);
  CHECK(j["flags"]["c1_applicable"] == false);
}

TEST_CASE("oracle-check") {
  const auto r = run("oracle-check --tau 0.2 --eta-grid 1 --tail-tol 1e-14 --format json");
  REQUIRE(r.status == 0);
  const auto j = json::parse(r.out);
  CHECK(j["pass"] == true);
  const auto& p = j["points"][0];
  for (const char* k : {"single_vs_block", "closed_vs_block", "fast_vs_closed", "fast_vs_general"}) {
    CHECK(p[k].get<double>() < 1e-12);
  }
  CHECK(run("oracle-check --tau 1.3 --eta 0.02").status == 0);
  const auto strong = run("oracle-check --tau 2.3 --eta 0.019 --tail-tol 1e-6");
  CHECK(strong.status == 0);
  CHECK(strong.out.find("tail=") != std::string::npos);
}
