#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "spdc/montecarlo.hpp"

namespace spdc::io {

inline constexpr std::string_view kCountHeader =
    "pulse_energy_uJ,basis_a,basis_b,pattern,counts,n_pulses";

inline constexpr std::string_view kSweepHeader =
    "tau,mean_pairs,p_single_eq4,p11,subspace_ratio,V_hvhv,V_hvpm,V_hvrl,V_pmhv,V_pmpm,V_pmrl,"
    "V_rlhv,V_rlpm,V_rlrl,C1,C2,min_pt_eig,ansatz_visibility,tail_mass";

inline constexpr int kSchemaVersion = 1;

/// Shortest round-trip decimal form.
std::string format_double(double v);

void write_counts_csv(std::ostream& os, const CountDataset& data);

/// Parses the count schema; the header must match exactly. Throws
/// ConfigError naming the offending line.
CountDataset read_counts_csv(std::istream& is);

CountDataset read_counts_file(const std::string& path);
void write_counts_file(const std::string& path, const CountDataset& data);

/// Splits on commas, trimming surrounding blanks.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace spdc::io
