#include "spdc/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace spdc::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no, std::string_view what) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("line " + std::to_string(line_no) + ": bad " + std::string(what) + " '" +
                      std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::to_string(v);
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void write_counts_csv(std::ostream& os, const CountDataset& data) {
  os << kCountHeader << '\n';
  for (const auto& r : data.rows) {
    os << format_double(r.pulse_energy_uJ) << ',' << to_string(r.basis_a) << ','
       << to_string(r.basis_b) << ',' << r.pattern << ',' << r.counts << ',' << r.n_pulses
       << '\n';
  }
}

CountDataset read_counts_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != kCountHeader) {
    throw ConfigError("count file header must be exactly '" + std::string(kCountHeader) + "'");
  }
  CountDataset ds;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 6 fields");
    }
    CountRow r;
    r.pulse_energy_uJ = parse_number<double>(f[0], line_no, "pulse energy");
    r.basis_a = parse_basis(f[1]);
    r.basis_b = parse_basis(f[2]);
    r.pattern = f[3];
    r.counts = parse_number<std::int64_t>(f[4], line_no, "counts");
    r.n_pulses = parse_number<std::int64_t>(f[5], line_no, "n_pulses");
    // validates the label
    if (r.pattern.size() == 4) {
      parse_pattern_mask(r.pattern);
    } else if (r.pattern != "ah" && r.pattern != "av" && r.pattern != "bh" && r.pattern != "bv") {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown pattern '" + r.pattern + "'");
    }
    if (r.counts < 0 || r.counts > r.n_pulses) {
      throw ConfigError("line " + std::to_string(line_no) + ": counts outside [0, n_pulses]");
    }
    ds.rows.push_back(std::move(r));
  }
  return ds;
}

CountDataset read_counts_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_counts_csv(in);
}

void write_counts_file(const std::string& path, const CountDataset& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_counts_csv(out, data);
}

}  // namespace spdc::io
