#pragma once

#include <charconv>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "kdsim/detector.hpp"
#include "kdsim/errors.hpp"
#include "kdsim/fit.hpp"

namespace kdsim::csv {

// Every table starts with `#`-prefixed metadata lines followed by one header
// row and numeric rows. Numbers use the shortest representation that parses
// back to the same double.
//
//   pattern:      position_m,intensity
//   scan:         power_W,beta_max,position_m,intensity
//   populations:  beta_max,P_0,P_1,...,P_N     (P_n averaged over +n and -n)
//   fit report:   parameter,unit,value,stderr_estimate,lower_bound,upper_bound,
//                 at_lower_bound,at_upper_bound

struct Table
{
  std::vector<std::string> metadata; // without the leading "# "
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const
  {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name)
        return i;
    throw DomainError("csv: missing column '" + std::string(name) + "'");
  }
};

inline void write_metadata(std::ostream& os, const std::vector<std::string>& metadata)
{
  for (const auto& m : metadata)
    fmt::print(os, "# {}\n", m);
}

inline void write_pattern(std::ostream& os, const ScatteringPattern& p,
                          const std::vector<std::string>& metadata)
{
  write_metadata(os, metadata);
  os << "position_m,intensity\n";
  for (std::size_t i = 0; i < p.positions.size(); ++i)
    fmt::print(os, "{},{}\n", p.positions[i], p.intensity[i]);
}

inline void write_scan(std::ostream& os, const PowerScan& scan, const std::vector<std::string>& metadata)
{
  write_metadata(os, metadata);
  os << "power_W,beta_max,position_m,intensity\n";
  for (std::size_t r = 0; r < scan.powers.size(); ++r)
    for (std::size_t i = 0; i < scan.positions.size(); ++i)
      fmt::print(os, "{},{},{},{}\n", scan.powers[r], scan.beta_max[r], scan.positions[i],
                 scan.intensity[r][i]);
}

/// `populations[k]` holds P_0..P_N for `betas[k]`.
inline void write_populations(std::ostream& os, const std::vector<double>& betas,
                              const std::vector<std::vector<double>>& populations,
                              const std::vector<std::string>& metadata)
{
  write_metadata(os, metadata);
  os << "beta_max";
  const std::size_t orders = populations.empty() ? 0 : populations.front().size();
  for (std::size_t n = 0; n < orders; ++n)
    fmt::print(os, ",P_{}", n);
  os << '\n';
  for (std::size_t k = 0; k < betas.size(); ++k) {
    fmt::print(os, "{}", betas[k]);
    for (double p : populations[k])
      fmt::print(os, ",{}", p);
    os << '\n';
  }
}

inline void write_fit_report(std::ostream& os, const FitResult& fit, const std::vector<std::string>& metadata)
{
  write_metadata(os, metadata);
  os << "parameter,unit,value,stderr_estimate,lower_bound,upper_bound,at_lower_bound,at_upper_bound\n";
  for (const auto& p : fit.parameters)
    fmt::print(os, "{},{},{},{},{},{},{},{}\n", p.name, p.unit, p.value, p.stderr_estimate, p.lower,
               p.upper, p.at_lower ? 1 : 0, p.at_upper ? 1 : 0);
}

/// Machine-readable `key=value` lines.
inline void write_summary(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& entries)
{
  for (const auto& [k, v] : entries)
    fmt::print(os, "{}={}\n", k, v);
}

inline std::vector<std::string> split(std::string_view line)
{
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t'))
      cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
      cell.remove_suffix(1);
    out.emplace_back(cell);
    if (comma == std::string_view::npos)
      break;
    start = comma + 1;
  }
  return out;
}

inline Table read_table(std::istream& is)
{
  Table t;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    if (line.front() == '#') {
      std::string_view m = line;
      m.remove_prefix(1);
      if (!m.empty() && m.front() == ' ')
        m.remove_prefix(1);
      t.metadata.emplace_back(m);
      continue;
    }
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw DomainError("csv: row has " + std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty())
    throw DomainError("csv: no header row");
  return t;
}

inline double to_double(const std::string& cell)
{
  double v = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw DomainError("csv: not a number: '" + cell + "'");
  return v;
}

/// Reads a pattern table; the geometry must be supplied by the caller.
inline ScatteringPattern read_pattern(std::istream& is, const DiffractionGeometry& geometry)
{
  const Table t = read_table(is);
  const auto cx = t.column("position_m");
  const auto ci = t.column("intensity");
  ScatteringPattern p;
  p.geometry = geometry;
  for (const auto& row : t.rows) {
    p.positions.push_back(to_double(row[cx]));
    p.intensity.push_back(to_double(row[ci]));
  }
  for (std::size_t i = 1; i < p.positions.size(); ++i)
    if (!(p.positions[i] > p.positions[i - 1]))
      throw DomainError("csv: positions must be strictly increasing");
  return p;
}

} // namespace kdsim::csv
