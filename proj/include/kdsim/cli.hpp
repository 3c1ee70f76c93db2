#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "kdsim/csv.hpp"
#include "kdsim/detector.hpp"
#include "kdsim/ensemble.hpp"
#include "kdsim/errors.hpp"
#include "kdsim/fit.hpp"
#include "kdsim/scenario.hpp"
#include "kdsim/scenario_io.hpp"
#include "kdsim/version.hpp"

namespace kdsim::cli {

enum ExitCode : int
{
  ok = 0,
  usage_error = 1,
  config_error = 2,
  numerical_error = 3,
};

/// start:stop:n, inclusive, n >= 1.
struct Range
{
  double start = 0.0;
  double stop = 0.0;
  int count = 1;

  std::vector<double> values() const
  {
    std::vector<double> v;
    for (int i = 0; i < count; ++i)
      v.push_back(count == 1 ? start : start + (stop - start) * i / (count - 1));
    return v;
  }
};

inline Range parse_range(const std::string& text, const std::string& flag)
{
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? std::string::npos : text.find(':', a + 1);
  if (b == std::string::npos)
    throw ConfigError(flag, "expected start:stop:n");
  Range r;
  try {
    r.start = detail::parse_double(std::string_view(text).substr(0, a), flag);
    r.stop = detail::parse_double(std::string_view(text).substr(a + 1, b - a - 1), flag);
    const auto n = detail::parse_u64(std::string_view(text).substr(b + 1), flag);
    if (n < 1 || n > 100000)
      throw ConfigError(flag, "n must be between 1 and 100000");
    r.count = static_cast<int>(n);
  } catch (const ConfigError&) {
    throw ConfigError(flag, "expected start:stop:n with numeric fields, got '" + text + "'");
  }
  if (r.count > 1 && !(r.stop > r.start))
    throw ConfigError(flag, "stop must exceed start");
  return r;
}

struct Options
{
  std::string command;
  std::string scenario_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> powers;
  std::optional<std::string> betas;
  std::optional<std::string> observed;
  std::optional<std::string> beta_range;
  double noise = 0.01;
};

namespace detail {

inline std::vector<std::string> metadata(const Options& o, const Scenario& s)
{
  std::vector<std::string> m;
  m.push_back(fmt::format("kd-sim {}", version));
  m.push_back(fmt::format("command = {}", o.command));
  for (auto& line : format_scenario(s))
    m.push_back(std::move(line));
  return m;
}

inline std::ofstream open_output(const Options& o, const std::string& name)
{
  const std::filesystem::path dir(o.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw ConfigError("--out", "cannot create output directory '" + o.out_dir + "'");
  std::ofstream f(dir / name, std::ios::binary);
  if (!f)
    throw ConfigError("--out", "cannot write '" + (dir / name).string() + "'");
  return f;
}

inline int checked_max_order(const Scenario& s, double top_beta)
{
  const int n = resolved_max_order(s, top_beta);
  if (n < truncation_rule(top_beta))
    throw ConfigError("numerics.max_order",
                      fmt::format("below the truncation rule ({}) for beta_max {}", truncation_rule(top_beta), top_beta));
  return n;
}

inline std::vector<double> grid_for(const Scenario& s, const DiffractionGeometry& g, int max_order)
{
  const double step = s.numerics.grid_step_m.value_or(0.0);
  if (step > g.order_separation / 20.0)
    throw ConfigError("numerics.grid_step_m",
                      fmt::format("must not exceed order separation / 20 = {} m", g.order_separation / 20.0));
  return make_position_grid(g, max_order, step);
}

} // namespace detail

inline int cmd_kinematics(const Options&, const Scenario& s, std::ostream& out)
{
  const Model m = build_model(s);
  fmt::print(out, "kinetic_energy_ev={}\n", m.electron.kinetic_energy_ev);
  fmt::print(out, "gamma={}\n", m.electron.gamma);
  fmt::print(out, "speed_m_per_s={}\n", m.electron.speed);
  fmt::print(out, "momentum_kg_m_per_s={}\n", m.electron.momentum);
  fmt::print(out, "de_broglie_m={}\n", m.electron.de_broglie);
  fmt::print(out, "order_angle_rad={}\n", m.geometry.order_angle);
  fmt::print(out, "order_separation_m={}\n", m.geometry.order_separation);
  fmt::print(out, "peak_field_v_per_m={}\n", m.wave.peak_field);
  fmt::print(out, "beta_per_watt={}\n", m.beta_per_watt);
  fmt::print(out, "beta_max={}\n", m.beta_max);
  return ok;
}

inline int cmd_pattern(const Options& o, const Scenario& s, std::ostream& out)
{
  const Model m = build_model(s);
  const int n = detail::checked_max_order(s, m.beta_max);
  const EnsembleSpectrum spec = ensemble_populations(m.field, m.distribution, n, ensemble_options(s));
  const ScatteringPattern p = synthesize_pattern(spec, m.geometry, detail::grid_for(s, m.geometry, n));
  auto meta = detail::metadata(o, s);
  meta.push_back(fmt::format("derived.beta_max = {}", m.beta_max));
  meta.push_back(fmt::format("derived.max_order = {}", n));
  meta.push_back(fmt::format("derived.order_separation_m = {}", m.geometry.order_separation));
  meta.push_back(fmt::format("derived.quadrature_nodes = {}x{}x{}", spec.nodes_x, spec.nodes_y, spec.nodes_tau));
  auto f = detail::open_output(o, "pattern.csv");
  csv::write_pattern(f, p, meta);
  fmt::print(out, "wrote {}\n", (std::filesystem::path(o.out_dir) / "pattern.csv").string());
  return ok;
}

inline int cmd_scan(const Options& o, const Scenario& s, std::ostream& out)
{
  if (!o.powers)
    throw ConfigError("--powers", "the scan command requires --powers start:stop:n");
  const Range r = parse_range(*o.powers, "--powers");
  if (r.start < 0.0)
    throw ConfigError("--powers", "powers must be non-negative");
  const Model m = build_model(s);
  const double top = m.beta_per_watt * r.values().back();
  detail::checked_max_order(s, top);
  detail::grid_for(s, m.geometry, 0);
  const PowerScan scan = power_scan(r.values(), s);
  auto meta = detail::metadata(o, s);
  meta.push_back(fmt::format("flag.powers = {}", *o.powers));
  meta.push_back(fmt::format("derived.beta_per_watt = {}", m.beta_per_watt));
  meta.push_back(fmt::format("derived.max_order = {}", scan.max_order));
  meta.push_back(fmt::format("derived.order_separation_m = {}", m.geometry.order_separation));
  auto f = detail::open_output(o, "scan.csv");
  csv::write_scan(f, scan, meta);
  fmt::print(out, "wrote {}\n", (std::filesystem::path(o.out_dir) / "scan.csv").string());
  return ok;
}

inline int cmd_populations(const Options& o, const Scenario& s, std::ostream& out)
{
  const Model m = build_model(s);
  const Range r = o.betas ? parse_range(*o.betas, "--betas") : Range{0.0, m.beta_max, 51};
  if (r.start < 0.0)
    throw ConfigError("--betas", "beta values must be non-negative");
  const auto betas = r.values();
  const double top = *std::max_element(betas.begin(), betas.end());
  const int n = detail::checked_max_order(s, top);
  const EnsembleQuadrature q =
      converged_quadrature(m.field, m.distribution, top, n, ensemble_options(s));
  std::vector<std::vector<double>> rows;
  for (double b : betas) {
    const auto spec = q.populations(b, n);
    std::vector<double> row;
    for (int k = 0; k <= n; ++k)
      row.push_back(0.5 * (spec.population(k) + spec.population(-k)));
    rows.push_back(std::move(row));
  }
  auto meta = detail::metadata(o, s);
  if (o.betas)
    meta.push_back(fmt::format("flag.betas = {}", *o.betas));
  meta.push_back(fmt::format("derived.max_order = {}", n));
  meta.push_back(fmt::format("derived.quadrature_nodes = {}x{}x{}", q.nodes_x(), q.nodes_y(), q.nodes_tau()));
  auto f = detail::open_output(o, "populations.csv");
  csv::write_populations(f, betas, rows, meta);
  fmt::print(out, "wrote {}\n", (std::filesystem::path(o.out_dir) / "populations.csv").string());
  return ok;
}

inline int cmd_fit(const Options& o, const Scenario& s, std::ostream& out)
{
  const Model m = build_model(s);
  const Range bounds = o.beta_range ? parse_range(*o.beta_range, "--beta-range") : Range{0.0, 10.0, 2};
  if (bounds.start < 0.0 || !(bounds.stop > bounds.start))
    throw ConfigError("--beta-range", "expected 0 <= lower < upper");
  if (!(o.noise >= 0.0))
    throw ConfigError("--noise", "must be non-negative");
  const std::uint64_t seed = o.seed.value_or(s.seed);
  const int n = detail::checked_max_order(s, bounds.stop);

  ScatteringPattern observed;
  std::string source;
  if (o.observed) {
    std::ifstream in(*o.observed);
    if (!in)
      throw ConfigError("--observed", "cannot open '" + *o.observed + "'");
    observed = csv::read_pattern(in, m.geometry);
    source = *o.observed;
  } else {
    // Synthetic measurement of the scenario itself.
    const EnsembleSpectrum spec =
        ensemble_populations(m.field, m.distribution, detail::checked_max_order(s, m.beta_max), ensemble_options(s));
    const ScatteringPattern clean =
        synthesize_pattern(spec, m.geometry, detail::grid_for(s, m.geometry, n));
    const double peak = *std::max_element(clean.intensity.begin(), clean.intensity.end());
    observed = add_gaussian_noise(synthesize_pattern(spec, m.geometry, clean.positions),
                                  o.noise * peak, seed);
    source = fmt::format("synthetic(beta_max={}, noise={}, seed={})", m.beta_max, o.noise, seed);
  }

  const FitResult fit = fit_beta_max(observed, s, bounds.start, bounds.stop);
  auto meta = detail::metadata(o, s);
  meta.push_back(fmt::format("observed = {}", source));
  auto report = detail::open_output(o, "fit_report.csv");
  csv::write_fit_report(report, fit, meta);

  std::vector<std::pair<std::string, std::string>> summary = {
      {"tool", fmt::format("kd-sim {}", version)},
      {"command", "fit"},
      {"observed", source},
      {"seed", fmt::format("{}", seed)},
      {"converged", fit.converged ? "true" : "false"},
      {"iterations", fmt::format("{}", fit.iterations)},
      {"starts", fmt::format("{}", fit.starts)},
      {"samples", fmt::format("{}", fit.samples)},
      {"residual_norm", fmt::format("{}", fit.residual_norm)},
      {"initial_residual_norm", fmt::format("{}", fit.initial_residual_norm)},
  };
  for (const auto& p : fit.parameters) {
    summary.emplace_back(p.name, fmt::format("{}", p.value));
    summary.emplace_back(p.name + ".stderr", fmt::format("{}", p.stderr_estimate));
  }
  auto sf = detail::open_output(o, "fit_summary.txt");
  csv::write_summary(sf, summary);
  csv::write_summary(out, summary);
  return ok;
}

inline std::string quoted(const std::string& s)
{
  std::string q = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\')
      q += '\\';
    q += (c == '\n') ? ' ' : c;
  }
  return q + "\"";
}

/// Runs one command. Failures print a single `error kind=... ` line to `err`.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Kapitza-Dirac diffraction of fast electrons: forward simulation and fitting", "kd-sim"};
  app.set_version_flag("--version", std::string(version));
  app.require_subcommand(1);

  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario_path, "Scenario file")->required();
    sub->add_option("--out", o.out_dir, "Output directory (default: .)");
    sub->add_option("--seed", o.seed, "Override the scenario seed");
  };
  auto* kin = app.add_subcommand("kinematics", "Print electron kinematics and diffraction geometry");
  add_common(kin);
  auto* pat = app.add_subcommand("pattern", "Write one focal-plane pattern (pattern.csv)");
  add_common(pat);
  auto* scan = app.add_subcommand("scan", "Write patterns over a power range (scan.csv)");
  add_common(scan);
  scan->add_option("--powers", o.powers, "start:stop:n in watt")->required();
  auto* pops = app.add_subcommand("populations", "Write order populations versus beta_max (populations.csv)");
  add_common(pops);
  pops->add_option("--betas", o.betas, "start:stop:n (default 0:beta_max:51)");
  auto* fit = app.add_subcommand("fit", "Fit beta_max to a pattern (fit_report.csv, fit_summary.txt)");
  add_common(fit);
  fit->add_option("--observed", o.observed, "Measured pattern CSV (default: synthetic from the scenario)");
  fit->add_option("--beta-range", o.beta_range, "lower:upper:2 bounds for beta_max (default 0:10:2)");
  fit->add_option("--noise", o.noise, "Synthetic noise sigma relative to the peak (default 0.01)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForVersion&) {
    out << version << '\n';
    return ok;
  } catch (const CLI::ParseError& e) {
    fmt::print(err, "error kind=usage message={}\n", quoted(e.what()));
    return usage_error;
  }
  o.command = app.get_subcommands().front()->get_name();

  try {
    Scenario s = load_scenario(o.scenario_path);
    if (o.seed)
      s.seed = *o.seed;
    for (const auto& w : validate(s))
      fmt::print(err, "warning message={}\n", quoted(w));
    if (o.command == "kinematics")
      return cmd_kinematics(o, s, out);
    if (o.command == "pattern")
      return cmd_pattern(o, s, out);
    if (o.command == "scan")
      return cmd_scan(o, s, out);
    if (o.command == "populations")
      return cmd_populations(o, s, out);
    return cmd_fit(o, s, out);
  } catch (const ConfigError& e) {
    fmt::print(err, "error kind=config field={} message={}\n", e.field(), quoted(e.what()));
    return config_error;
  } catch (const NumericalError& e) {
    fmt::print(err, "error kind=numerical message={} diagnostics={}\n", quoted(e.what()), quoted(e.diagnostics()));
    return numerical_error;
  } catch (const DomainError& e) {
    fmt::print(err, "error kind=numerical message={}\n", quoted(e.what()));
    return numerical_error;
  }
}

} // namespace kdsim::cli
