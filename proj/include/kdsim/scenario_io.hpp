#pragma once

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "kdsim/errors.hpp"
#include "kdsim/scenario.hpp"

namespace kdsim {

// Scenario files are INI-style:
//
//   seed = 7
//   [electron]
//   kinetic_energy_ev = 20000   # trailing comments allowed
//
// Keys are `section.name` once resolved; unknown or repeated keys are errors.

namespace detail {

inline std::string_view trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view text, const std::string& key)
{
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError(key, "expected a number, got '" + std::string(text) + "'");
  return v;
}

inline std::uint64_t parse_u64(std::string_view text, const std::string& key)
{
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError(key, "expected a non-negative integer, got '" + std::string(text) + "'");
  return v;
}

using Setter = std::function<void(Scenario&, std::string_view, const std::string&)>;

template <class Section>
Setter number_in(Section Scenario::*section, double Section::*field)
{
  return [=](Scenario& s, std::string_view v, const std::string& key) {
    (s.*section).*field = parse_double(v, key);
  };
}

template <class Section>
Setter optional_number_in(Section Scenario::*section, std::optional<double> Section::*field)
{
  return [=](Scenario& s, std::string_view v, const std::string& key) {
    (s.*section).*field = parse_double(v, key);
  };
}

inline const std::map<std::string, Setter, std::less<>>& scenario_keys()
{
  using S = Scenario;
  static const std::map<std::string, Setter, std::less<>> keys = {
      {"seed", [](S& s, std::string_view v, const std::string& k) { s.seed = parse_u64(v, k); }},
      {"electron.kinetic_energy_ev", number_in(&S::electron, &S::Electron::kinetic_energy_ev)},
      {"electron.pulse_fwhm_s", number_in(&S::electron, &S::Electron::pulse_fwhm_s)},
      {"electron.beam_sigma_x_m", number_in(&S::electron, &S::Electron::beam_sigma_x_m)},
      {"electron.beam_sigma_y_m", number_in(&S::electron, &S::Electron::beam_sigma_y_m)},
      {"electron.arrival_offset_s", number_in(&S::electron, &S::Electron::arrival_offset_s)},
      {"laser.wavelength_m", number_in(&S::laser, &S::Laser::wavelength_m)},
      {"laser.pulse_fwhm_1_s", number_in(&S::laser, &S::Laser::pulse_fwhm_1_s)},
      {"laser.pulse_fwhm_2_s", number_in(&S::laser, &S::Laser::pulse_fwhm_2_s)},
      {"laser.waist_m", number_in(&S::laser, &S::Laser::waist_m)},
      {"laser.rep_rate_hz", number_in(&S::laser, &S::Laser::rep_rate_hz)},
      {"laser.avg_power_w", optional_number_in(&S::laser, &S::Laser::avg_power_w)},
      {"laser.beta_max", optional_number_in(&S::laser, &S::Laser::beta_max)},
      {"geometry.grating_to_focus_m", number_in(&S::geometry, &S::Geometry::grating_to_focus_m)},
      {"geometry.slit_width_m", number_in(&S::geometry, &S::Geometry::slit_width_m)},
      {"geometry.spot_fwhm_m", number_in(&S::geometry, &S::Geometry::spot_fwhm_m)},
      {"numerics.max_order",
       [](S& s, std::string_view v, const std::string& k) {
         if (v == "auto") {
           s.numerics.max_order.reset();
           return;
         }
         const auto n = parse_u64(v, k);
         if (n > 10000)
           throw ConfigError(k, "unreasonably large order");
         s.numerics.max_order = static_cast<int>(n);
       }},
      {"numerics.quadrature_tolerance", number_in(&S::numerics, &S::Numerics::quadrature_tolerance)},
      {"numerics.grid_step_m", optional_number_in(&S::numerics, &S::Numerics::grid_step_m)},
  };
  return keys;
}

inline const std::vector<std::string>& required_keys()
{
  static const std::vector<std::string> keys = {
      "electron.kinetic_energy_ev", "electron.pulse_fwhm_s",      "electron.beam_sigma_x_m",
      "electron.beam_sigma_y_m",    "laser.wavelength_m",         "laser.pulse_fwhm_1_s",
      "laser.pulse_fwhm_2_s",       "laser.waist_m",              "laser.rep_rate_hz",
      "geometry.grating_to_focus_m", "geometry.slit_width_m",     "geometry.spot_fwhm_m",
  };
  return keys;
}

} // namespace detail

/// Parses and validates a scenario. Throws ConfigError with the key path.
inline Scenario parse_scenario(std::istream& in)
{
  Scenario s;
  std::set<std::string> seen;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view v = line;
    if (const auto hash = v.find('#'); hash != std::string_view::npos)
      v = v.substr(0, hash);
    v = detail::trim(v);
    if (v.empty())
      continue;
    if (v.front() == '[') {
      if (v.back() != ']')
        throw ConfigError(fmt::format("line {}", line_no), "malformed section header");
      section = std::string(detail::trim(v.substr(1, v.size() - 2)));
      static const std::set<std::string> sections = {"electron", "laser", "geometry", "numerics"};
      if (!sections.count(section))
        throw ConfigError(section, "unknown section");
      continue;
    }
    const auto eq = v.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(fmt::format("line {}", line_no), "expected 'key = value'");
    const std::string name(detail::trim(v.substr(0, eq)));
    const std::string_view value = detail::trim(v.substr(eq + 1));
    const std::string key = section.empty() ? name : section + "." + name;
    const auto& keys = detail::scenario_keys();
    const auto it = keys.find(key);
    if (it == keys.end())
      throw ConfigError(key, "unknown key");
    if (!seen.insert(key).second)
      throw ConfigError(key, "key given more than once");
    if (value.empty())
      throw ConfigError(key, "missing value");
    it->second(s, value, key);
  }
  for (const auto& key : detail::required_keys())
    if (!seen.count(key))
      throw ConfigError(key, "required key missing");
  validate(s);
  return s;
}

inline Scenario parse_scenario_text(const std::string& text)
{
  std::istringstream in(text);
  return parse_scenario(in);
}

inline Scenario load_scenario(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("scenario", "cannot open scenario file '" + path + "'");
  return parse_scenario(in);
}

/// `key = value` lines of the fully resolved scenario, in a fixed order.
/// Parsing these lines back (with section prefixes) reproduces `s`.
inline std::vector<std::string> format_scenario(const Scenario& s)
{
  std::vector<std::string> out;
  auto add = [&](const char* key, double v) { out.push_back(fmt::format("{} = {}", key, v)); };
  out.push_back(fmt::format("seed = {}", s.seed));
  add("electron.kinetic_energy_ev", s.electron.kinetic_energy_ev);
  add("electron.pulse_fwhm_s", s.electron.pulse_fwhm_s);
  add("electron.beam_sigma_x_m", s.electron.beam_sigma_x_m);
  add("electron.beam_sigma_y_m", s.electron.beam_sigma_y_m);
  add("electron.arrival_offset_s", s.electron.arrival_offset_s);
  add("laser.wavelength_m", s.laser.wavelength_m);
  add("laser.pulse_fwhm_1_s", s.laser.pulse_fwhm_1_s);
  add("laser.pulse_fwhm_2_s", s.laser.pulse_fwhm_2_s);
  add("laser.waist_m", s.laser.waist_m);
  add("laser.rep_rate_hz", s.laser.rep_rate_hz);
  if (s.laser.avg_power_w)
    add("laser.avg_power_w", *s.laser.avg_power_w);
  if (s.laser.beta_max)
    add("laser.beta_max", *s.laser.beta_max);
  add("geometry.grating_to_focus_m", s.geometry.grating_to_focus_m);
  add("geometry.slit_width_m", s.geometry.slit_width_m);
  add("geometry.spot_fwhm_m", s.geometry.spot_fwhm_m);
  out.push_back(s.numerics.max_order ? fmt::format("numerics.max_order = {}", *s.numerics.max_order)
                                     : std::string("numerics.max_order = auto"));
  add("numerics.quadrature_tolerance", s.numerics.quadrature_tolerance);
  if (s.numerics.grid_step_m)
    add("numerics.grid_step_m", *s.numerics.grid_step_m);
  return out;
}

} // namespace kdsim
