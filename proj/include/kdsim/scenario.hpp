#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kdsim/coupling.hpp"
#include "kdsim/ensemble.hpp"
#include "kdsim/errors.hpp"
#include "kdsim/kinematics.hpp"
#include "kdsim/optics.hpp"
#include "kdsim/sidebands.hpp"

namespace kdsim {

/// Complete description of one experiment. Field names mirror the keys of
/// the scenario file; units are part of the names.
struct Scenario
{
  struct Electron
  {
    double kinetic_energy_ev = 0.0;
    double pulse_fwhm_s = 0.0;
    double beam_sigma_x_m = 0.0;
    double beam_sigma_y_m = 0.0;
    double arrival_offset_s = 0.0;
  } electron;

  struct Laser
  {
    double wavelength_m = 0.0;
    double pulse_fwhm_1_s = 0.0;
    double pulse_fwhm_2_s = 0.0;
    double waist_m = 0.0;
    double rep_rate_hz = 0.0;
    std::optional<double> avg_power_w;
    std::optional<double> beta_max;
  } laser;

  struct Geometry
  {
    double grating_to_focus_m = 0.0;
    double slit_width_m = 0.0;
    double spot_fwhm_m = 0.0;
  } geometry;

  struct Numerics
  {
    std::optional<int> max_order; // empty = auto
    double quadrature_tolerance = 1e-9;
    std::optional<double> grid_step_m; // empty = order separation / 40
  } numerics;

  std::uint64_t seed = 0;
};

namespace detail {
inline void require_positive(double v, const char* field)
{
  if (!(v > 0.0) || !std::isfinite(v))
    throw ConfigError(field, "must be a positive finite number");
}
} // namespace detail

/// Throws ConfigError naming the offending key. Returns non-fatal warnings.
inline std::vector<std::string> validate(const Scenario& s)
{
  using detail::require_positive;
  require_positive(s.electron.kinetic_energy_ev, "electron.kinetic_energy_ev");
  require_positive(s.electron.pulse_fwhm_s, "electron.pulse_fwhm_s");
  require_positive(s.electron.beam_sigma_x_m, "electron.beam_sigma_x_m");
  require_positive(s.electron.beam_sigma_y_m, "electron.beam_sigma_y_m");
  if (!std::isfinite(s.electron.arrival_offset_s))
    throw ConfigError("electron.arrival_offset_s", "must be finite");
  require_positive(s.laser.wavelength_m, "laser.wavelength_m");
  require_positive(s.laser.pulse_fwhm_1_s, "laser.pulse_fwhm_1_s");
  require_positive(s.laser.pulse_fwhm_2_s, "laser.pulse_fwhm_2_s");
  require_positive(s.laser.waist_m, "laser.waist_m");
  require_positive(s.laser.rep_rate_hz, "laser.rep_rate_hz");
  if (s.laser.avg_power_w.has_value() == s.laser.beta_max.has_value())
    throw ConfigError("laser.avg_power_w", "exactly one of laser.avg_power_w and laser.beta_max is required");
  if (s.laser.avg_power_w && !(*s.laser.avg_power_w >= 0.0 && std::isfinite(*s.laser.avg_power_w)))
    throw ConfigError("laser.avg_power_w", "must be a non-negative finite number");
  if (s.laser.beta_max && !(*s.laser.beta_max >= 0.0 && std::isfinite(*s.laser.beta_max)))
    throw ConfigError("laser.beta_max", "must be a non-negative finite number");
  require_positive(s.geometry.grating_to_focus_m, "geometry.grating_to_focus_m");
  require_positive(s.geometry.slit_width_m, "geometry.slit_width_m");
  require_positive(s.geometry.spot_fwhm_m, "geometry.spot_fwhm_m");
  if (s.numerics.max_order && *s.numerics.max_order < 0)
    throw ConfigError("numerics.max_order", "must be a non-negative integer or 'auto'");
  require_positive(s.numerics.quadrature_tolerance, "numerics.quadrature_tolerance");
  if (s.numerics.grid_step_m)
    require_positive(*s.numerics.grid_step_m, "numerics.grid_step_m");

  std::vector<std::string> warnings;
  // Orders only form if the beam covers at least one grating period.
  const double period = 0.5 * s.laser.wavelength_m;
  if (constants::fwhm_per_sigma * s.electron.beam_sigma_x_m < period)
    warnings.push_back("electron beam span along x is smaller than the standing-wave period");
  return warnings;
}

/// Physical objects assembled from a scenario.
struct Model
{
  ElectronKinematics electron;
  PhotonParams photon;
  StandingWave wave; // at the configured power, or at 1 W when beta_max is configured
  CouplingField field; // scaled to `beta_max`
  ElectronDistribution distribution;
  DiffractionGeometry geometry;
  double beta_max = 0.0;
  double beta_per_watt = 0.0;
};

inline StandingWave standing_wave_at(const Scenario& s, const PhotonParams& photon, double avg_power)
{
  return make_standing_wave(photon, s.laser.waist_m, s.laser.pulse_fwhm_1_s, s.laser.pulse_fwhm_2_s,
                            s.laser.rep_rate_hz, avg_power);
}

inline Model build_model(const Scenario& s)
{
  validate(s);
  const ElectronKinematics ek = electron_kinematics(s.electron.kinetic_energy_ev);
  const PhotonParams ph = photon_params(s.laser.wavelength_m);

  const StandingWave reference = standing_wave_at(s, ph, 1.0);
  const CouplingField reference_field(make_coupling_params(ek, reference));

  const double power = s.laser.avg_power_w.value_or(1.0);
  const StandingWave wave = s.laser.avg_power_w ? standing_wave_at(s, ph, power) : reference;
  CouplingField field = s.laser.avg_power_w ? CouplingField(make_coupling_params(ek, wave))
                                            : reference_field.scaled_to(*s.laser.beta_max);

  Model m{ek,
          ph,
          wave,
          std::move(field),
          ElectronDistribution{s.electron.beam_sigma_x_m, s.electron.beam_sigma_y_m,
                               s.electron.pulse_fwhm_s, s.electron.arrival_offset_s},
          diffraction_geometry(ek, ph, s.geometry.grating_to_focus_m, s.geometry.slit_width_m,
                               s.geometry.spot_fwhm_m),
          0.0,
          reference_field.beta_max()};
  m.beta_max = m.field.beta_max();
  return m;
}

inline int resolved_max_order(const Scenario& s, double beta_max)
{
  return s.numerics.max_order.value_or(truncation_rule(beta_max));
}

inline EnsembleOptions ensemble_options(const Scenario& s)
{
  EnsembleOptions o;
  o.tolerance = s.numerics.quadrature_tolerance;
  return o;
}

} // namespace kdsim
