#pragma once

#include <cmath>

#include "kdsim/constants.hpp"
#include "kdsim/errors.hpp"
#include "kdsim/kinematics.hpp"

namespace kdsim {

/// Pulsed standing wave formed by two counter-propagating Gaussian beams
/// travelling along +-x, polarized along the electron axis z.
///
/// `pulse_fwhm_1` and `pulse_fwhm_2` are intensity FWHM durations of the two
/// beams, `waist` is the 1/e^2 intensity radius shared by both. The
/// configured average power is split equally between the beams.
/// `peak_field` is the amplitude E0 of the standing-wave field
/// E0 cos(kx) cos(wt) whose cos(2kx) intensity modulation matches the
/// interference term of the two beams: E0 = 2 sqrt(E1 E2).
struct StandingWave
{
  PhotonParams photon;
  double waist = 0.0;        // m
  double pulse_fwhm_1 = 0.0; // s
  double pulse_fwhm_2 = 0.0; // s
  double rep_rate = 0.0;     // Hz
  double avg_power = 0.0;    // W, both beams together
  double peak_field = 0.0;   // V/m
};

struct EnvelopeSample
{
  double value = 0.0;
  double x = 0.0, y = 0.0, z = 0.0; // m
  double t = 0.0;                   // s
};

/// Effective duration of a Gaussian pulse, i.e. the time integral of its
/// normalized intensity profile.
inline double effective_duration(double pulse_fwhm)
{
  return pulse_fwhm * std::sqrt(constants::pi / (4.0 * constants::ln2));
}

/// Peak electric field of a single Gaussian beam of the given average power.
///
/// U = P / f is the pulse energy, I_peak = 2 U / (pi w0^2 tau_eff) the peak
/// intensity and E0 = sqrt(2 I_peak / (eps0 c)).
inline double peak_field(double avg_power, double rep_rate, double pulse_fwhm, double waist)
{
  if (!(avg_power > 0.0) || !(rep_rate > 0.0) || !(pulse_fwhm > 0.0) || !(waist > 0.0))
    throw DomainError("peak_field: power, repetition rate, duration and waist must be positive");
  const double pulse_energy = avg_power / rep_rate;
  const double peak_intensity =
      2.0 * pulse_energy / (constants::pi * waist * waist * effective_duration(pulse_fwhm));
  return std::sqrt(2.0 * peak_intensity / (constants::vacuum_permittivity * constants::light_speed));
}

inline StandingWave make_standing_wave(const PhotonParams& photon, double waist,
                                       double pulse_fwhm_1, double pulse_fwhm_2,
                                       double rep_rate, double avg_power)
{
  if (!(waist > 0.0))
    throw DomainError("make_standing_wave: waist must be positive");
  if (!(pulse_fwhm_1 > 0.0) || !(pulse_fwhm_2 > 0.0))
    throw DomainError("make_standing_wave: pulse durations must be positive");
  if (!(rep_rate > 0.0))
    throw DomainError("make_standing_wave: repetition rate must be positive");
  if (!(avg_power >= 0.0) || !std::isfinite(avg_power))
    throw DomainError("make_standing_wave: average power must be non-negative");

  StandingWave sw;
  sw.photon = photon;
  sw.waist = waist;
  sw.pulse_fwhm_1 = pulse_fwhm_1;
  sw.pulse_fwhm_2 = pulse_fwhm_2;
  sw.rep_rate = rep_rate;
  sw.avg_power = avg_power;
  if (avg_power > 0.0) {
    const double e1 = peak_field(0.5 * avg_power, rep_rate, pulse_fwhm_1, waist);
    const double e2 = peak_field(0.5 * avg_power, rep_rate, pulse_fwhm_2, waist);
    sw.peak_field = 2.0 * std::sqrt(e1 * e2);
  }
  return sw;
}

/// Intensity envelope of a single Gaussian pulse, unit peak.
inline double temporal_envelope(double t, double pulse_fwhm)
{
  return std::exp(-4.0 * constants::ln2 * t * t / (pulse_fwhm * pulse_fwhm));
}

/// Envelope of the cos(2kx) interference term, unit peak at the origin.
///
/// Transverse Gaussian in (y, z) times the geometric mean of the two pulse
/// intensity envelopes. Retardation x/c is neglected, so the value does not
/// depend on x.
inline double cross_envelope_value(double y, double z, double t, const StandingWave& sw)
{
  const double w2 = sw.waist * sw.waist;
  const double rate = 2.0 * constants::ln2 *
                      (1.0 / (sw.pulse_fwhm_1 * sw.pulse_fwhm_1) +
                       1.0 / (sw.pulse_fwhm_2 * sw.pulse_fwhm_2));
  return std::exp(-2.0 * (y * y + z * z) / w2 - rate * t * t);
}

inline EnvelopeSample cross_envelope(double x, double y, double z, double t, const StandingWave& sw)
{
  return {cross_envelope_value(y, z, t, sw), x, y, z, t};
}

/// FWHM of the temporal factor of `cross_envelope_value`.
inline double cross_envelope_fwhm(const StandingWave& sw)
{
  const double a = 1.0 / (sw.pulse_fwhm_1 * sw.pulse_fwhm_1);
  const double b = 1.0 / (sw.pulse_fwhm_2 * sw.pulse_fwhm_2);
  return 1.0 / std::sqrt(0.5 * (a + b));
}

} // namespace kdsim
