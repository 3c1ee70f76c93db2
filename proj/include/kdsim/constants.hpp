#pragma once

#include <numbers>

namespace kdsim::constants {

// CODATA 2018, SI units.
inline constexpr double electron_charge = 1.602176634e-19;      // C
inline constexpr double electron_mass = 9.1093837015e-31;       // kg
inline constexpr double reduced_planck = 1.054571817e-34;       // J s
inline constexpr double light_speed = 299792458.0;              // m/s
inline constexpr double vacuum_permittivity = 8.8541878128e-12; // F/m

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double ln2 = std::numbers::ln2;

/// Electron rest energy m_e c^2 in joule.
inline constexpr double electron_rest_energy =
    electron_mass * light_speed * light_speed;

/// Joule per electronvolt.
inline constexpr double electronvolt = electron_charge;

/// Ratio between the FWHM and the standard deviation of a Gaussian.
inline constexpr double fwhm_per_sigma = 2.3548200450309493; // 2 sqrt(2 ln 2)

} // namespace kdsim::constants
