#pragma once

#include <cmath>

#include "kdsim/constants.hpp"
#include "kdsim/errors.hpp"

namespace kdsim {

/// Relativistic kinematics of a free electron. All members are SI except
/// `kinetic_energy_ev`.
struct ElectronKinematics
{
  double kinetic_energy_ev = 0.0;
  double gamma = 1.0;
  double speed = 0.0;       // m/s, along z
  double momentum = 0.0;    // kg m/s
  double de_broglie = 0.0;  // m
};

struct PhotonParams
{
  double wavelength = 0.0;        // m
  double wavenumber = 0.0;        // 1/m
  double angular_frequency = 0.0; // rad/s
};

/// Focal-plane geometry of the convergent-beam arrangement: the grating sits
/// `grating_to_focus` upstream of the focus, where neighbouring orders are
/// separated by `order_separation`.
struct DiffractionGeometry
{
  double grating_to_focus = 0.0; // m
  double order_angle = 0.0;      // rad
  double order_separation = 0.0; // m
  double slit_width = 0.0;       // m
  double spot_fwhm = 0.0;        // m
};

inline ElectronKinematics electron_kinematics(double kinetic_energy_ev)
{
  using namespace constants;
  if (!(kinetic_energy_ev > 0.0) || !std::isfinite(kinetic_energy_ev))
    throw DomainError("electron_kinematics: kinetic energy must be positive");

  ElectronKinematics ek;
  ek.kinetic_energy_ev = kinetic_energy_ev;

  // The eV -> J conversion happens here and nowhere else.
  const double kinetic = kinetic_energy_ev * electronvolt;
  const double gamma_minus_one = kinetic / electron_rest_energy;
  ek.gamma = 1.0 + gamma_minus_one;
  // sqrt(gamma^2 - 1) written to stay accurate for gamma -> 1.
  const double gamma_beta = std::sqrt(gamma_minus_one * (ek.gamma + 1.0));
  ek.speed = light_speed * gamma_beta / ek.gamma;
  ek.momentum = electron_mass * light_speed * gamma_beta;
  ek.de_broglie = two_pi * reduced_planck / ek.momentum;
  return ek;
}

inline PhotonParams photon_params(double wavelength)
{
  if (!(wavelength > 0.0) || !std::isfinite(wavelength))
    throw DomainError("photon_params: wavelength must be positive");
  PhotonParams ph;
  ph.wavelength = wavelength;
  ph.wavenumber = constants::two_pi / wavelength;
  ph.angular_frequency = constants::light_speed * ph.wavenumber;
  return ph;
}

/// Angle between neighbouring orders is the two-photon recoil 2 hbar k over
/// the electron momentum; the focal-plane spacing is that angle times L.
inline DiffractionGeometry diffraction_geometry(const ElectronKinematics& ek,
                                                const PhotonParams& ph,
                                                double grating_to_focus,
                                                double slit_width,
                                                double spot_fwhm)
{
  if (!(grating_to_focus > 0.0))
    throw DomainError("diffraction_geometry: grating-to-focus distance must be positive");
  if (!(slit_width > 0.0))
    throw DomainError("diffraction_geometry: slit width must be positive");
  if (!(spot_fwhm > 0.0))
    throw DomainError("diffraction_geometry: spot FWHM must be positive");
  if (!(ek.momentum > 0.0) || !(ph.wavenumber > 0.0))
    throw DomainError("diffraction_geometry: invalid kinematics");

  DiffractionGeometry g;
  g.grating_to_focus = grating_to_focus;
  g.order_angle = 2.0 * constants::reduced_planck * ph.wavenumber / ek.momentum;
  g.order_separation = grating_to_focus * g.order_angle;
  g.slit_width = slit_width;
  g.spot_fwhm = spot_fwhm;
  return g;
}

} // namespace kdsim
