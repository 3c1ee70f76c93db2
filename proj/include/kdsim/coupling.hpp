#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "kdsim/constants.hpp"
#include "kdsim/errors.hpp"
#include "kdsim/kinematics.hpp"
#include "kdsim/optics.hpp"
#include "kdsim/quadrature.hpp"

namespace kdsim {

/// Inputs of the coupling-constant line integral.
///
/// `prefactor` is e^2 E0^2 / (8 m_e hbar gamma^3 omega^2 v_z), stored as a
/// magnitude; the physical ponderomotive phase carries the opposite sign.
/// `z_int` is the half-span of the integration along the electron path.
struct CouplingParams
{
  ElectronKinematics electron;
  StandingWave wave;
  double prefactor = 0.0; // 1/m
  double z_int = 0.0;     // m
};

inline constexpr double coupling_rel_tol = 1e-9;

inline double coupling_prefactor(const ElectronKinematics& ek, const StandingWave& sw)
{
  using namespace constants;
  const double g3 = ek.gamma * ek.gamma * ek.gamma;
  const double w = sw.photon.angular_frequency;
  return electron_charge * electron_charge * sw.peak_field * sw.peak_field /
         (8.0 * electron_mass * reduced_planck * g3 * w * w * ek.speed);
}

inline CouplingParams make_coupling_params(const ElectronKinematics& ek, const StandingWave& sw)
{
  if (!(ek.speed > 0.0))
    throw DomainError("make_coupling_params: electron speed must be positive");
  if (!(sw.waist > 0.0) || !(sw.pulse_fwhm_1 > 0.0) || !(sw.pulse_fwhm_2 > 0.0))
    throw DomainError("make_coupling_params: invalid standing wave");
  CouplingParams p;
  p.electron = ek;
  p.wave = sw;
  p.prefactor = coupling_prefactor(ek, sw);
  // The transverse factor exp(-2 z^2 / w0^2) alone is below e^-72 here,
  // whatever the delay.
  p.z_int = 6.0 * sw.waist;
  return p;
}

/// Line integral of the cross envelope along z' with t = z'/v_z - tau.
inline double envelope_line_integral(double y, double tau, const CouplingParams& p)
{
  const double v = p.electron.speed;
  const StandingWave& sw = p.wave;
  const double w0 = sw.waist;
  // Integrated in u = z'/w0: the Kronrod error floor is not scale-invariant.
  auto integrand = [&](double u) { return cross_envelope_value(y, u * w0, u * w0 / v - tau, sw); };
  const double span = p.z_int / w0;
  // Panels of half a waist resolve the transverse Gaussian on the first pass.
  const int panels = 24;
  // The on-axis spatial integral sqrt(pi/2) bounds every line integral;
  // errors below rel_tol of it are negligible against beta_max wherever the
  // value itself is tiny.
  const double bound = std::sqrt(constants::pi / 2.0);
  return w0 * quad::integrate_adaptive(integrand, -span, span, panels, coupling_rel_tol,
                                       coupling_rel_tol * bound)
                  .value;
}

/// Same integral over the whole line, in closed form:
///   int exp(-a z^2 - b (z/v - tau)^2) dz = sqrt(pi/A) exp(-a b tau^2 / A),
///   A = a + b / v^2.
inline double envelope_line_integral_closed_form(double y, double tau, const CouplingParams& p)
{
  const StandingWave& sw = p.wave;
  const double v = p.electron.speed;
  const double a = 2.0 / (sw.waist * sw.waist);
  const double b = 2.0 * constants::ln2 *
                   (1.0 / (sw.pulse_fwhm_1 * sw.pulse_fwhm_1) +
                    1.0 / (sw.pulse_fwhm_2 * sw.pulse_fwhm_2));
  const double big_a = a + b / (v * v);
  return std::exp(-a * y * y) * std::sqrt(constants::pi / big_a) *
         std::exp(-a * b * tau * tau / big_a);
}

/// Coupling constant at transverse position (x, y) and delay tau.
inline double beta_at(double /*x*/, double y, double tau, const CouplingParams& p)
{
  if (p.prefactor == 0.0)
    return 0.0;
  return std::abs(p.prefactor) * envelope_line_integral(y, tau, p);
}

inline double beta_at_closed_form(double /*x*/, double y, double tau, const CouplingParams& p)
{
  return std::abs(p.prefactor) * envelope_line_integral_closed_form(y, tau, p);
}

/// The envelope peaks at the origin, so the maximum sits at y = 0, tau = 0
/// for any x.
inline double beta_max(const CouplingParams& p)
{
  return beta_at(0.0, 0.0, 0.0, p);
}

/// Phase imprinted across the grating, beta(y, tau) cos(2 k x), in the
/// magnitude convention of `beta_at`. The physical phase is its negative
/// plus an x-independent offset, neither of which changes populations.
inline std::vector<double> phase_profile(std::span<const double> x_grid, double y, double tau,
                                         const CouplingParams& p)
{
  for (std::size_t i = 1; i < x_grid.size(); ++i)
    if (!(x_grid[i] > x_grid[i - 1]))
      throw DomainError("phase_profile: x grid must be strictly increasing");
  const double beta = beta_at(0.0, y, tau, p);
  const double k2 = 2.0 * p.wave.photon.wavenumber;
  std::vector<double> phase(x_grid.size());
  for (std::size_t i = 0; i < x_grid.size(); ++i)
    phase[i] = beta * std::cos(k2 * x_grid[i]);
  return phase;
}

/// Evaluator of beta(x, y, tau) for one physical configuration.
///
/// The envelope is separable in y and independent of x, so batch evaluation
/// on a (y, tau) grid needs one line integral per tau only.
class CouplingField
{
public:
  explicit CouplingField(CouplingParams params)
      : mParams(std::move(params)), mPeakIntegral(envelope_line_integral(0.0, 0.0, mParams))
  {
  }

  const CouplingParams& params() const { return mParams; }

  double beta_max() const { return std::abs(mParams.prefactor) * mPeakIntegral; }

  double operator()(double x, double y, double tau) const { return beta_at(x, y, tau, mParams); }

  static constexpr bool x_independent() { return true; }

  /// Half-widths in y and tau beyond which beta is below e^-25 of its peak.
  std::array<double, 2> feature_widths() const
  {
    const StandingWave& sw = mParams.wave;
    const double v = mParams.electron.speed;
    const double a = 2.0 / (sw.waist * sw.waist);
    const double b = 2.0 * constants::ln2 *
                     (1.0 / (sw.pulse_fwhm_1 * sw.pulse_fwhm_1) + 1.0 / (sw.pulse_fwhm_2 * sw.pulse_fwhm_2));
    const double big_a = a + b / (v * v);
    return {5.0 / std::sqrt(a), 5.0 * std::sqrt(big_a / (a * b))};
  }

  /// Same spatio-temporal shape, prefactor rescaled so that beta_max equals
  /// `target`. Works for a zero-field configuration as well.
  CouplingField scaled_to(double target) const
  {
    if (!(target >= 0.0) || !std::isfinite(target))
      throw DomainError("CouplingField::scaled_to: beta_max must be non-negative");
    CouplingField copy = *this;
    copy.mParams.prefactor = target / mPeakIntegral;
    return copy;
  }

  /// beta at (0, ys[i], taus[j]), row-major in i.
  std::vector<double> beta_grid(std::span<const double> ys, std::span<const double> taus) const
  {
    std::vector<double> out(ys.size() * taus.size(), 0.0);
    if (mParams.prefactor == 0.0)
      return out;
    std::vector<double> temporal(taus.size());
    for (std::size_t j = 0; j < taus.size(); ++j)
      temporal[j] = beta_at(0.0, 0.0, taus[j], mParams);
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double transverse = cross_envelope_value(ys[i], 0.0, 0.0, mParams.wave);
      for (std::size_t j = 0; j < taus.size(); ++j)
        out[i * taus.size() + j] = transverse * temporal[j];
    }
    return out;
  }

private:
  CouplingParams mParams;
  double mPeakIntegral;
};

} // namespace kdsim
