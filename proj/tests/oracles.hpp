#pragma once

// Reference computations used only by the tests. Each one takes a route that
// shares no code with the library implementation it checks.

#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "kdsim/scenario.hpp"

namespace oracle {

/// Ascending power series of J_n(x) in long double. Accurate to ~1e-14
/// absolute for x <= 12.
inline double bessel_series(int n, double x)
{
  n = std::abs(n);
  const long double h = 0.5L * x;
  long double term = 1.0L;
  for (int k = 1; k <= n; ++k)
    term *= h / k;
  long double sum = term;
  for (int k = 1; k < 400; ++k) {
    term *= -h * h / (static_cast<long double>(k) * (k + n));
    sum += term;
    if (std::fabs(term) < 1e-30L * std::fabs(sum) && k > 2 * x)
      break;
  }
  return static_cast<double>(sum);
}

/// Signed J_n for negative orders.
inline double bessel_signed(int n, double x)
{
  const double v = bessel_series(n, x);
  return (n < 0 && (n % 2 != 0)) ? -v : v;
}

/// Root of `f` in [a, b] by bisection; f(a) and f(b) must differ in sign.
inline double bisect(const std::function<double(double)>& f, double a, double b, double tol = 1e-12)
{
  double fa = f(a);
  while (b - a > tol) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if ((fm < 0) == (fa < 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

/// Golden-section search for a maximum of a unimodal function.
inline double argmax(const std::function<double(double)>& f, double a, double b, double tol = 1e-6)
{
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Composite Simpson rule with `n` (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n)
{
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i)
    s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Gaussian of FWHM `spot` convolved with a unit-area top-hat of width
/// `slit`, by Simpson integration over the slit.
inline double convolved_kernel(double x, double spot, double slit, int n = 4000)
{
  const double sigma = spot / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const double norm = 1.0 / (std::sqrt(2.0 * M_PI) * sigma);
  return simpson([&](double s) { return norm * std::exp(-0.5 * (x - s) * (x - s) / (sigma * sigma)); },
                 -0.5 * slit, 0.5 * slit, n) / slit;
}

/// Scenario close to the 20 keV experiment with a long electron pulse.
inline kdsim::Scenario incoherent_scenario(double beta_max = 9.0)
{
  kdsim::Scenario s;
  s.electron = {20e3, 890e-15, 10e-6, 10e-6, 0.0};
  s.laser.wavelength_m = 1030e-9;
  s.laser.pulse_fwhm_1_s = 220e-15;
  s.laser.pulse_fwhm_2_s = 700e-15;
  s.laser.waist_m = 10e-6;
  s.laser.rep_rate_hz = 1e6;
  s.laser.beta_max = beta_max;
  s.geometry = {12e-3, 70e-9, 20e-9};
  s.seed = 1;
  return s;
}

/// Scenario close to the 30 keV experiment: long laser pulses, short
/// electron pulse, narrow electron beam.
inline kdsim::Scenario coherent_scenario(double beta_max = 4.52)
{
  kdsim::Scenario s;
  s.electron = {30e3, 100e-15, 1.274e-6, 1.274e-6, 0.0};
  s.laser.wavelength_m = 1030e-9;
  s.laser.pulse_fwhm_1_s = 750e-15;
  s.laser.pulse_fwhm_2_s = 750e-15;
  s.laser.waist_m = 10e-6;
  s.laser.rep_rate_hz = 1e6;
  s.laser.beta_max = beta_max;
  s.geometry = {12e-3, 70e-9, 20e-9};
  s.seed = 1;
  return s;
}

} // namespace oracle
