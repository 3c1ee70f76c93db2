#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <span>
#include <vector>

#include "kdsim/constants.hpp"
#include "kdsim/errors.hpp"

namespace kdsim {

/// Writes J_0(x) ... J_{j.size()-1}(x) into `j`, for real x >= 0.
///
/// Miller's downward recurrence J_{k-1} = (2k/x) J_k - J_{k+1}, normalized
/// with J_0 + 2 sum_k J_{2k} = 1. Absolute error is at round-off level
/// (~1e-15) for x <= 30.
inline void bessel_j_orders_into(double x, std::span<double> j)
{
  if (j.empty())
    throw DomainError("bessel_j_orders: order must be non-negative");
  if (!(x >= 0.0) || !std::isfinite(x))
    throw DomainError("bessel_j_orders: argument must be finite and non-negative");

  const int max_order = static_cast<int>(j.size()) - 1;
  std::fill(j.begin(), j.end(), 0.0);
  if (x == 0.0) {
    j[0] = 1.0;
    return;
  }
  // Leading series term; the next one is smaller by x^2/4 < 1e-16. The
  // recurrence below would overflow in one step for tiny x.
  if (x < 1e-8) {
    double term = 1.0;
    for (std::size_t n = 0; n < j.size() && term != 0.0; ++n) {
      j[n] = term;
      term *= 0.5 * x / static_cast<double>(n + 1);
    }
    return;
  }

  const double reach = std::max(static_cast<double>(max_order), x);
  int start = static_cast<int>(reach + 30.0 + std::sqrt(60.0 * reach));
  start += start % 2; // even, so the normalization sum picks up J_start

  const double big = 1e250;
  double next = 0.0;   // J_{k+1}
  double cur = 1e-300; // J_k, arbitrary scale
  double norm = 0.0;
  for (int k = start; k > 0; --k) {
    if (k <= max_order)
      j[static_cast<std::size_t>(k)] = cur;
    if (k % 2 == 0)
      norm += 2.0 * cur;
    const double prev = (2.0 * k / x) * cur - next;
    next = cur;
    cur = prev;
    if (std::abs(cur) > big) {
      cur /= big;
      next /= big;
      norm /= big;
      for (int m = k; m <= max_order; ++m)
        j[static_cast<std::size_t>(m)] /= big;
    }
  }
  norm += cur; // J_0
  j[0] = cur;
  for (double& v : j)
    v /= norm;
}

inline std::vector<double> bessel_j_orders(double x, int max_order)
{
  if (max_order < 0)
    throw DomainError("bessel_j_orders: order must be non-negative");
  std::vector<double> j(static_cast<std::size_t>(max_order) + 1);
  bessel_j_orders_into(x, j);
  return j;
}

/// Populations of the transverse-momentum orders n in [-N, N].
struct SidebandSpectrum
{
  int max_order = 0;
  std::vector<double> populations;             // index n + max_order
  std::vector<std::complex<double>> amplitudes; // empty unless requested
  double tail_mass = 0.0;                       // population outside [-N, N]
  bool truncated = false;                       // N below the truncation rule

  double population(int n) const
  {
    if (n < -max_order || n > max_order)
      return 0.0;
    return populations[static_cast<std::size_t>(n + max_order)];
  }

  std::complex<double> amplitude(int n) const
  {
    return amplitudes.at(static_cast<std::size_t>(n + max_order));
  }

  double total() const { return std::accumulate(populations.begin(), populations.end(), 0.0); }
};

inline constexpr double truncation_tolerance = 1e-12;

/// Population outside [-N, N] for a single beta, 2 sum_{n>N} J_n^2.
inline double sideband_tail_mass(double beta, int max_order)
{
  const int reach = max_order + 40 + static_cast<int>(beta);
  const auto j = bessel_j_orders(beta, reach);
  double tail = 0.0;
  for (int n = reach; n > max_order; --n)
    tail += j[static_cast<std::size_t>(n)] * j[static_cast<std::size_t>(n)];
  return 2.0 * tail;
}

/// Smallest order N with population outside [-N, N] below 1e-12, starting
/// from the heuristic ceil(beta + 8 + 2 beta^(2/3)) and stepping up until the
/// sum rule confirms it.
inline int truncation_rule(double beta)
{
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw DomainError("truncation_rule: beta must be finite and non-negative");
  int n = static_cast<int>(std::ceil(beta + 8.0 + 2.0 * std::cbrt(beta * beta)));
  while (sideband_tail_mass(beta, n) >= truncation_tolerance)
    ++n;
  return n;
}

/// Jacobi-Anger populations J_n(beta)^2; amplitudes i^n J_n(beta) on request.
/// An order below the truncation rule is allowed but flagged.
inline SidebandSpectrum sideband_populations(double beta, int max_order, bool with_amplitudes = false)
{
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw DomainError("sideband_populations: beta must be finite and non-negative");
  if (max_order < 0)
    throw DomainError("sideband_populations: order must be non-negative");

  SidebandSpectrum s;
  s.max_order = max_order;
  const auto j = bessel_j_orders(beta, max_order);
  s.populations.resize(2 * static_cast<std::size_t>(max_order) + 1);
  for (int n = 0; n <= max_order; ++n) {
    const double p = j[static_cast<std::size_t>(n)] * j[static_cast<std::size_t>(n)];
    s.populations[static_cast<std::size_t>(max_order + n)] = p;
    s.populations[static_cast<std::size_t>(max_order - n)] = p;
  }
  if (with_amplitudes) {
    s.amplitudes.resize(s.populations.size());
    const std::complex<double> unit_i(0.0, 1.0);
    for (int n = -max_order; n <= max_order; ++n) {
      // J_{-n} = (-1)^n J_n
      const double jn = j[static_cast<std::size_t>(std::abs(n))] * ((n < 0 && (n % 2)) ? -1.0 : 1.0);
      // i^n for integer n, exact
      const int r = ((n % 4) + 4) % 4;
      const std::complex<double> in = r == 0 ? 1.0 : r == 1 ? unit_i : r == 2 ? -1.0 : -unit_i;
      s.amplitudes[static_cast<std::size_t>(n + max_order)] = in * jn;
    }
  }
  s.tail_mass = sideband_tail_mass(beta, max_order);
  s.truncated = s.tail_mass >= truncation_tolerance;
  return s;
}

/// Independent check of the Jacobi-Anger expansion: samples the grating
/// transmission exp(i beta cos theta) over one period on `grid_size` points
/// and takes its discrete Fourier coefficients c_n for |n| <= max_order.
inline SidebandSpectrum phase_grating_oracle(double beta, int grid_size, int max_order)
{
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw DomainError("phase_grating_oracle: beta must be finite and non-negative");
  if (max_order < 0)
    throw DomainError("phase_grating_oracle: order must be non-negative");
  if (grid_size < 8 * std::max(max_order, 1))
    throw DomainError("phase_grating_oracle: grid too small for the requested orders (aliasing)");

  std::vector<std::complex<double>> field(static_cast<std::size_t>(grid_size));
  for (int m = 0; m < grid_size; ++m) {
    const double theta = constants::two_pi * m / grid_size;
    field[static_cast<std::size_t>(m)] = std::polar(1.0, beta * std::cos(theta));
  }

  SidebandSpectrum s;
  s.max_order = max_order;
  s.populations.resize(2 * static_cast<std::size_t>(max_order) + 1);
  s.amplitudes.resize(s.populations.size());
  for (int n = -max_order; n <= max_order; ++n) {
    std::complex<double> c = 0.0;
    for (int m = 0; m < grid_size; ++m) {
      // (n m) mod grid_size keeps the twiddle argument small and exact.
      const long long idx = ((static_cast<long long>(n) * m) % grid_size + grid_size) % grid_size;
      c += field[static_cast<std::size_t>(m)] *
           std::polar(1.0, -constants::two_pi * static_cast<double>(idx) / grid_size);
    }
    c /= static_cast<double>(grid_size);
    s.amplitudes[static_cast<std::size_t>(n + max_order)] = c;
    s.populations[static_cast<std::size_t>(n + max_order)] = std::norm(c);
  }
  s.tail_mass = std::max(0.0, 1.0 - s.total());
  s.truncated = s.tail_mass >= truncation_tolerance;
  return s;
}

inline SidebandSpectrum phase_grating_oracle(double beta, int grid_size)
{
  return phase_grating_oracle(beta, grid_size, std::min(truncation_rule(beta), grid_size / 8));
}

} // namespace kdsim
