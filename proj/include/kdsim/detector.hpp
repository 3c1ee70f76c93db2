#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "kdsim/constants.hpp"
#include "kdsim/coupling.hpp"
#include "kdsim/ensemble.hpp"
#include "kdsim/errors.hpp"
#include "kdsim/kinematics.hpp"
#include "kdsim/scenario.hpp"

namespace kdsim {

/// Focal-plane intensity recorded by scanning the pattern across the slit,
/// normalized to unit area over `positions`.
struct ScatteringPattern
{
  std::vector<double> positions; // m, increasing
  std::vector<double> intensity; // 1/m
  DiffractionGeometry geometry;
};

struct PowerScan
{
  std::vector<double> powers;    // W
  std::vector<double> beta_max;
  std::vector<double> positions; // m, shared by all rows
  std::vector<std::vector<double>> intensity; // [power][position]
  int max_order = 0;
  DiffractionGeometry geometry;
};

/// Instrument response: Gaussian spot of FWHM `spot_fwhm` convolved with a
/// top-hat of width `slit_width`, unit area.
inline double detection_kernel(double x, const DiffractionGeometry& g)
{
  const double sigma = g.spot_fwhm / constants::fwhm_per_sigma;
  const double half = 0.5 * g.slit_width;
  const double s = 1.0 / (std::sqrt(2.0) * sigma);
  return 0.5 * (std::erfc((x - half) * s) - std::erfc((x + half) * s)) / g.slit_width;
}

/// Ratio between the intensity midway between two equal neighbouring peaks
/// and the peak intensity.
inline double midpoint_ratio(const DiffractionGeometry& g)
{
  const double d = g.order_separation;
  const double peak = detection_kernel(0.0, g) + detection_kernel(d, g);
  return 2.0 * detection_kernel(0.5 * d, g) / peak;
}

inline constexpr double resolvable_midpoint_ratio = 0.1;

/// Symmetric grid covering orders up to `max_order` with half a separation
/// of margin beyond the outermost window. `step` <= 0 selects separation/40.
inline std::vector<double> make_position_grid(const DiffractionGeometry& g, int max_order,
                                              double step = 0.0)
{
  const double d = g.order_separation;
  if (!(d > 0.0))
    throw DomainError("make_position_grid: invalid geometry");
  if (step <= 0.0)
    step = d / 40.0;
  if (step > d / 20.0)
    throw DomainError("make_position_grid: step must not exceed order separation / 20");
  const auto half_points = static_cast<long>(std::ceil((max_order + 1.5) * d / step));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(2 * half_points + 1));
  for (long i = -half_points; i <= half_points; ++i)
    grid.push_back(static_cast<double>(i) * step);
  return grid;
}

/// Trapezoid weights of a monotone grid.
inline std::vector<double> trapezoid_weights(std::span<const double> x)
{
  std::vector<double> w(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double h = 0.5 * (x[i] - x[i - 1]);
    w[i - 1] += h;
    w[i] += h;
  }
  return w;
}

inline double trapezoid(std::span<const double> x, std::span<const double> y)
{
  const auto w = trapezoid_weights(x);
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    s += w[i] * y[i];
  return s;
}

/// Kernel columns K(x_i - n dx) for a fixed grid and order range, so that
/// repeated syntheses (fits, scans) reduce to a matrix-vector product.
class PatternBasis
{
public:
  PatternBasis(const DiffractionGeometry& g, std::vector<double> grid, int max_order)
      : mGeometry(g), mGrid(std::move(grid)), mMaxOrder(max_order)
  {
    const double d = g.order_separation;
    if (mGrid.size() < 2)
      throw DomainError("synthesize_pattern: grid needs at least two points");
    double max_step = 0.0;
    for (std::size_t i = 1; i < mGrid.size(); ++i) {
      if (!(mGrid[i] > mGrid[i - 1]))
        throw DomainError("synthesize_pattern: grid must be strictly increasing");
      max_step = std::max(max_step, mGrid[i] - mGrid[i - 1]);
    }
    if (max_step > d / 20.0 * (1.0 + 1e-9))
      throw DomainError("synthesize_pattern: grid step exceeds order separation / 20");
    const double reach = (max_order + 1) * d * (1.0 - 1e-12);
    if (mGrid.front() > -reach || mGrid.back() < reach)
      throw DomainError("synthesize_pattern: grid too narrow for the requested orders (truncation)");

    const std::size_t orders = 2 * static_cast<std::size_t>(max_order) + 1;
    mColumns.resize(orders * mGrid.size());
    for (std::size_t k = 0; k < orders; ++k) {
      const double centre = (static_cast<double>(k) - max_order) * d;
      for (std::size_t i = 0; i < mGrid.size(); ++i)
        mColumns[k * mGrid.size() + i] = detection_kernel(mGrid[i] - centre, g);
    }
    mWeights = trapezoid_weights(mGrid);
  }

  int max_order() const { return mMaxOrder; }
  const std::vector<double>& grid() const { return mGrid; }

  /// I(x) = sum_n P_n K(x - n dx), rescaled to unit trapezoidal area.
  ScatteringPattern synthesize(std::span<const double> populations) const
  {
    const std::size_t orders = 2 * static_cast<std::size_t>(mMaxOrder) + 1;
    if (populations.size() != orders)
      throw DomainError("synthesize_pattern: population vector does not match max_order");
    ScatteringPattern p;
    p.positions = mGrid;
    p.geometry = mGeometry;
    p.intensity.assign(mGrid.size(), 0.0);
    for (std::size_t k = 0; k < orders; ++k) {
      const double pk = populations[k];
      if (pk == 0.0)
        continue;
      const double* col = &mColumns[k * mGrid.size()];
      for (std::size_t i = 0; i < mGrid.size(); ++i)
        p.intensity[i] += pk * col[i];
    }
    double area = 0.0;
    for (std::size_t i = 0; i < mGrid.size(); ++i)
      area += mWeights[i] * p.intensity[i];
    if (area > 0.0)
      for (double& v : p.intensity)
        v /= area;
    return p;
  }

private:
  DiffractionGeometry mGeometry;
  std::vector<double> mGrid;
  int mMaxOrder;
  std::vector<double> mColumns; // [order][grid]
  std::vector<double> mWeights;
};

inline ScatteringPattern synthesize_pattern(std::span<const double> populations,
                                            const DiffractionGeometry& g,
                                            std::vector<double> grid)
{
  if (populations.size() % 2 == 0)
    throw DomainError("synthesize_pattern: population vector must have odd length 2N+1");
  const int max_order = static_cast<int>(populations.size() / 2);
  return PatternBasis(g, std::move(grid), max_order).synthesize(populations);
}

inline ScatteringPattern synthesize_pattern(const EnsembleSpectrum& spectrum,
                                            const DiffractionGeometry& g,
                                            std::vector<double> grid)
{
  return synthesize_pattern(spectrum.populations, g, std::move(grid));
}

/// Intensity integrated over the windows [n dx - dx/2, n dx + dx/2) for
/// n in [-N, N], index n + N. Each sample belongs to exactly one window.
inline std::vector<double> extract_raw_populations(const ScatteringPattern& pattern, int max_order)
{
  const DiffractionGeometry& g = pattern.geometry;
  if (!(g.order_separation > 0.0))
    throw DomainError("extract_populations: pattern has no geometry");
  if (midpoint_ratio(g) >= resolvable_midpoint_ratio)
    throw DomainError("extract_populations: neighbouring orders are not resolved");
  if (pattern.positions.size() != pattern.intensity.size())
    throw DomainError("extract_populations: positions and intensity differ in length");

  const double d = g.order_separation;
  const auto w = trapezoid_weights(pattern.positions);
  std::vector<double> raw(2 * static_cast<std::size_t>(max_order) + 1, 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto n = static_cast<long>(std::floor(pattern.positions[i] / d + 0.5));
    if (n < -max_order || n > max_order)
      continue;
    raw[static_cast<std::size_t>(n + max_order)] += w[i] * pattern.intensity[i];
  }
  return raw;
}

/// Populations per order family: P_0 as measured, (P_n + P_-n)/2 for n >= 1.
inline std::vector<double> extract_populations(const ScatteringPattern& pattern, int max_order)
{
  const auto raw = extract_raw_populations(pattern, max_order);
  std::vector<double> out(static_cast<std::size_t>(max_order) + 1);
  out[0] = raw[static_cast<std::size_t>(max_order)];
  for (int n = 1; n <= max_order; ++n)
    out[static_cast<std::size_t>(n)] =
        0.5 * (raw[static_cast<std::size_t>(max_order + n)] + raw[static_cast<std::size_t>(max_order - n)]);
  return out;
}

/// Root-mean-square width of a pattern about its centroid.
inline double rms_width(const ScatteringPattern& p)
{
  const auto w = trapezoid_weights(p.positions);
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double a = w[i] * p.intensity[i];
    m0 += a;
    m1 += a * p.positions[i];
    m2 += a * p.positions[i] * p.positions[i];
  }
  if (!(m0 > 0.0))
    return 0.0;
  const double mean = m1 / m0;
  return std::sqrt(std::max(0.0, m2 / m0 - mean * mean));
}

/// Patterns for a sequence of average powers. The ensemble node set is
/// shared across rows since the coupling shape does not depend on power.
inline PowerScan power_scan(std::span<const double> powers, const Scenario& scenario)
{
  if (powers.empty())
    throw DomainError("power_scan: no powers given");
  for (std::size_t i = 0; i < powers.size(); ++i) {
    if (!(powers[i] >= 0.0) || !std::isfinite(powers[i]))
      throw DomainError("power_scan: powers must be non-negative");
    if (i > 0 && !(powers[i] > powers[i - 1]))
      throw DomainError("power_scan: powers must be strictly increasing");
  }

  const Model model = build_model(scenario);
  PowerScan scan;
  scan.geometry = model.geometry;
  scan.powers.assign(powers.begin(), powers.end());
  for (double p : powers) {
    const StandingWave sw = standing_wave_at(scenario, model.photon, p);
    scan.beta_max.push_back(beta_max(make_coupling_params(model.electron, sw)));
  }
  const double top = scan.beta_max.back();
  scan.max_order = resolved_max_order(scenario, top);
  if (scan.max_order < truncation_rule(top))
    throw DomainError("power_scan: max_order below the truncation rule");

  const EnsembleQuadrature quadrature =
      converged_quadrature(model.field, model.distribution, top, scan.max_order,
                           ensemble_options(scenario));
  const PatternBasis basis(model.geometry,
                           make_position_grid(model.geometry, scan.max_order,
                                              scenario.numerics.grid_step_m.value_or(0.0)),
                           scan.max_order);
  scan.positions = basis.grid();
  for (double b : scan.beta_max)
    scan.intensity.push_back(basis.synthesize(quadrature.populations(b, scan.max_order).populations).intensity);
  return scan;
}

} // namespace kdsim
