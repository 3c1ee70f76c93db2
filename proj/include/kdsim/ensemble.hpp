#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "kdsim/constants.hpp"
#include "kdsim/errors.hpp"
#include "kdsim/quadrature.hpp"
#include "kdsim/sidebands.hpp"

namespace kdsim {

/// Separable Gaussian density of the electron pulse over transverse position
/// (x, y) and arrival delay tau relative to the optical pulses.
struct ElectronDistribution
{
  double sigma_x = 0.0;        // m
  double sigma_y = 0.0;        // m
  double temporal_fwhm = 0.0;  // s
  double arrival_offset = 0.0; // s

  double sigma_tau() const { return temporal_fwhm / constants::fwhm_per_sigma; }

  void validate() const
  {
    if (!(sigma_x > 0.0) || !(sigma_y > 0.0) || !(temporal_fwhm > 0.0))
      throw DomainError("ElectronDistribution: widths must be positive");
    if (!std::isfinite(arrival_offset))
      throw DomainError("ElectronDistribution: arrival offset must be finite");
  }
};

/// Anything that maps (x, y, tau) to a coupling constant and knows its peak.
template <class F>
concept CouplingFieldLike = requires(const F& f, double v) {
  { f.beta_max() } -> std::convertible_to<double>;
  { f(v, v, v) } -> std::convertible_to<double>;
};

/// Gauss-Legendre panel counts per axis.
struct AxisPanels
{
  int x = 2;
  int y = 2;
  int tau = 2;
};

/// True when `Field` declares that beta does not depend on x.
template <class Field>
constexpr bool collapses_x()
{
  if constexpr (requires { Field::x_independent(); })
    return Field::x_independent();
  else
    return false;
}

struct EnsembleOptions
{
  double tolerance = 1e-9; // on the summed per-axis max-norm changes of <P_n>
  int initial_panels = 2;  // per axis, 16 Gauss-Legendre nodes each
  int max_panels = 256;
};

struct EnsembleSpectrum
{
  int max_order = 0;
  std::vector<double> populations; // index n + max_order
  double beta_max = 0.0;
  int nodes_x = 0;
  int nodes_y = 0;
  int nodes_tau = 0;
  double convergence_change = 0.0; // summed per-axis refinement changes, max-norm

  double population(int n) const
  {
    if (n < -max_order || n > max_order)
      return 0.0;
    return populations[static_cast<std::size_t>(n + max_order)];
  }

  double total() const { return std::accumulate(populations.begin(), populations.end(), 0.0); }
};

/// Highest order, capped at `max_order`, past which J_n(x)^2 < 1e-40. Uses
/// J_n(x) <= (x/2)^n / n!.
inline int significant_orders(double x, int max_order)
{
  double bound = 1.0;
  int n = 0;
  while (n < max_order && (n < x || bound > 1e-20)) {
    ++n;
    bound *= 0.5 * x / n;
  }
  return n;
}

/// Quadrature nodes over the electron density together with the coupling
/// shape beta/beta_max at each node. Because populations depend on beta_max
/// only through a common scale factor, one node set serves a whole sweep.
class EnsembleQuadrature
{
public:
  template <CouplingFieldLike Field>
  static EnsembleQuadrature build(const Field& field, const ElectronDistribution& dist, int panels)
  {
    return build(field, dist, AxisPanels{panels, panels, panels});
  }

  template <CouplingFieldLike Field>
  static EnsembleQuadrature build(const Field& field, const ElectronDistribution& dist, AxisPanels panels)
  {
    dist.validate();
    EnsembleQuadrature q;
    q.mBetaMax = field.beta_max();

    // beta does not depend on x for fields that declare so; a single node
    // with unit weight is then exact.
    const quad::Rule rx = collapses_x<Field>() ? quad::Rule{{0.0}, {1.0}}
                                               : quad::gaussian_density_rule(0.0, dist.sigma_x, panels.x);
    // Fields that know where beta is non-negligible get breakpoints there.
    std::array<double, 2> feature{std::numeric_limits<double>::infinity(),
                                  std::numeric_limits<double>::infinity()};
    if constexpr (requires { field.feature_widths(); })
      feature = field.feature_widths();
    const quad::Rule ry = quad::gaussian_density_rule(0.0, dist.sigma_y, panels.y, 8.0, feature[0]);
    const quad::Rule rt =
        quad::gaussian_density_rule(dist.arrival_offset, dist.sigma_tau(), panels.tau, 8.0, feature[1]);
    q.mNodesX = static_cast<int>(rx.nodes.size());
    q.mNodesY = static_cast<int>(ry.nodes.size());
    q.mNodesTau = static_cast<int>(rt.nodes.size());

    const double scale = q.mBetaMax > 0.0 ? 1.0 / q.mBetaMax : 0.0;
    q.mWeights.reserve(rx.nodes.size() * ry.nodes.size() * rt.nodes.size());
    q.mShape.reserve(q.mWeights.capacity());
    for (std::size_t ix = 0; ix < rx.nodes.size(); ++ix) {
      std::vector<double> grid;
      if constexpr (collapses_x<Field>() &&
                    requires { field.beta_grid(std::span<const double>{}, std::span<const double>{}); }) {
        grid = field.beta_grid(ry.nodes, rt.nodes);
      } else {
        grid.resize(ry.nodes.size() * rt.nodes.size());
        for (std::size_t iy = 0; iy < ry.nodes.size(); ++iy)
          for (std::size_t it = 0; it < rt.nodes.size(); ++it)
            grid[iy * rt.nodes.size() + it] = field(rx.nodes[ix], ry.nodes[iy], rt.nodes[it]);
      }
      for (std::size_t iy = 0; iy < ry.nodes.size(); ++iy) {
        for (std::size_t it = 0; it < rt.nodes.size(); ++it) {
          q.mWeights.push_back(rx.weights[ix] * ry.weights[iy] * rt.weights[it]);
          q.mShape.push_back(grid[iy * rt.nodes.size() + it] * scale);
        }
      }
    }
    return q;
  }

  double beta_max() const { return mBetaMax; }
  int nodes_x() const { return mNodesX; }
  int nodes_y() const { return mNodesY; }
  int nodes_tau() const { return mNodesTau; }
  std::span<const double> weights() const { return mWeights; }
  std::span<const double> shape() const { return mShape; }

  /// <P_n> for the field rescaled to `beta_max`, summed in fixed node order.
  EnsembleSpectrum populations(double beta_max, int max_order) const
  {
    if (!(beta_max >= 0.0))
      throw DomainError("EnsembleQuadrature::populations: beta_max must be non-negative");
    EnsembleSpectrum s;
    s.max_order = max_order;
    s.beta_max = beta_max;
    s.nodes_x = mNodesX;
    s.nodes_y = mNodesY;
    s.nodes_tau = mNodesTau;
    std::vector<double> half(static_cast<std::size_t>(max_order) + 1, 0.0);
    std::vector<double> j(half.size());
    for (std::size_t i = 0; i < mWeights.size(); ++i) {
      const double w = mWeights[i];
      if (w == 0.0)
        continue;
      const double x = beta_max * mShape[i];
      const std::size_t used = significant_orders(x, max_order) + 1;
      bessel_j_orders_into(x, std::span<double>(j).first(used));
      for (std::size_t n = 0; n < used; ++n)
        half[n] += w * j[n] * j[n];
    }
    s.populations.resize(2 * half.size() - 1);
    for (int n = 0; n <= max_order; ++n) {
      s.populations[static_cast<std::size_t>(max_order + n)] = half[static_cast<std::size_t>(n)];
      s.populations[static_cast<std::size_t>(max_order - n)] = half[static_cast<std::size_t>(n)];
    }
    return s;
  }

  /// Weighted sums of (beta/beta_max)^k for k = 0, 1, 2.
  std::array<double, 3> shape_moments() const
  {
    std::array<double, 3> m{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < mWeights.size(); ++i) {
      m[0] += mWeights[i];
      m[1] += mWeights[i] * mShape[i];
      m[2] += mWeights[i] * mShape[i] * mShape[i];
    }
    return m;
  }

private:
  double mBetaMax = 0.0;
  int mNodesX = 0, mNodesY = 0, mNodesTau = 0;
  std::vector<double> mWeights;
  std::vector<double> mShape;
};

/// Node set refined axis by axis until the populations at `beta_max` are
/// stable to the tolerance in max-norm. For a tensor-product rule the error
/// is additive across axes to leading order, so each step doubles only the
/// axes whose own refinement still moves the result; the set is accepted when
/// the summed per-axis changes fall below the tolerance. That sum is recorded
/// in `change`.
template <CouplingFieldLike Field>
EnsembleQuadrature converged_quadrature(const Field& field, const ElectronDistribution& dist,
                                        double beta_max, int max_order,
                                        const EnsembleOptions& opts, double* change = nullptr)
{
  auto distance = [](const EnsembleSpectrum& a, const EnsembleSpectrum& b) {
    double d = 0.0;
    for (std::size_t n = 0; n < a.populations.size(); ++n) {
      const double e = std::abs(a.populations[n] - b.populations[n]);
      d = std::isfinite(e) ? std::max(d, e) : std::numeric_limits<double>::infinity();
    }
    return d;
  };
  constexpr bool skip_x = collapses_x<Field>();
  AxisPanels panels{skip_x ? 1 : opts.initial_panels, opts.initial_panels, opts.initial_panels};
  EnsembleQuadrature q = EnsembleQuadrature::build(field, dist, panels);
  EnsembleSpectrum cur = q.populations(beta_max, max_order);
  double total = std::numeric_limits<double>::infinity();
  while (true) {
    AxisPanels px = panels, py = panels, pt = panels;
    px.x *= 2;
    py.y *= 2;
    pt.tau *= 2;
    const double dx = skip_x ? 0.0 : distance(EnsembleQuadrature::build(field, dist, px).populations(beta_max, max_order), cur);
    const double dy = distance(EnsembleQuadrature::build(field, dist, py).populations(beta_max, max_order), cur);
    const double dt = distance(EnsembleQuadrature::build(field, dist, pt).populations(beta_max, max_order), cur);
    total = dx + dy + dt;
    if (total < opts.tolerance) {
      if (change)
        *change = total;
      return q;
    }
    // Every axis whose change exceeds its share of the budget is refined.
    const double share = opts.tolerance / 3.0;
    AxisPanels next = panels;
    if (dx >= share)
      next.x *= 2;
    if (dy >= share)
      next.y *= 2;
    if (dt >= share)
      next.tau *= 2;
    if (std::max({next.x, next.y, next.tau}) > opts.max_panels)
      break;
    panels = next;
    q = EnsembleQuadrature::build(field, dist, panels);
    cur = q.populations(beta_max, max_order);
  }
  std::ostringstream diag;
  diag << "beta_max=" << beta_max << " max_order=" << max_order << " panels_x=" << panels.x
       << " panels_y=" << panels.y << " panels_tau=" << panels.tau << " last_change=" << total
       << " tolerance=" << opts.tolerance << " max_panels=" << opts.max_panels;
  throw NumericalError("ensemble quadrature did not converge", diag.str());
}

/// <P_n> = integral of rho(x, y, tau) J_n(beta(x, y, tau))^2, averaged at the
/// population level (distinct electrons do not interfere).
template <CouplingFieldLike Field>
EnsembleSpectrum ensemble_populations(const Field& field, const ElectronDistribution& dist,
                                      int max_order, const EnsembleOptions& opts = {})
{
  const double bmax = field.beta_max();
  if (max_order < truncation_rule(bmax))
    throw DomainError("ensemble_populations: max_order below the truncation rule for beta_max");
  double change = 0.0;
  const EnsembleQuadrature q = converged_quadrature(field, dist, bmax, max_order, opts, &change);
  EnsembleSpectrum s = q.populations(bmax, max_order);
  s.convergence_change = change;
  return s;
}

/// <beta>^2 / <beta^2> over the electron density: 1 when every electron sees
/// the same coupling, small when the coupling is broadly distributed.
template <CouplingFieldLike Field>
double coherence_metric(const Field& field, const ElectronDistribution& dist,
                        const EnsembleOptions& opts = {})
{
  if (field.beta_max() == 0.0)
    return 1.0;
  double prev = -1.0;
  for (int panels = opts.initial_panels; panels <= opts.max_panels; panels *= 2) {
    const auto [m0, m1, m2] = EnsembleQuadrature::build(field, dist, panels).shape_moments();
    const double metric = m2 > 0.0 ? std::min(1.0, m1 * m1 / (m0 * m2)) : 1.0;
    if (prev >= 0.0 && std::abs(metric - prev) < opts.tolerance)
      return metric;
    prev = metric;
  }
  throw NumericalError("coherence_metric: quadrature did not converge",
                       "last_value=" + std::to_string(prev));
}

} // namespace kdsim
