#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kdsim/errors.hpp"

namespace kdsim::quad {

struct AdaptiveResult
{
  double value = 0.0;
  double error = 0.0; // summed Kronrod error estimate
  double l1 = 0.0;
};

namespace detail {

template <class F>
void refine_panel(F& f, double lo, double hi, double rel_tol, double abs_tol_density,
                  unsigned depth, AdaptiveResult& out)
{
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  double err = 0.0, l1 = 0.0;
  const double value = GK::integrate(f, lo, hi, 0, rel_tol, &err, &l1);
  if (depth == 0 || err <= rel_tol * l1 || err <= abs_tol_density * (hi - lo)) {
    out.value += value;
    out.error += err;
    out.l1 += l1;
    return;
  }
  const double mid = 0.5 * (lo + hi);
  refine_panel(f, lo, mid, rel_tol, abs_tol_density, depth - 1, out);
  refine_panel(f, mid, hi, rel_tol, abs_tol_density, depth - 1, out);
}

} // namespace detail

/// Integrates `f` over [a, b] split into `panels` equal sub-intervals, each
/// bisected until its 15-point Gauss-Kronrod error estimate is below
/// `rel_tol` of its L1 norm or its share of `abs_tol`. The panels guarantee
/// that features narrower than the whole interval are sampled by the first
/// pass. Throws NumericalError when the summed error estimate exceeds both
/// `rel_tol * L1` and `abs_tol`.
template <class F>
AdaptiveResult integrate_adaptive(F&& f, double a, double b, int panels, double rel_tol,
                                  double abs_tol = 0.0, unsigned max_depth = 15)
{
  AdaptiveResult out;
  const double h = (b - a) / panels;
  const double density = abs_tol / (b - a);
  for (int i = 0; i < panels; ++i) {
    const double lo = a + i * h;
    const double hi = (i + 1 == panels) ? b : lo + h;
    detail::refine_panel(f, lo, hi, rel_tol, density, max_depth, out);
  }
  if (!(out.error <= rel_tol * out.l1) && !(out.error <= abs_tol) && out.error > 0.0) {
    std::ostringstream diag;
    diag << "interval=[" << a << ", " << b << "] panels=" << panels << " max_depth=" << max_depth
         << " value=" << out.value << " error=" << out.error << " l1=" << out.l1
         << " rel_tol=" << rel_tol << " abs_tol=" << abs_tol;
    throw NumericalError("adaptive quadrature did not converge", diag.str());
  }
  return out;
}

/// Nodes and weights of a composite rule on a finite interval.
struct Rule
{
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline constexpr int nodes_per_panel = 16;

/// Composite 16-point Gauss-Legendre rule on [a, b] with `panels` panels.
inline Rule composite_gauss_legendre(double a, double b, int panels)
{
  using GL = boost::math::quadrature::gauss<double, nodes_per_panel>;
  const auto& abscissa = GL::abscissa();
  const auto& weight = GL::weights();

  Rule rule;
  rule.nodes.reserve(static_cast<std::size_t>(panels) * nodes_per_panel);
  rule.weights.reserve(rule.nodes.capacity());
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    const double half = 0.5 * h;
    // abscissa() holds the non-negative half of the symmetric node set.
    for (std::size_t i = abscissa.size(); i-- > 0;) {
      rule.nodes.push_back(mid - half * abscissa[i]);
      rule.weights.push_back(half * weight[i]);
    }
    for (std::size_t i = 0; i < abscissa.size(); ++i) {
      rule.nodes.push_back(mid + half * abscissa[i]);
      rule.weights.push_back(half * weight[i]);
    }
  }
  return rule;
}

/// Rule integrating against a normal density N(mean, sigma^2), truncated to
/// mean +- `span` sigma. Weights include the density and are renormalized
/// to sum to one, so constants integrate exactly.
///
/// When `feature` is finite, [-feature, feature] marks where the integrand
/// varies fastest: the truncated support is split there, the inner piece gets
/// `panels` panels. Outer pieces carry only the smooth density and get a
/// fixed one panel per two sigma.
inline Rule gaussian_density_rule(double mean, double sigma, int panels, double span = 8.0,
                                  double feature = std::numeric_limits<double>::infinity())
{
  const double lo = mean - span * sigma, hi = mean + span * sigma;
  std::vector<double> cuts{lo};
  if (-feature > lo && -feature < hi)
    cuts.push_back(-feature);
  if (feature > lo && feature < hi)
    cuts.push_back(feature);
  cuts.push_back(hi);

  Rule rule;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double mid = 0.5 * (cuts[k] + cuts[k + 1]);
    const bool inner = cuts.size() == 2 || std::abs(mid) < feature;
    const int count = inner ? panels : static_cast<int>(std::ceil((cuts[k + 1] - cuts[k]) / (2.0 * sigma)));
    const Rule piece = composite_gauss_legendre(cuts[k], cuts[k + 1], count);
    rule.nodes.insert(rule.nodes.end(), piece.nodes.begin(), piece.nodes.end());
    rule.weights.insert(rule.weights.end(), piece.weights.begin(), piece.weights.end());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double u = (rule.nodes[i] - mean) / sigma;
    rule.weights[i] *= std::exp(-0.5 * u * u);
    total += rule.weights[i];
  }
  for (double& w : rule.weights)
    w /= total;
  return rule;
}

} // namespace kdsim::quad
