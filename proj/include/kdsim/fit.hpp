#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kdsim/detector.hpp"
#include "kdsim/ensemble.hpp"
#include "kdsim/errors.hpp"
#include "kdsim/scenario.hpp"

namespace kdsim {

// ---------------------------------------------------------------------------
// Generic bounded least squares
// ---------------------------------------------------------------------------

struct LeastSquaresOptions
{
  int max_iterations = 100;
  double step_tol = 1e-6;      // relative parameter step
  double residual_tol = 1e-12; // relative decrease of the sum of squares
};

struct LeastSquaresResult
{
  std::vector<double> params;
  std::vector<double> residuals;
  double cost = 0.0;         // sum of squared residuals
  double initial_cost = 0.0;
  bool converged = false;
  int iterations = 0;
  Eigen::MatrixXd jtj;       // Gauss-Newton Hessian at the solution
};

using ResidualFunction = std::function<std::vector<double>(std::span<const double>)>;

namespace detail {

inline double sum_of_squares(const std::vector<double>& r)
{
  double s = 0.0;
  for (double v : r)
    s += v * v;
  return s;
}

inline Eigen::MatrixXd forward_jacobian(const ResidualFunction& f, const std::vector<double>& p,
                                        const std::vector<double>& r0,
                                        std::span<const double> lower, std::span<const double> upper)
{
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(r0.size()), static_cast<Eigen::Index>(p.size()));
  std::vector<double> q = p;
  for (std::size_t k = 0; k < p.size(); ++k) {
    double h = 1e-7 * std::max(std::abs(p[k]), 1e-3 * (upper[k] - lower[k]));
    if (p[k] + h > upper[k])
      h = -h;
    q[k] = p[k] + h;
    const auto r1 = f(q);
    for (std::size_t i = 0; i < r0.size(); ++i)
      jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (r1[i] - r0[i]) / h;
    q[k] = p[k];
  }
  return jac;
}

} // namespace detail

/// Levenberg-Marquardt with forward-difference Jacobian. Trial points are
/// projected onto the box; a step is accepted only if it lowers the sum of
/// squares, so the objective never increases across accepted iterations.
inline LeastSquaresResult levenberg_marquardt(const ResidualFunction& f, std::vector<double> start,
                                              std::span<const double> lower,
                                              std::span<const double> upper,
                                              const LeastSquaresOptions& opts = {})
{
  const std::size_t k = start.size();
  if (k == 0 || lower.size() != k || upper.size() != k)
    throw DomainError("levenberg_marquardt: parameter and bound sizes differ");
  for (std::size_t i = 0; i < k; ++i) {
    if (!(lower[i] < upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
      throw DomainError("levenberg_marquardt: bounds must be finite and ordered");
    start[i] = std::clamp(start[i], lower[i], upper[i]);
  }

  LeastSquaresResult res;
  res.params = std::move(start);
  res.residuals = f(res.params);
  res.cost = detail::sum_of_squares(res.residuals);
  res.initial_cost = res.cost;

  // Steps are solved in coordinates scaled by the bound widths, so that
  // parameters of very different magnitude are damped alike.
  Eigen::VectorXd width(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i)
    width(static_cast<Eigen::Index>(i)) = upper[i] - lower[i];

  Eigen::MatrixXd jac = detail::forward_jacobian(f, res.params, res.residuals, lower, upper) * width.asDiagonal();
  double lambda = -1.0;
  for (res.iterations = 0; res.iterations < opts.max_iterations;) {
    const Eigen::Map<const Eigen::VectorXd> r(res.residuals.data(),
                                               static_cast<Eigen::Index>(res.residuals.size()));
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    Eigen::VectorXd diag = jtj.diagonal();
    const double dmax = std::max(diag.maxCoeff(), std::numeric_limits<double>::min());
    for (Eigen::Index i = 0; i < diag.size(); ++i)
      diag(i) = std::max(diag(i), 1e-12 * dmax);
    if (lambda < 0.0)
      lambda = 1e-3;

    bool accepted = false;
    while (!accepted && lambda < 1e16) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * diag;
      const Eigen::VectorXd step = width.cwiseProduct(a.ldlt().solve(-grad));
      std::vector<double> trial(k);
      double rel_step = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        trial[i] = std::clamp(res.params[i] + step(static_cast<Eigen::Index>(i)), lower[i], upper[i]);
        const double scale = std::max(std::abs(res.params[i]), 1e-6 * (upper[i] - lower[i]));
        rel_step = std::max(rel_step, std::abs(trial[i] - res.params[i]) / scale);
      }
      if (rel_step == 0.0) {
        // Pinned against a bound with nothing left to move.
        res.converged = true;
        break;
      }
      auto trial_res = f(trial);
      const double trial_cost = detail::sum_of_squares(trial_res);
      if (trial_cost < res.cost) {
        const double decrease = res.cost - trial_cost;
        const bool small_decrease = decrease <= opts.residual_tol * res.cost;
        res.params = std::move(trial);
        res.residuals = std::move(trial_res);
        res.cost = trial_cost;
        ++res.iterations;
        accepted = true;
        lambda = std::max(lambda / 10.0, 1e-12);
        if (rel_step < opts.step_tol || small_decrease || res.cost == 0.0)
          res.converged = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted && !res.converged) {
      // No descent direction at any damping: a stationary point.
      res.converged = true;
    }
    if (res.converged)
      break;
    jac = detail::forward_jacobian(f, res.params, res.residuals, lower, upper) * width.asDiagonal();
  }
  jac = detail::forward_jacobian(f, res.params, res.residuals, lower, upper);
  res.jtj = jac.transpose() * jac;
  return res;
}

// ---------------------------------------------------------------------------
// Pattern fits
// ---------------------------------------------------------------------------

enum class FitParameter
{
  BetaMax,
  CalibrationSlope,  // beta_max = slope * laser.avg_power_w
  ElectronPulseFwhm,
  ElectronSigma,     // both transverse sigmas, kept equal
  SpotFwhm,
};

inline const char* parameter_name(FitParameter p)
{
  switch (p) {
  case FitParameter::BetaMax: return "beta_max";
  case FitParameter::CalibrationSlope: return "calibration_slope";
  case FitParameter::ElectronPulseFwhm: return "electron_pulse_fwhm";
  case FitParameter::ElectronSigma: return "electron_sigma";
  case FitParameter::SpotFwhm: return "spot_fwhm";
  }
  return "unknown";
}

inline const char* parameter_unit(FitParameter p)
{
  switch (p) {
  case FitParameter::BetaMax: return "1";
  case FitParameter::CalibrationSlope: return "1/W";
  case FitParameter::ElectronPulseFwhm: return "s";
  case FitParameter::ElectronSigma: return "m";
  case FitParameter::SpotFwhm: return "m";
  }
  return "";
}

struct FreeParameter
{
  FitParameter which = FitParameter::BetaMax;
  double lower = 0.0;
  double upper = 0.0;
};

struct ParameterEstimate
{
  std::string name;
  std::string unit;
  double value = 0.0;
  double stderr_estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool at_lower = false;
  bool at_upper = false;
};

struct FitResult
{
  std::vector<ParameterEstimate> parameters;
  double residual_norm = 0.0;
  double initial_residual_norm = 0.0;
  bool converged = false;
  int iterations = 0;
  int starts = 0;
  std::size_t samples = 0;
  std::vector<double> residuals;

  const ParameterEstimate& operator[](const std::string& name) const
  {
    for (const auto& p : parameters)
      if (p.name == name)
        return p;
    throw DomainError("FitResult: no parameter named " + name);
  }
};

struct FitOptions
{
  LeastSquaresOptions least_squares;
  int starts = 3;
};

/// Linear interpolation of (xs, ys) at `x`; xs increasing and x inside.
inline double interpolate_linear(std::span<const double> xs, std::span<const double> ys, double x)
{
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  if (it == xs.begin())
    return ys.front();
  if (it == xs.end())
    return ys.back();
  const auto i = static_cast<std::size_t>(it - xs.begin());
  const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
  return ys[i - 1] + t * (ys[i] - ys[i - 1]);
}

/// Forward model of a focal-plane pattern with some scenario quantities
/// exposed as free parameters. When only the coupling scale is free, the
/// ensemble node set is built once and reused.
class PatternModel
{
public:
  PatternModel(Scenario scenario, std::vector<FreeParameter> free)
      : mScenario(std::move(scenario)), mFree(std::move(free)), mModel(build_model(mScenario))
  {
    if (mFree.empty())
      throw DomainError("fit: at least one free parameter is required");
    bool has_scale = false;
    for (const auto& f : mFree) {
      if (!(f.lower < f.upper) || !std::isfinite(f.lower) || !std::isfinite(f.upper))
        throw DomainError(std::string("fit: bounds of ") + parameter_name(f.which) + " must be finite and ordered");
      if (f.which == FitParameter::BetaMax || f.which == FitParameter::CalibrationSlope) {
        if (has_scale)
          throw DomainError("fit: beta_max and calibration_slope are mutually exclusive");
        has_scale = true;
        if (f.lower < 0.0)
          throw DomainError("fit: coupling bounds must be non-negative");
      } else {
        mShapeFree = true;
        if (!(f.lower > 0.0))
          throw DomainError(std::string("fit: lower bound of ") + parameter_name(f.which) + " must be positive");
      }
      if (f.which == FitParameter::CalibrationSlope && !mScenario.laser.avg_power_w)
        throw DomainError("fit: calibration_slope requires laser.avg_power_w");
    }
    mFixedBeta = mModel.beta_max;

    const double top = max_beta();
    mMaxOrder = resolved_max_order(mScenario, top);
    if (mMaxOrder < truncation_rule(top))
      throw DomainError("fit: max_order below the truncation rule for the upper bound");
    mBasis.emplace(mModel.geometry,
                   make_position_grid(mModel.geometry, mMaxOrder, mScenario.numerics.grid_step_m.value_or(0.0)),
                   mMaxOrder);
    if (!mShapeFree)
      mQuadrature = converged_quadrature(mModel.field, mModel.distribution, top, mMaxOrder,
                                         ensemble_options(mScenario));
  }

  const std::vector<FreeParameter>& free_parameters() const { return mFree; }
  const std::vector<double>& grid() const { return mBasis->grid(); }
  int max_order() const { return mMaxOrder; }
  const DiffractionGeometry& geometry() const { return mModel.geometry; }

  ScatteringPattern operator()(std::span<const double> params) const
  {
    double beta = mFixedBeta;
    Scenario s = mScenario;
    for (std::size_t i = 0; i < mFree.size(); ++i) {
      switch (mFree[i].which) {
      case FitParameter::BetaMax: beta = params[i]; break;
      case FitParameter::CalibrationSlope: beta = params[i] * *mScenario.laser.avg_power_w; break;
      case FitParameter::ElectronPulseFwhm: s.electron.pulse_fwhm_s = params[i]; break;
      case FitParameter::ElectronSigma:
        s.electron.beam_sigma_x_m = params[i];
        s.electron.beam_sigma_y_m = params[i];
        break;
      case FitParameter::SpotFwhm: s.geometry.spot_fwhm_m = params[i]; break;
      }
    }
    if (!mShapeFree)
      return mBasis->synthesize(mQuadrature->populations(beta, mMaxOrder).populations);

    const ElectronDistribution dist{s.electron.beam_sigma_x_m, s.electron.beam_sigma_y_m,
                                    s.electron.pulse_fwhm_s, s.electron.arrival_offset_s};
    const EnsembleQuadrature q =
        converged_quadrature(mModel.field, dist, max_beta(), mMaxOrder, ensemble_options(s));
    const auto pops = q.populations(beta, mMaxOrder).populations;
    if (s.geometry.spot_fwhm_m == mModel.geometry.spot_fwhm)
      return mBasis->synthesize(pops);
    DiffractionGeometry g = mModel.geometry;
    g.spot_fwhm = s.geometry.spot_fwhm_m;
    return PatternBasis(g, mBasis->grid(), mMaxOrder).synthesize(pops);
  }

private:
  double max_beta() const
  {
    double top = mFixedBeta;
    for (const auto& f : mFree) {
      if (f.which == FitParameter::BetaMax)
        top = f.upper;
      else if (f.which == FitParameter::CalibrationSlope)
        top = f.upper * *mScenario.laser.avg_power_w;
    }
    return top;
  }

  Scenario mScenario;
  std::vector<FreeParameter> mFree;
  Model mModel;
  double mFixedBeta = 0.0;
  bool mShapeFree = false;
  int mMaxOrder = 0;
  std::optional<PatternBasis> mBasis;
  std::optional<EnsembleQuadrature> mQuadrature;
};

/// Least-squares fit of a measured pattern. Observed intensities are linearly
/// interpolated onto the model grid, restricted to the overlap of supports.
/// Starts are spread evenly over the bounds and the lowest residual wins.
inline FitResult fit_pattern(const ScatteringPattern& observed, const Scenario& scenario,
                             std::vector<FreeParameter> free, const FitOptions& opts = {})
{
  if (observed.positions.size() < 2 || observed.positions.size() != observed.intensity.size())
    throw DomainError("fit: observed pattern needs matching positions and intensities");
  const PatternModel model(scenario, std::move(free));

  const auto& grid = model.grid();
  const double lo = observed.positions.front(), hi = observed.positions.back();
  std::vector<std::size_t> used;
  std::vector<double> target;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < lo || grid[i] > hi)
      continue;
    used.push_back(i);
    target.push_back(interpolate_linear(observed.positions, observed.intensity, grid[i]));
  }
  const std::size_t k = model.free_parameters().size();
  if (used.size() <= k)
    throw DomainError("fit: observed pattern does not overlap the model grid");

  const ResidualFunction residuals = [&](std::span<const double> p) {
    const ScatteringPattern m = model(p);
    std::vector<double> r(used.size());
    for (std::size_t i = 0; i < used.size(); ++i)
      r[i] = m.intensity[used[i]] - target[i];
    return r;
  };

  std::vector<double> lower, upper;
  for (const auto& f : model.free_parameters()) {
    lower.push_back(f.lower);
    upper.push_back(f.upper);
  }

  const int starts = std::max(1, opts.starts);
  std::optional<LeastSquaresResult> best;
  for (int s = 0; s < starts; ++s) {
    std::vector<double> start(k);
    for (std::size_t i = 0; i < k; ++i)
      start[i] = lower[i] + (upper[i] - lower[i]) * (2.0 * s + 1.0) / (2.0 * starts);
    LeastSquaresResult r = levenberg_marquardt(residuals, start, lower, upper, opts.least_squares);
    if (!best || r.cost < best->cost)
      best = std::move(r);
  }

  FitResult out;
  out.residual_norm = std::sqrt(best->cost);
  out.initial_residual_norm = std::sqrt(best->initial_cost);
  out.converged = best->converged;
  out.iterations = best->iterations;
  out.starts = starts;
  out.samples = used.size();
  out.residuals = best->residuals;

  const double dof = static_cast<double>(used.size() - k);
  const double s2 = best->cost / dof;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k),
                                                  std::numeric_limits<double>::quiet_NaN());
  // Inverted in bound-scaled coordinates for conditioning.
  Eigen::VectorXd width(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i)
    width(static_cast<Eigen::Index>(i)) = upper[i] - lower[i];
  const Eigen::MatrixXd scaled = width.asDiagonal() * best->jtj * width.asDiagonal();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(scaled);
  if (lu.isInvertible())
    cov = s2 * width.asDiagonal() * lu.inverse() * width.asDiagonal();
  for (std::size_t i = 0; i < k; ++i) {
    const auto& f = model.free_parameters()[i];
    ParameterEstimate e;
    e.name = parameter_name(f.which);
    e.unit = parameter_unit(f.which);
    e.value = best->params[i];
    const double var = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    e.stderr_estimate = var >= 0.0 ? std::sqrt(var) : std::numeric_limits<double>::quiet_NaN();
    e.lower = f.lower;
    e.upper = f.upper;
    const double tol = 1e-9 * (f.upper - f.lower);
    e.at_lower = e.value <= f.lower + tol;
    e.at_upper = e.value >= f.upper - tol;
    out.parameters.push_back(e);
  }
  return out;
}

inline FitResult fit_beta_max(const ScatteringPattern& observed, const Scenario& scenario,
                              double lower, double upper, const FitOptions& opts = {})
{
  return fit_pattern(observed, scenario, {{FitParameter::BetaMax, lower, upper}}, opts);
}

// ---------------------------------------------------------------------------
// Power calibration
// ---------------------------------------------------------------------------

struct PowerCalibration
{
  double slope = 0.0; // beta_max per watt
  double rms_residual = 0.0;
  double max_abs_residual = 0.0;
  std::vector<double> residuals;
};

/// Least-squares slope of beta_max = slope * power through the origin.
inline PowerCalibration calibrate_power(std::span<const double> powers, std::span<const double> betas)
{
  if (powers.size() != betas.size())
    throw DomainError("calibrate_power: powers and betas differ in length");
  if (powers.size() < 2)
    throw DomainError("calibrate_power: at least two points are required");
  for (std::size_t i = 0; i < powers.size(); ++i) {
    if (!std::isfinite(powers[i]) || !std::isfinite(betas[i]))
      throw DomainError("calibrate_power: non-finite input");
    for (std::size_t j = 0; j < i; ++j)
      if (powers[i] == powers[j])
        throw DomainError("calibrate_power: powers must be distinct");
  }
  double pp = 0.0, pb = 0.0;
  for (std::size_t i = 0; i < powers.size(); ++i) {
    pp += powers[i] * powers[i];
    pb += powers[i] * betas[i];
  }
  if (!(pp > 0.0))
    throw DomainError("calibrate_power: degenerate design (all powers zero)");

  PowerCalibration c;
  c.slope = pb / pp;
  double ss = 0.0;
  for (std::size_t i = 0; i < powers.size(); ++i) {
    const double r = betas[i] - c.slope * powers[i];
    c.residuals.push_back(r);
    ss += r * r;
    c.max_abs_residual = std::max(c.max_abs_residual, std::abs(r));
  }
  c.rms_residual = std::sqrt(ss / static_cast<double>(powers.size()));
  return c;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// Copy of `pattern` with independent N(0, sigma^2) noise added to every
/// sample. Deterministic for a given seed.
inline ScatteringPattern add_gaussian_noise(ScatteringPattern pattern, double sigma, std::uint64_t seed)
{
  if (!(sigma >= 0.0))
    throw DomainError("add_gaussian_noise: sigma must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (double& v : pattern.intensity)
    v += sigma * noise(rng);
  return pattern;
}

} // namespace kdsim
