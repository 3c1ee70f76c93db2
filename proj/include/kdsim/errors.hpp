#pragma once

#include <stdexcept>
#include <string>

namespace kdsim {

/// Thrown when an argument lies outside the domain of an operation
/// (non-positive energy, zero distance, undersized grid, ...).
class DomainError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

/// Thrown when a numerical procedure fails to reach its tolerance.
/// `diagnostics()` carries the state at the point of failure.
class NumericalError : public std::runtime_error
{
public:
  NumericalError(const std::string& what, std::string diagnostics)
      : std::runtime_error(what), mDiagnostics(std::move(diagnostics))
  {
  }

  const std::string& diagnostics() const noexcept { return mDiagnostics; }

private:
  std::string mDiagnostics;
};

/// Invalid scenario configuration. `field()` is the dotted key path,
/// e.g. "laser.waist_m".
class ConfigError : public std::runtime_error
{
public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(what), mField(std::move(field))
  {
  }

  const std::string& field() const noexcept { return mField; }

private:
  std::string mField;
};

} // namespace kdsim
