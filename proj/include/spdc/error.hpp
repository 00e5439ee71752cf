#pragma once

#include <stdexcept>
#include <string>

namespace spdc {

/// Invalid user-provided parameters or malformed input files.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation cannot be carried out at the requested accuracy (e.g. the
/// Fock truncation needed for a tail tolerance exceeds the hard cap).
class NumericInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No exactly-one-click-per-side events: normalized subspace quantities
/// are undefined.
class EmptySubspace : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A criterion's formula has a vanishing denominator for this input.
class CriterionInapplicable : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Dataset does not constrain all fit parameters.
class Unidentifiable : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace spdc
