// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace bootdiag {

// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside a mathematical function's domain (e.g. quantile at 0 or 1).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Invalid scenario, diagnostic, plan, or command-line configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Exact-zero denominator in a fit or a bootstrap re-estimate.  Callers count
// these; they are never silently resampled.
class DegenerateFitError : public Error {
 public:
  using Error::Error;
};

// A draw maps to a cdf value of exactly 0 or 1, so a log-weighted statistic
// is undefined.  Raised instead of clamping.
class DegenerateTailError : public Error {
 public:
  using Error::Error;
};

// Weighting matrix for the moment discrepancy is not positive-definite.
class SingularOmegaError : public Error {
 public:
  using Error::Error;
};

// A measure needs a simulated reference table that the library does not hold.
class MissingTableError : public Error {
 public:
  using Error::Error;
};

// File read/write failure, reported with path context.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace bootdiag
