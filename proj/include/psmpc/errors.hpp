#pragma once

#include <stdexcept>
#include <string>

namespace psmpc {

/// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Model data violates an invariant (dimensions, stochasticity, sign, range).
/// The message names the first violated invariant and, where applicable, the
/// matrix, row and defect magnitude.
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// A model or artifact file could not be parsed; the message carries the
/// offending field or location.
class ParseError : public Error {
  public:
    using Error::Error;
};

/// An observation had (numerically) zero probability under the current belief
/// and action: the supplied trajectory is inconsistent with the model.
class ZeroLikelihoodError : public Error {
  public:
    using Error::Error;
};

/// Exact cross-sum enumeration would exceed the configured cap; the online
/// solver should be used instead.
class CombinatorialBlowupError : public Error {
  public:
    using Error::Error;
};

/// No admissible action exists under the configured belief constraints.
class InfeasibleError : public Error {
  public:
    using Error::Error;
};

/// advance() was called without a preceding decide() in the same step.
class MissingActionError : public Error {
  public:
    using Error::Error;
};

} // namespace psmpc
