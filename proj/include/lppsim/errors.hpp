#pragma once

#include <stdexcept>
#include <string>

namespace lpp {

/// Invalid model or experiment parameters.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A site or time falls outside the sampled window / horizon.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A strip-restricted optimum could not be certified as the unrestricted one;
/// should retry with a wider window.
class WindowTooSmall : public RangeError {
 public:
  using RangeError::RangeError;
};

/// A computation would exceed a configured resource limit.
class GuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal structural invariant was violated.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw ParameterError(what);
}
}  // namespace detail

}  // namespace lpp
