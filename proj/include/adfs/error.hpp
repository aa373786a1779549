#ifndef ADFS_ERROR_HPP
#define ADFS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace adfs {

/// Invalid input: bad arguments, malformed files, inconsistent configs.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not deliver its post-condition.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Proximal step outside its validity domain (step * L^{-1} >= 1).
class StepTooLarge : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

namespace detail {
inline void require(bool cond, const std::string &msg) {
  if (!cond) throw ValidationError(msg);
}
}  // namespace detail

}  // namespace adfs

#endif
