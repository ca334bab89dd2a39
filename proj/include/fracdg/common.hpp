#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace fracdg {

using Vec2 = Eigen::Vector2d;

/// Base class for everything thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid user input: bad parameters, malformed files, out-of-range orders.
struct ConfigError : Error {
  using Error::Error;
};

/// A numerical operation failed (singular matrix, residual out of bounds).
struct NumericalError : Error {
  using Error::Error;
};

}  // namespace fracdg
