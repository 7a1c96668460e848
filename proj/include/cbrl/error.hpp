#pragma once

#include <stdexcept>
#include <string>

namespace cbrl {

/// Invalid input data or parameters. The CLI maps this to exit code 2.
class InputError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure inside a solver. The CLI maps this to exit code 3.
class SolverError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace cbrl
