#pragma once

#include <stdexcept>
#include <string>

namespace defectfe {

// Bad parameters or configuration: the caller asked for something the model
// does not define.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

// A well-posed computation that failed to converge or left its certified range.
class NumericalFailure : public std::runtime_error {
 public:
  explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace defectfe
