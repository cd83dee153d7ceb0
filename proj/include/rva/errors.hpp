#ifndef RVA_ERRORS_HPP_
#define RVA_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace rva {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not fit the op. The message names the op and both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced or consumed, or a loss that cannot be evaluated.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Misuse of the differentiation graph (second backward, non-scalar loss, ...).
class GraphError : public Error {
 public:
  using Error::Error;
};

// Bad configuration, malformed input files, infeasible requests.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace rva

#endif  // RVA_ERRORS_HPP_
