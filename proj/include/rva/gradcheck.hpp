#ifndef RVA_GRADCHECK_HPP_
#define RVA_GRADCHECK_HPP_

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "rva/graph.hpp"
#include "rva/parameters.hpp"

namespace rva {

// Builds the loss in a fresh graph; called once for the analytic gradient and
// twice per coordinate for central differences.
using LossBuilder = std::function<Var<double>(Graph<double>&)>;

struct GroupError {
  std::string group;
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<GroupError> groups;  // in parameter registration order

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

// Compares backward() against central differences over every coordinate of
// every parameter. Error per coordinate is |analytic - numeric| / max(1, |analytic|).
// Throws NumericError when the loss is non-finite at a perturbed point.
GradCheckReport finite_diff_check(const LossBuilder& loss, ParameterSet<double>& params,
                                  double eps);

struct OpCheck {
  std::string op;
  double max_rel_error = 0.0;
};

// Per-op backward checks on small random inputs (64-bit). Used to localize a
// failing backward rule when a model-level check fails.
std::vector<OpCheck> check_all_ops(std::uint64_t seed, double eps = 1e-5);

}  // namespace rva

#endif  // RVA_GRADCHECK_HPP_
