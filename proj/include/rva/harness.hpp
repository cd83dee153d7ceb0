#ifndef RVA_HARNESS_HPP_
#define RVA_HARNESS_HPP_

#include <string>

#include "rva/config.hpp"
#include "rva/gradcheck.hpp"

namespace rva {

struct ModelGradcheck {
  GradCheckReport report;
  double seconds = 0.0;
  // Filled only when the model-level check fails: the op whose per-op check
  // has the largest error.
  std::string failing_op;
  double failing_op_error = 0.0;
};

// Central differences through the full relaxed-path loss of one generated
// episode. Needs 64-bit precision; Gumbel noise is replayed identically for
// every evaluation and dropout is off.
ModelGradcheck model_gradcheck(const RunConfig& config, double tolerance = 1e-4, double eps = 1e-6);

// Dimensions used for the gradient check: d_h 8, d_emb 6, K 3, T 3.
RunConfig toy_gradcheck_config();

}  // namespace rva

#endif  // RVA_HARNESS_HPP_
