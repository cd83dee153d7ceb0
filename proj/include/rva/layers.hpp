#ifndef RVA_LAYERS_HPP_
#define RVA_LAYERS_HPP_

#include <cmath>
#include <string>

#include "rva/graph.hpp"
#include "rva/ops.hpp"
#include "rva/parameters.hpp"

namespace rva {

// Per-forward switches shared by every layer.
struct ForwardContext {
  bool train = false;
  double dropout = 0.0;
  Rng* dropout_rng = nullptr;
};

template <typename T>
Var<T> maybe_dropout(Var<T> x, const ForwardContext& ctx) {
  if (!ctx.train || ctx.dropout == 0.0) return x;
  return dropout(x, ctx.dropout, *ctx.dropout_rng, true);
}

// y = x W + b with W stored [in, out]; x is [in] or [n, in].
template <typename T>
struct Linear {
  Parameter<T>* weight = nullptr;
  Parameter<T>* bias = nullptr;

  static Linear make(ParameterSet<T>& params, const std::string& name, const std::string& group,
                     std::size_t in, std::size_t out, bool with_bias, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Linear l;
    l.weight = &params.add_uniform(name + ".w", group, {in, out}, bound, rng);
    if (with_bias) l.bias = &params.add_uniform(name + ".b", group, {out}, bound, rng);
    return l;
  }

  Var<T> operator()(Var<T> x) const {
    Graph<T>& g = *x.graph;
    Var<T> y = matmul(x, g.parameter(*weight));
    if (!bias) return y;
    Var<T> b = g.parameter(*bias);
    return y.shape().size() == 1 ? add(y, b) : add(y, expand_rows(b, y.shape()[0]));
  }
};

// Gated non-linearity f(x) = tanh(x W1 + b1) * sigmoid(x W2 + b2).
template <typename T>
struct Gated {
  Linear<T> value;
  Linear<T> gate;

  static Gated make(ParameterSet<T>& params, const std::string& name, const std::string& group,
                    std::size_t in, std::size_t out, Rng& rng) {
    return {Linear<T>::make(params, name + ".1", group, in, out, true, rng),
            Linear<T>::make(params, name + ".2", group, in, out, true, rng)};
  }

  Var<T> operator()(Var<T> x, const ForwardContext& ctx) const {
    x = maybe_dropout(x, ctx);
    return hadamard(tanh(value(x)), sigmoid(gate(x)));
  }
};

}  // namespace rva

#endif  // RVA_LAYERS_HPP_
