#include "rva/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "rva/ops.hpp"
#include "rva/rng.hpp"

namespace rva {

namespace {

double evaluate(const LossBuilder& loss) {
  Graph<double> graph(false);
  const double value = loss(graph).item();
  if (!std::isfinite(value)) throw NumericError("finite_diff_check: non-finite loss");
  return value;
}

}  // namespace

GradCheckReport finite_diff_check(const LossBuilder& loss, ParameterSet<double>& params,
                                  double eps) {
  if (!(eps > 0.0)) throw ValidationError("finite_diff_check: eps must be positive");
  params.zero_grad();
  {
    Graph<double> graph(true);
    Var<double> out = loss(graph);
    if (out.size() != 1) throw GraphError("finite_diff_check: loss must be scalar");
    if (graph.requires_grad(out)) graph.backward(out);
  }

  GradCheckReport report;
  std::map<std::string, std::size_t> slot;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Parameter<double>& param = params[p];
    if (!slot.count(param.group)) {
      slot[param.group] = report.groups.size();
      GroupError fresh;
      fresh.group = param.group;
      report.groups.push_back(fresh);
    }
    GroupError& entry = report.groups[slot[param.group]];
    auto& values = param.value.storage();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double plus = evaluate(loss);
      values[i] = saved - eps;
      const double minus = evaluate(loss);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double analytic = param.grad[i];
      const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
      ++entry.coordinates;
      if (err > entry.max_rel_error || entry.worst_parameter.empty()) {
        entry.max_rel_error = err;
        entry.worst_parameter = param.name;
        entry.worst_index = i;
      }
      report.max_rel_error = std::max(report.max_rel_error, err);
    }
  }
  return report;
}

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

double weighted(const Tensor<double>& out, const Tensor<double>& weights) {
  double acc = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) acc += out[i] * weights[i];
  return acc;
}

// Checks one op in isolation: the analytic side seeds backward() with fixed
// random weights on the op's output, the numeric side differentiates the same
// weighted sum computed outside the graph. No other op is involved.
double check_op(std::vector<Tensor<double>> inputs,
                const std::function<Var<double>(std::vector<Var<double>>&)>& op,
                Rng& rng, double eps) {
  auto forward = [&](Graph<double>& g, std::vector<Var<double>>& vars) {
    vars.clear();
    for (const auto& in : inputs) vars.push_back(g.leaf(in));
    return op(vars);
  };
  std::vector<Tensor<double>> analytic;
  Tensor<double> weights;
  {
    Graph<double> g;
    std::vector<Var<double>> vars;
    Var<double> out = forward(g, vars);
    weights = Tensor<double>(out.shape());
    for (auto& w : weights.values()) w = rng.uniform(-1.0, 1.0);
    g.backward(out, weights);
    for (const auto& v : vars) analytic.push_back(g.grad(v));
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double saved = inputs[k][i];
      auto eval = [&](double x) {
        inputs[k][i] = x;
        Graph<double> g(false);
        std::vector<Var<double>> vars;
        return weighted(forward(g, vars).value(), weights);
      };
      const double numeric = (eval(saved + eps) - eval(saved - eps)) / (2.0 * eps);
      inputs[k][i] = saved;
      const double a = analytic[k][i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

}  // namespace

std::vector<OpCheck> check_all_ops(std::uint64_t seed, double eps) {
  Rng rng = Rng::derive(seed, StreamPurpose::kTest, 17);
  std::vector<OpCheck> out;
  auto run = [&](const std::string& name, std::vector<Tensor<double>> inputs,
                 const std::function<Var<double>(std::vector<Var<double>>&)>& op) {
    out.push_back({name, check_op(std::move(inputs), op, rng, eps)});
  };
  using V = std::vector<Var<double>>;
  run("matmul", {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)},
      [](V& v) { return matmul(v[0], v[1]); });
  run("add", {random_tensor({5}, rng), random_tensor({5}, rng)},
      [](V& v) { return add(v[0], v[1]); });
  run("sub", {random_tensor({5}, rng), random_tensor({5}, rng)},
      [](V& v) { return sub(v[0], v[1]); });
  run("hadamard", {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)},
      [](V& v) { return hadamard(v[0], v[1]); });
  run("scale", {random_tensor({4}, rng)}, [](V& v) { return scale(v[0], -1.7); });
  run("add_scalar", {random_tensor({4}, rng)}, [](V& v) { return add_scalar(v[0], 0.3); });
  run("one_minus", {random_tensor({4}, rng)}, [](V& v) { return one_minus(v[0]); });
  run("scale_by", {random_tensor({1}, rng), random_tensor({4}, rng)},
      [](V& v) { return scale_by(v[0], v[1]); });
  run("tanh", {random_tensor({6}, rng, -2, 2)}, [](V& v) { return tanh(v[0]); });
  run("sigmoid", {random_tensor({6}, rng, -3, 3)}, [](V& v) { return sigmoid(v[0]); });
  run("exp", {random_tensor({6}, rng)}, [](V& v) { return exp(v[0]); });
  run("log", {random_tensor({6}, rng, 0.5, 2.0)}, [](V& v) { return log(v[0]); });
  run("reshape", {random_tensor({6}, rng)}, [](V& v) { return reshape(v[0], {2, 3}); });
  run("expand_rows", {random_tensor({3}, rng)}, [](V& v) { return expand_rows(v[0], 4); });
  run("concat", {random_tensor({2, 3}, rng), random_tensor({2, 2}, rng)},
      [](V& v) { return concat<double>({v[0], v[1]}, 1); });
  run("slice", {random_tensor({3, 4}, rng)}, [](V& v) { return slice(v[0], 1, 1, 2); });
  run("sum", {random_tensor({3, 4}, rng)}, [](V& v) { return sum(v[0]); });
  run("sum_axis", {random_tensor({3, 4}, rng)}, [](V& v) { return sum(v[0], 1); });
  run("softmax", {random_tensor({3, 4}, rng, -2, 2)}, [](V& v) { return softmax(v[0], 1); });
  run("l2_normalize", {random_tensor({3, 4}, rng)},
      [](V& v) { return l2_normalize(v[0], 1); });
  run("embedding_lookup", {random_tensor({5, 3}, rng)},
      [](V& v) { return embedding_lookup(v[0], {4, 0, 4}); });
  run("dropout", {random_tensor({8}, rng)}, [](V& v) {
    Rng mask_rng(99);
    return dropout(v[0], 0.5, mask_rng, true);
  });
  run("cross_entropy", {random_tensor({5}, rng, -2, 2)},
      [](V& v) { return cross_entropy(v[0], 2); });

  // The straight-through rule is not the derivative of its forward value, so it
  // is checked against the gradient of the relaxed path instead.
  {
    const Tensor<double> logits = random_tensor({3}, rng, -2, 2);
    const Tensor<double> weights = random_tensor({3}, rng);
    auto grad_of = [&](bool hard) {
      Graph<double> g;
      Var<double> x = g.leaf(logits);
      Var<double> relaxed = softmax(x);
      Var<double> y = hard ? straight_through(Tensor<double>::vector({0.0, 1.0, 0.0}), relaxed)
                           : relaxed;
      g.backward(y, weights);
      return g.grad(x);
    };
    const Tensor<double> st = grad_of(true);
    const Tensor<double> soft = grad_of(false);
    double err = 0.0;
    for (std::size_t i = 0; i < st.size(); ++i) {
      err = std::max(err, std::abs(st[i] - soft[i]) / std::max(1.0, std::abs(st[i])));
    }
    out.push_back({"straight_through", err});
  }
  return out;
}

}  // namespace rva
