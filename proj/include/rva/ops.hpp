#ifndef RVA_OPS_HPP_
#define RVA_OPS_HPP_

// Differentiable operations over Graph nodes. No broadcasting: operands must
// agree exactly, and alignment is explicit through reshape/expand_rows.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "rva/errors.hpp"
#include "rva/graph.hpp"
#include "rva/rng.hpp"
#include "rva/tensor.hpp"

namespace rva {

namespace detail {

inline void fail_shape(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                   " vs " + shape_str(b));
}

inline void fail_shape(const char* op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op) + ": " + why + " (shape " + shape_str(a) + ")");
}

template <typename T>
void require_same(const char* op, const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) fail_shape(op, a.shape(), b.shape());
}

template <typename T>
void add_into(Tensor<T>* dst, const Tensor<T>& src) {
  if (!dst) return;
  auto& d = dst->storage();
  const auto& s = src.storage();
  for (std::size_t i = 0; i < s.size(); ++i) d[i] += s[i];
}

// Unary elementwise op given f(x) and f'(x) expressed through (x, y).
template <typename T, typename F, typename DF>
Var<T> unary(const char* op, Var<T> a, F f, DF df) {
  Graph<T>& g = *a.graph;
  Tensor<T> out(a.shape());
  const auto& x = a.value().storage();
  auto& y = out.storage();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const auto self = static_cast<std::uint32_t>(g.node_count());
  return g.record(op, std::move(out), {a}, [a, df, self](Graph<T>& g, const Tensor<T>& gy) {
    Tensor<T>* ga = g.grad_target(a);
    if (!ga) return;
    const auto& x = g.value(a).storage();
    const auto& y = g.value(self).storage();
    auto& d = ga->storage();
    const auto& up = gy.storage();
    for (std::size_t i = 0; i < x.size(); ++i) d[i] += up[i] * df(x[i], y[i]);
  });
}

}  // namespace detail

// ---------------------------------------------------------------- linear algebra

// [m,k]x[k,n] -> [m,n];  [m,k]x[k] -> [m];  [k]x[k,n] -> [n].
// Each output element accumulates over k in ascending order, so a row's result
// does not depend on how many other rows share the call.
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  if (A.rank() > 2 || B.rank() > 2 || (A.rank() == 1 && B.rank() == 1)) {
    detail::fail_shape("matmul", A.shape(), B.shape());
  }
  const std::size_t m = A.rank() == 2 ? A.dim(0) : 1;
  const std::size_t k = A.rank() == 2 ? A.dim(1) : A.dim(0);
  const std::size_t kb = B.dim(0);
  const std::size_t n = B.rank() == 2 ? B.dim(1) : 1;
  if (k != kb) detail::fail_shape("matmul", A.shape(), B.shape());
  Shape out_shape;
  if (A.rank() == 2 && B.rank() == 2) out_shape = {m, n};
  else if (A.rank() == 2) out_shape = {m};
  else out_shape = {n};
  Tensor<T> out(out_shape);
  const T* pa = A.data();
  const T* pb = B.data();
  T* pc = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = pa[i * k + p];
      const T* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  Graph<T>& g = *a.graph;
  return g.record("matmul", std::move(out), {a, b},
                  [a, b, m, k, n](Graph<T>& g, const Tensor<T>& gc) {
    const T* pa = g.value(a).data();
    const T* pb = g.value(b).data();
    const T* pg = gc.data();
    if (Tensor<T>* ga = g.grad_target(a)) {
      T* d = ga->data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const T* brow = pb + p * n;
          const T* grow = pg + i * n;
          T acc = T{0};
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          d[i * k + p] += acc;
        }
      }
    }
    if (Tensor<T>* gb = g.grad_target(b)) {
      T* d = gb->data();
      for (std::size_t i = 0; i < m; ++i) {
        const T* grow = pg + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = pa[i * k + p];
          T* drow = d + p * n;
          for (std::size_t j = 0; j < n; ++j) drow[j] += aip * grow[j];
        }
      }
    }
  });
}

// ---------------------------------------------------------------- elementwise

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::require_same("add", a, b);
  Tensor<T> out = a.value();
  const auto& y = b.value().storage();
  for (std::size_t i = 0; i < y.size(); ++i) out[i] += y[i];
  return a.graph->record("add", std::move(out), {a, b},
                         [a, b](Graph<T>& g, const Tensor<T>& gy) {
    detail::add_into(g.grad_target(a), gy);
    detail::add_into(g.grad_target(b), gy);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::require_same("sub", a, b);
  Tensor<T> out = a.value();
  const auto& y = b.value().storage();
  for (std::size_t i = 0; i < y.size(); ++i) out[i] -= y[i];
  return a.graph->record("sub", std::move(out), {a, b},
                         [a, b](Graph<T>& g, const Tensor<T>& gy) {
    detail::add_into(g.grad_target(a), gy);
    if (Tensor<T>* gb = g.grad_target(b)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] -= gy[i];
    }
  });
}

// Hadamard (element-wise) product.
template <typename T>
Var<T> hadamard(Var<T> a, Var<T> b) {
  detail::require_same("hadamard", a, b);
  Tensor<T> out = a.value();
  const auto& y = b.value().storage();
  for (std::size_t i = 0; i < y.size(); ++i) out[i] *= y[i];
  return a.graph->record("hadamard", std::move(out), {a, b},
                         [a, b](Graph<T>& g, const Tensor<T>& gy) {
    const auto& x = g.value(a).storage();
    const auto& y = g.value(b).storage();
    if (Tensor<T>* ga = g.grad_target(a)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * y[i];
    }
    if (Tensor<T>* gb = g.grad_target(b)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i] * x[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= factor;
  return a.graph->record("scale", std::move(out), {a},
                         [a, factor](Graph<T>& g, const Tensor<T>& gy) {
    if (Tensor<T>* ga = g.grad_target(a)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * factor;
    }
  });
}

template <typename T>
Var<T> add_scalar(Var<T> a, T offset) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v += offset;
  return a.graph->record("add_scalar", std::move(out), {a},
                         [a](Graph<T>& g, const Tensor<T>& gy) {
    detail::add_into(g.grad_target(a), gy);
  });
}

// 1 - a, elementwise.
template <typename T>
Var<T> one_minus(Var<T> a) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = T{1} - v;
  return a.graph->record("one_minus", std::move(out), {a},
                         [a](Graph<T>& g, const Tensor<T>& gy) {
    if (Tensor<T>* ga = g.grad_target(a)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] -= gy[i];
    }
  });
}

// s * a for a scalar node s (shape {1}).
template <typename T>
Var<T> scale_by(Var<T> s, Var<T> a) {
  if (s.size() != 1) detail::fail_shape("scale_by", s.shape(), a.shape());
  const T factor = s.item();
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = factor * v;
  return a.graph->record("scale_by", std::move(out), {s, a},
                         [s, a](Graph<T>& g, const Tensor<T>& gy) {
    const T factor = g.value(s)[0];
    const auto& x = g.value(a).storage();
    if (Tensor<T>* gs = g.grad_target(s)) {
      T acc = T{0};
      for (std::size_t i = 0; i < x.size(); ++i) acc += gy[i] * x[i];
      (*gs)[0] += acc;
    }
    if (Tensor<T>* ga = g.grad_target(a)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * factor;
    }
  });
}

template <typename T>
Var<T> tanh(Var<T> a) {
  return detail::unary<T>("tanh", a, [](T x) { return std::tanh(x); },
                          [](T, T y) { return T{1} - y * y; });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  return detail::unary<T>(
      "sigmoid", a,
      [](T x) {
        if (x >= 0) return T{1} / (T{1} + std::exp(-x));
        const T e = std::exp(x);
        return e / (T{1} + e);
      },
      [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Var<T> exp(Var<T> a) {
  return detail::unary<T>("exp", a, [](T x) { return std::exp(x); },
                          [](T, T y) { return y; });
}

template <typename T>
Var<T> log(Var<T> a) {
  for (T v : a.value().values()) {
    if (!(v > T{0})) throw NumericError("log: non-positive input");
  }
  return detail::unary<T>("log", a, [](T x) { return std::log(x); },
                          [](T x, T) { return T{1} / x; });
}

// ---------------------------------------------------------------- structure

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  Tensor<T> out = a.value().reshaped(std::move(shape));
  return a.graph->record("reshape", std::move(out), {a},
                         [a](Graph<T>& g, const Tensor<T>& gy) {
    detail::add_into(g.grad_target(a), gy);
  });
}

// Rank-1 [n] repeated as the rows of an [m,n] matrix.
template <typename T>
Var<T> expand_rows(Var<T> a, std::size_t m) {
  if (a.value().rank() != 1 || m == 0) detail::fail_shape("expand_rows", a.shape(), "expects rank-1 input and m > 0");
  const std::size_t n = a.size();
  Tensor<T> out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(a.value().data(), a.value().data() + n, out.data() + i * n);
  }
  return a.graph->record("expand_rows", std::move(out), {a},
                         [a, m, n](Graph<T>& g, const Tensor<T>& gy) {
    if (Tensor<T>* ga = g.grad_target(a)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) (*ga)[j] += gy[i * n + j];
      }
    }
  });
}

// Concatenation. Rank-1 inputs join along axis 0. Rank-2 inputs join along
// axis 0 (rows) or axis 1 (columns).
template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis = 0) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const std::size_t rank = parts[0].value().rank();
  for (const auto& p : parts) {
    if (p.value().rank() != rank || rank > 2 || (rank == 1 && axis != 0) || axis > 1) {
      detail::fail_shape("concat", parts[0].shape(), p.shape());
    }
  }
  Graph<T>& g = *parts[0].graph;
  if (rank == 1 || axis == 0) {
    const std::size_t cols = rank == 2 ? parts[0].value().dim(1) : 0;
    std::size_t total = 0;
    for (const auto& p : parts) {
      if (rank == 2 && p.value().dim(1) != cols) detail::fail_shape("concat", parts[0].shape(), p.shape());
      total += rank == 2 ? p.value().dim(0) : p.size();
    }
    std::vector<T> data;
    data.reserve(rank == 2 ? total * cols : total);
    for (const auto& p : parts) {
      data.insert(data.end(), p.value().storage().begin(), p.value().storage().end());
    }
    Shape shape = rank == 2 ? Shape{total, cols} : Shape{total};
    return g.record("concat", Tensor<T>(shape, std::move(data)), parts,
                    [parts](Graph<T>& g, const Tensor<T>& gy) {
      std::size_t offset = 0;
      for (const auto& p : parts) {
        const std::size_t n = g.value(p).size();
        if (Tensor<T>* gp = g.grad_target(p)) {
          for (std::size_t i = 0; i < n; ++i) (*gp)[i] += gy[offset + i];
        }
        offset += n;
      }
    });
  }
  const std::size_t rows = parts[0].value().dim(0);
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.value().dim(0) != rows) detail::fail_shape("concat", parts[0].shape(), p.shape());
    total += p.value().dim(1);
  }
  Tensor<T> out({rows, total});
  std::size_t col = 0;
  for (const auto& p : parts) {
    const Tensor<T>& v = p.value();
    const std::size_t c = v.dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(v.data() + r * c, v.data() + (r + 1) * c, out.data() + r * total + col);
    }
    col += c;
  }
  return g.record("concat", std::move(out), parts,
                  [parts, rows, total](Graph<T>& g, const Tensor<T>& gy) {
    std::size_t col = 0;
    for (const auto& p : parts) {
      const std::size_t c = g.value(p).dim(1);
      if (Tensor<T>* gp = g.grad_target(p)) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < c; ++j) (*gp)[r * c + j] += gy[r * total + col + j];
        }
      }
      col += c;
    }
  });
}

// Equal-length rank-1 inputs as the rows of a matrix.
template <typename T>
Var<T> stack(const std::vector<Var<T>>& rows) {
  if (rows.empty()) throw ShapeError("stack: no inputs");
  for (const auto& r : rows) {
    if (r.value().rank() != 1 || r.size() != rows[0].size()) detail::fail_shape("stack", rows[0].shape(), r.shape());
  }
  return reshape(concat(rows), Shape{rows.size(), rows[0].size()});
}

// Contiguous range [begin, begin+len) along an axis. Rank-1: axis 0.
// Rank-2: axis 0 selects rows, axis 1 selects columns.
template <typename T>
Var<T> slice(Var<T> a, std::size_t axis, std::size_t begin, std::size_t len) {
  const Tensor<T>& x = a.value();
  const std::size_t rank = x.rank();
  if (rank > 2 || axis >= rank || len == 0 || begin + len > x.dim(axis)) {
    detail::fail_shape("slice", x.shape(), "range [" + std::to_string(begin) + "," +
                       std::to_string(begin + len) + ") on axis " + std::to_string(axis));
  }
  const std::size_t rows = rank == 2 ? x.dim(0) : 1;
  const std::size_t cols = rank == 2 ? x.dim(1) : x.dim(0);
  const std::size_t r0 = (rank == 2 && axis == 0) ? begin : 0;
  const std::size_t nr = (rank == 2 && axis == 0) ? len : rows;
  const std::size_t c0 = (rank == 1 || axis == 1) ? begin : 0;
  const std::size_t nc = (rank == 1 || axis == 1) ? len : cols;
  Tensor<T> out(rank == 2 ? Shape{nr, nc} : Shape{nc});
  for (std::size_t r = 0; r < nr; ++r) {
    std::copy(x.data() + (r0 + r) * cols + c0, x.data() + (r0 + r) * cols + c0 + nc,
              out.data() + r * nc);
  }
  return a.graph->record("slice", std::move(out), {a},
                         [a, cols, r0, nr, c0, nc](Graph<T>& g, const Tensor<T>& gy) {
    if (Tensor<T>* ga = g.grad_target(a)) {
      for (std::size_t r = 0; r < nr; ++r) {
        for (std::size_t c = 0; c < nc; ++c) (*ga)[(r0 + r) * cols + c0 + c] += gy[r * nc + c];
      }
    }
  });
}

// Row i of a matrix as a rank-1 tensor.
template <typename T>
Var<T> row(Var<T> a, std::size_t i) {
  if (a.value().rank() != 2) detail::fail_shape("row", a.shape(), "expects rank-2 input");
  return reshape(slice(a, 0, i, 1), Shape{a.value().dim(1)});
}

// Element i of a rank-1 tensor as a scalar.
template <typename T>
Var<T> pick(Var<T> a, std::size_t i) {
  if (a.value().rank() != 1) detail::fail_shape("pick", a.shape(), "expects rank-1 input");
  return slice(a, 0, i, 1);
}

// ---------------------------------------------------------------- reductions

template <typename T>
Var<T> sum(Var<T> a) {
  T acc = T{0};
  for (T v : a.value().values()) acc += v;
  return a.graph->record("sum", Tensor<T>::scalar(acc), {a},
                         [a](Graph<T>& g, const Tensor<T>& gy) {
    if (Tensor<T>* ga = g.grad_target(a)) {
      for (auto& d : ga->values()) d += gy[0];
    }
  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  return scale(sum(a), T{1} / static_cast<T>(a.size()));
}

// Rank-2 reduction: axis 0 sums down columns -> [cols]; axis 1 sums rows -> [rows].
template <typename T>
Var<T> sum(Var<T> a, std::size_t axis) {
  const Tensor<T>& x = a.value();
  if (x.rank() != 2 || axis > 1) detail::fail_shape("sum", x.shape(), "axis reduction expects rank-2 input");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  Tensor<T> out(Shape{axis == 0 ? cols : rows});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[axis == 0 ? c : r] += x.at(r, c);
  }
  return a.graph->record("sum_axis", std::move(out), {a},
                         [a, axis, rows, cols](Graph<T>& g, const Tensor<T>& gy) {
    if (Tensor<T>* ga = g.grad_target(a)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) (*ga)[r * cols + c] += gy[axis == 0 ? c : r];
      }
    }
  });
}

template <typename T>
Var<T> mean(Var<T> a, std::size_t axis) {
  const std::size_t n = a.value().rank() == 2 ? a.value().dim(axis) : 1;
  return scale(sum(a, axis), T{1} / static_cast<T>(n));
}

// ---------------------------------------------------------------- normalizers

namespace detail {

// Visits each 1-D lane along `axis`: (offset, stride, count).
template <typename F>
void for_each_lane(const Shape& shape, std::size_t axis, F f) {
  if (shape.size() == 1) {
    f(std::size_t{0}, std::size_t{1}, shape[0]);
    return;
  }
  const std::size_t rows = shape[0], cols = shape[1];
  if (axis == 1) {
    for (std::size_t r = 0; r < rows; ++r) f(r * cols, std::size_t{1}, cols);
  } else {
    for (std::size_t c = 0; c < cols; ++c) f(c, cols, rows);
  }
}

inline void check_axis(const char* op, const Shape& shape, std::size_t axis) {
  if (shape.size() > 2 || axis >= shape.size()) {
    fail_shape(op, shape, "bad axis " + std::to_string(axis));
  }
}

}  // namespace detail

// Softmax along `axis` (rank-1: axis 0; rank-2: 0 = per column, 1 = per row).
template <typename T>
Var<T> softmax(Var<T> a, std::size_t axis = 0) {
  detail::check_axis("softmax", a.shape(), axis);
  const Tensor<T>& x = a.value();
  Tensor<T> out(x.shape());
  detail::for_each_lane(x.shape(), axis, [&](std::size_t off, std::size_t stride, std::size_t n) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[off + i * stride]);
    T total = T{0};
    for (std::size_t i = 0; i < n; ++i) {
      const T e = std::exp(x[off + i * stride] - mx);
      out[off + i * stride] = e;
      total += e;
    }
    for (std::size_t i = 0; i < n; ++i) out[off + i * stride] /= total;
  });
  Graph<T>& g = *a.graph;
  const auto self = static_cast<std::uint32_t>(g.node_count());
  return g.record("softmax", std::move(out), {a},
                  [a, axis, self](Graph<T>& g, const Tensor<T>& gy) {
    Tensor<T>* ga = g.grad_target(a);
    if (!ga) return;
    const Tensor<T>& y = g.value(self);
    detail::for_each_lane(y.shape(), axis, [&](std::size_t off, std::size_t stride, std::size_t n) {
      T dot = T{0};
      for (std::size_t i = 0; i < n; ++i) dot += gy[off + i * stride] * y[off + i * stride];
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = off + i * stride;
        (*ga)[k] += y[k] * (gy[k] - dot);
      }
    });
  });
}

// Unit Euclidean norm along `axis`; an all-zero lane stays zero and passes no
// gradient.
template <typename T>
Var<T> l2_normalize(Var<T> a, std::size_t axis = 0) {
  detail::check_axis("l2_normalize", a.shape(), axis);
  const Tensor<T>& x = a.value();
  Tensor<T> out(x.shape());
  std::vector<T> norms;
  detail::for_each_lane(x.shape(), axis, [&](std::size_t off, std::size_t stride, std::size_t n) {
    T ss = T{0};
    for (std::size_t i = 0; i < n; ++i) ss += x[off + i * stride] * x[off + i * stride];
    const T norm = std::sqrt(ss);
    norms.push_back(norm);
    for (std::size_t i = 0; i < n; ++i) {
      out[off + i * stride] = norm > T{0} ? x[off + i * stride] / norm : T{0};
    }
  });
  Graph<T>& g = *a.graph;
  const auto self = static_cast<std::uint32_t>(g.node_count());
  return g.record("l2_normalize", std::move(out), {a},
                  [a, axis, self, norms](Graph<T>& g, const Tensor<T>& gy) {
    Tensor<T>* ga = g.grad_target(a);
    if (!ga) return;
    const Tensor<T>& y = g.value(self);
    std::size_t lane = 0;
    detail::for_each_lane(y.shape(), axis, [&](std::size_t off, std::size_t stride, std::size_t n) {
      const T norm = norms[lane++];
      if (!(norm > T{0})) return;
      T dot = T{0};
      for (std::size_t i = 0; i < n; ++i) dot += gy[off + i * stride] * y[off + i * stride];
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = off + i * stride;
        (*ga)[k] += (gy[k] - y[k] * dot) / norm;
      }
    });
  });
}

// ---------------------------------------------------------------- lookups

// Rows of `table` ([V,E]) selected by `indices` -> [n,E]. Rows never selected
// receive exactly zero gradient.
template <typename T>
Var<T> embedding_lookup(Var<T> table, const std::vector<std::size_t>& indices) {
  const Tensor<T>& tab = table.value();
  if (tab.rank() != 2) detail::fail_shape("embedding_lookup", tab.shape(), "table must be rank-2");
  if (indices.empty()) detail::fail_shape("embedding_lookup", tab.shape(), "empty index list");
  const std::size_t vocab = tab.dim(0), width = tab.dim(1);
  Tensor<T> out({indices.size(), width});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= vocab) {
      detail::fail_shape("embedding_lookup", tab.shape(),
                         "index " + std::to_string(indices[r]) + " out of range");
    }
    std::copy(tab.data() + indices[r] * width, tab.data() + (indices[r] + 1) * width,
              out.data() + r * width);
  }
  return table.graph->record("embedding_lookup", std::move(out), {table},
                             [table, indices, width](Graph<T>& g, const Tensor<T>& gy) {
    if (Tensor<T>* gt = g.grad_target(table)) {
      for (std::size_t r = 0; r < indices.size(); ++r) {
        for (std::size_t c = 0; c < width; ++c) (*gt)[indices[r] * width + c] += gy[r * width + c];
      }
    }
  });
}

// ---------------------------------------------------------------- stochastic

// Inverted dropout: at train time kept entries are divided by (1 - rate), so
// the evaluation pass is the identity.
template <typename T>
Var<T> dropout(Var<T> a, double rate, Rng& rng, bool train) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ValidationError("dropout: rate must lie in [0,1), got " + std::to_string(rate));
  }
  if (!train || rate == 0.0) return a;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(a.size());
  for (auto& m : mask) m = rng.uniform() < rate ? T{0} : keep_scale;
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] *= mask[i];
  return a.graph->record("dropout", std::move(out), {a},
                         [a, mask](Graph<T>& g, const Tensor<T>& gy) {
    if (Tensor<T>* ga = g.grad_target(a)) {
      for (std::size_t i = 0; i < mask.size(); ++i) (*ga)[i] += gy[i] * mask[i];
    }
  });
}

// Straight-through estimator: the forward value is exactly `hard`, the
// gradient passes to `relaxed` unchanged.
template <typename T>
Var<T> straight_through(const Tensor<T>& hard, Var<T> relaxed) {
  if (hard.shape() != relaxed.shape()) detail::fail_shape("straight_through", hard.shape(), relaxed.shape());
  return relaxed.graph->record("straight_through", hard, {relaxed},
                               [relaxed](Graph<T>& g, const Tensor<T>& gy) {
    detail::add_into(g.grad_target(relaxed), gy);
  });
}

// -log softmax(scores)[target], evaluated through a log1p form so a dominant
// target score still yields a strictly positive loss.
template <typename T>
Var<T> cross_entropy(Var<T> scores, std::size_t target) {
  const Tensor<T>& s = scores.value();
  if (s.rank() != 1 || target >= s.size()) {
    detail::fail_shape("cross_entropy", s.shape(), "target " + std::to_string(target) + " out of range");
  }
  std::size_t arg = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] > s[arg]) arg = i;
  }
  const double mx = static_cast<double>(s[arg]);
  double rest = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != arg) rest += std::exp(static_cast<double>(s[i]) - mx);
  }
  const double loss = (mx - static_cast<double>(s[target])) + std::log1p(rest);
  return scores.graph->record("cross_entropy", Tensor<T>::scalar(static_cast<T>(loss)), {scores},
                              [scores, target, mx, rest](Graph<T>& g, const Tensor<T>& gy) {
    Tensor<T>* gs = g.grad_target(scores);
    if (!gs) return;
    const Tensor<T>& s = g.value(scores);
    const double total = 1.0 + rest;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double p = std::exp(static_cast<double>(s[i]) - mx) / total;
      (*gs)[i] += gy[0] * static_cast<T>(p - (i == target ? 1.0 : 0.0));
    }
  });
}

}  // namespace rva

#endif  // RVA_OPS_HPP_
