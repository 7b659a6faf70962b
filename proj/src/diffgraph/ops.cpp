/*
 * Copyright 2026 The TPFL Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <string>

#include "tpfl/error.hpp"
#include "tpfl/graph.hpp"

namespace tpfl::ad {
namespace {

// View of a tensor as [outer, n, inner] around one axis.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;

  std::size_t index(std::size_t o, std::size_t k, std::size_t i) const {
    return (o * n + k) * inner + i;
  }
};

AxisSplit split_axis(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
  s.n = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
  return s;
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
}

void require_rank(const char* op, Var a, std::size_t rank) {
  if (a.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + shape_string(a.shape()));
  }
}

// Adds `contribution` into the gradient of parent k when that parent is trainable.
void accumulate(Graph& g, std::size_t self, std::size_t k, const Tensor& contribution) {
  const std::size_t p = g.parent(self, k);
  if (!g.needs_grad(p)) return;
  Tensor& dst = g.grad_mut(p);
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += contribution[i];
}

template <typename F>
Tensor map_values(const Tensor& x, F f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return a.graph().emit(OpTag::kAdd, std::move(out), {a, b}, [](Graph& g, std::size_t self) {
    accumulate(g, self, 0, g.grad_of(self));
    accumulate(g, self, 1, g.grad_of(self));
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return a.graph().emit(OpTag::kSub, std::move(out), {a, b}, [](Graph& g, std::size_t self) {
    accumulate(g, self, 0, g.grad_of(self));
    accumulate(g, self, 1, map_values(g.grad_of(self), [](double v) { return -v; }));
  });
}

Var mul_elem(Var a, Var b) {
  require_same_shape("mul_elem", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return a.graph().emit(OpTag::kMulElem, std::move(out), {a, b},
                        [](Graph& g, std::size_t self) {
                          const Tensor& go = g.grad_of(self);
                          const Tensor& av = g.value_of(g.parent(self, 0));
                          const Tensor& bv = g.value_of(g.parent(self, 1));
                          Tensor da(go.shape()), db(go.shape());
                          for (std::size_t i = 0; i < go.size(); ++i) {
                            da[i] = go[i] * bv[i];
                            db[i] = go[i] * av[i];
                          }
                          accumulate(g, self, 0, da);
                          accumulate(g, self, 1, db);
                        });
}

Var matmul(Var a, Var b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " are incompatible");
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  return a.graph().emit(
      OpTag::kMatmul, std::move(out), {a, b}, [m, k, n](Graph& g, std::size_t self) {
        const Tensor& go = g.grad_of(self);
        const std::size_t pa = g.parent(self, 0), pb = g.parent(self, 1);
        const Tensor& av = g.value_of(pa);
        const Tensor& bv = g.value_of(pb);
        if (g.needs_grad(pa)) {
          Tensor da({m, k});
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += go[i * n + j] * bv[p * n + j];
              da[i * k + p] = acc;
            }
          accumulate(g, self, 0, da);
        }
        if (g.needs_grad(pb)) {
          Tensor db({k, n});
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double aip = av[i * k + p];
              for (std::size_t j = 0; j < n; ++j) db[p * n + j] += aip * go[i * n + j];
            }
          accumulate(g, self, 1, db);
        }
      });
}

Var transpose(Var a) {
  require_rank("transpose", a, 2);
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.value()[i * c + j];
  return a.graph().emit(OpTag::kTranspose, std::move(out), {a},
                        [r, c](Graph& g, std::size_t self) {
                          const Tensor& go = g.grad_of(self);
                          Tensor da({r, c});
                          for (std::size_t i = 0; i < r; ++i)
                            for (std::size_t j = 0; j < c; ++j) da[i * c + j] = go[j * r + i];
                          accumulate(g, self, 0, da);
                        });
}

Var scale(Var a, double c) {
  Tensor out = map_values(a.value(), [c](double v) { return c * v; });
  return a.graph().emit(OpTag::kScale, std::move(out), {a}, [c](Graph& g, std::size_t self) {
    accumulate(g, self, 0, map_values(g.grad_of(self), [c](double v) { return c * v; }));
  });
}

Var tanh(Var a) {
  Tensor out = map_values(a.value(), [](double v) { return std::tanh(v); });
  return a.graph().emit(OpTag::kTanh, std::move(out), {a}, [](Graph& g, std::size_t self) {
    const Tensor& go = g.grad_of(self);
    const Tensor& y = g.value_of(self);
    Tensor da(go.shape());
    for (std::size_t i = 0; i < go.size(); ++i) da[i] = go[i] * (1.0 - y[i] * y[i]);
    accumulate(g, self, 0, da);
  });
}

Var exp(Var a) {
  Tensor out = map_values(a.value(), [](double v) { return std::exp(v); });
  if (!out.all_finite()) throw DomainError("exp: overflow for input of shape " +
                                           shape_string(a.shape()));
  return a.graph().emit(OpTag::kExp, std::move(out), {a}, [](Graph& g, std::size_t self) {
    const Tensor& go = g.grad_of(self);
    const Tensor& y = g.value_of(self);
    Tensor da(go.shape());
    for (std::size_t i = 0; i < go.size(); ++i) da[i] = go[i] * y[i];
    accumulate(g, self, 0, da);
  });
}

Var log(Var a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) {
      throw DomainError("log: non-positive input " + std::to_string(v) + " in shape " +
                        shape_string(a.shape()));
    }
  }
  Tensor out = map_values(a.value(), [](double v) { return std::log(v); });
  return a.graph().emit(OpTag::kLog, std::move(out), {a}, [](Graph& g, std::size_t self) {
    const Tensor& go = g.grad_of(self);
    const Tensor& x = g.value_of(g.parent(self, 0));
    Tensor da(go.shape());
    for (std::size_t i = 0; i < go.size(); ++i) da[i] = go[i] / x[i];
    accumulate(g, self, 0, da);
  });
}

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  return a.graph().emit(OpTag::kSum, Tensor::scalar(acc), {a}, [](Graph& g, std::size_t self) {
    const std::size_t p = g.parent(self, 0);
    accumulate(g, self, 0, Tensor::full(g.value_of(p).shape(), g.grad_of(self)[0]));
  });
}

Var sum(Var a, std::size_t axis) {
  const AxisSplit s = split_axis("sum", a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(out_shape);
  const Tensor& x = a.value();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t k = 0; k < s.n; ++k)
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += x[s.index(o, k, i)];
  return a.graph().emit(OpTag::kSumAxis, std::move(out), {a}, [s](Graph& g, std::size_t self) {
    const Tensor& go = g.grad_of(self);
    Tensor da(g.value_of(g.parent(self, 0)).shape());
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t k = 0; k < s.n; ++k)
        for (std::size_t i = 0; i < s.inner; ++i) da[s.index(o, k, i)] = go[o * s.inner + i];
    accumulate(g, self, 0, da);
  });
}

Var l2_normalize(Var a, std::size_t axis) {
  const AxisSplit s = split_axis("l2_normalize", a.shape(), axis);
  const Tensor& x = a.value();
  Tensor out(a.shape());
  std::vector<double> norms(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      double sq = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) sq += x[s.index(o, k, i)] * x[s.index(o, k, i)];
      const double norm = std::sqrt(sq);
      if (!(norm > 0.0)) {
        throw DomainError("l2_normalize: zero-norm slice in shape " + shape_string(a.shape()));
      }
      norms[o * s.inner + i] = norm;
      for (std::size_t k = 0; k < s.n; ++k) out[s.index(o, k, i)] = x[s.index(o, k, i)] / norm;
    }
  return a.graph().emit(
      OpTag::kL2Normalize, std::move(out), {a},
      [s, norms = std::move(norms)](Graph& g, std::size_t self) {
        const Tensor& go = g.grad_of(self);
        const Tensor& y = g.value_of(self);
        Tensor da(go.shape());
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t i = 0; i < s.inner; ++i) {
            double yg = 0.0;
            for (std::size_t k = 0; k < s.n; ++k) yg += y[s.index(o, k, i)] * go[s.index(o, k, i)];
            const double norm = norms[o * s.inner + i];
            for (std::size_t k = 0; k < s.n; ++k) {
              const std::size_t idx = s.index(o, k, i);
              da[idx] = (go[idx] - y[idx] * yg) / norm;
            }
          }
        accumulate(g, self, 0, da);
      });
}

Var rms_normalize(Var a, std::size_t axis, double eps) {
  const AxisSplit s = split_axis("rms_normalize", a.shape(), axis);
  if (!(eps > 0.0)) throw DomainError("rms_normalize: eps must be positive");
  const Tensor& x = a.value();
  Tensor out(a.shape());
  std::vector<double> inv(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      double sq = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) sq += x[s.index(o, k, i)] * x[s.index(o, k, i)];
      const double r = 1.0 / std::sqrt(sq / static_cast<double>(s.n) + eps);
      inv[o * s.inner + i] = r;
      for (std::size_t k = 0; k < s.n; ++k) out[s.index(o, k, i)] = x[s.index(o, k, i)] * r;
    }
  return a.graph().emit(
      OpTag::kRmsNormalize, std::move(out), {a},
      [s, inv = std::move(inv)](Graph& g, std::size_t self) {
        const Tensor& go = g.grad_of(self);
        const Tensor& x = g.value_of(g.parent(self, 0));
        Tensor da(go.shape());
        const double n = static_cast<double>(s.n);
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t i = 0; i < s.inner; ++i) {
            const double r = inv[o * s.inner + i];
            double gx = 0.0;
            for (std::size_t k = 0; k < s.n; ++k) gx += go[s.index(o, k, i)] * x[s.index(o, k, i)];
            const double c = r * r * r * gx / n;
            for (std::size_t k = 0; k < s.n; ++k) {
              const std::size_t idx = s.index(o, k, i);
              da[idx] = r * go[idx] - c * x[idx];
            }
          }
        accumulate(g, self, 0, da);
      });
}

Var dot_rows(Var a, Var b) {
  require_same_shape("dot_rows", a, b);
  if (a.shape().empty() || a.shape().size() > 2) {
    throw ShapeError("dot_rows: expected rank 1 or 2, got " + shape_string(a.shape()));
  }
  const bool matrix = a.shape().size() == 2;
  const std::size_t rows = matrix ? a.shape()[0] : 1;
  const std::size_t width = a.shape().back();
  Tensor out(matrix ? Shape{rows} : Shape{});
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < width; ++j) acc += a.value()[r * width + j] * b.value()[r * width + j];
    out[r] = acc;
  }
  return a.graph().emit(OpTag::kDotRows, std::move(out), {a, b},
                        [rows, width](Graph& g, std::size_t self) {
                          const Tensor& go = g.grad_of(self);
                          const Tensor& av = g.value_of(g.parent(self, 0));
                          const Tensor& bv = g.value_of(g.parent(self, 1));
                          Tensor da(av.shape()), db(bv.shape());
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t j = 0; j < width; ++j) {
                              da[r * width + j] = go[r] * bv[r * width + j];
                              db[r * width + j] = go[r] * av[r * width + j];
                            }
                          accumulate(g, self, 0, da);
                          accumulate(g, self, 1, db);
                        });
}

Var softmax(Var a, std::size_t axis) {
  const AxisSplit s = split_axis("softmax", a.shape(), axis);
  const Tensor& x = a.value();
  Tensor out(a.shape());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      double mx = x[s.index(o, 0, i)];
      for (std::size_t k = 1; k < s.n; ++k) mx = std::max(mx, x[s.index(o, k, i)]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) {
        const double e = std::exp(x[s.index(o, k, i)] - mx);
        out[s.index(o, k, i)] = e;
        z += e;
      }
      for (std::size_t k = 0; k < s.n; ++k) out[s.index(o, k, i)] /= z;
    }
  return a.graph().emit(OpTag::kSoftmax, std::move(out), {a}, [s](Graph& g, std::size_t self) {
    const Tensor& go = g.grad_of(self);
    const Tensor& y = g.value_of(self);
    Tensor da(go.shape());
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        double dotp = 0.0;
        for (std::size_t k = 0; k < s.n; ++k) dotp += go[s.index(o, k, i)] * y[s.index(o, k, i)];
        for (std::size_t k = 0; k < s.n; ++k) {
          const std::size_t idx = s.index(o, k, i);
          da[idx] = y[idx] * (go[idx] - dotp);
        }
      }
    accumulate(g, self, 0, da);
  });
}

Var log_softmax(Var a, std::size_t axis) {
  const AxisSplit s = split_axis("log_softmax", a.shape(), axis);
  const Tensor& x = a.value();
  Tensor out(a.shape());
  // Probabilities are kept from the forward pass rather than recomputed as
  // exp(out): exp(x - max) / sum is exactly uniform on tied logits, so tied
  // gradients cancel exactly.
  Tensor prob(a.shape());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      double mx = x[s.index(o, 0, i)];
      for (std::size_t k = 1; k < s.n; ++k) mx = std::max(mx, x[s.index(o, k, i)]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) {
        prob[s.index(o, k, i)] = std::exp(x[s.index(o, k, i)] - mx);
        z += prob[s.index(o, k, i)];
      }
      const double lse = mx + std::log(z);
      for (std::size_t k = 0; k < s.n; ++k) {
        out[s.index(o, k, i)] = x[s.index(o, k, i)] - lse;
        prob[s.index(o, k, i)] /= z;
      }
    }
  return a.graph().emit(OpTag::kLogSoftmax, std::move(out), {a},
                        [s, prob = std::move(prob)](Graph& g, std::size_t self) {
    const Tensor& go = g.grad_of(self);
    Tensor da(go.shape());
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        double gsum = 0.0;
        for (std::size_t k = 0; k < s.n; ++k) gsum += go[s.index(o, k, i)];
        for (std::size_t k = 0; k < s.n; ++k) {
          const std::size_t idx = s.index(o, k, i);
          da[idx] = go[idx] - prob[idx] * gsum;
        }
      }
    accumulate(g, self, 0, da);
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  split_axis("concat", first, axis);
  std::vector<std::size_t> widths;
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Var& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != first.size()) {
      throw ShapeError("concat: rank mismatch " + shape_string(first) + " vs " +
                       shape_string(probe));
    }
    const std::size_t w = probe[axis];
    probe[axis] = first[axis];
    if (probe != first) {
      throw ShapeError("concat: shape mismatch " + shape_string(first) + " vs " +
                       shape_string(p.shape()) + " along axis " + std::to_string(axis));
    }
    widths.push_back(w);
    out_shape[axis] += w;
  }
  const AxisSplit so = split_axis("concat", out_shape, axis);
  Tensor out(out_shape);
  std::size_t base = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& x = parts[p].value();
    const std::size_t w = widths[p];
    for (std::size_t o = 0; o < so.outer; ++o)
      for (std::size_t k = 0; k < w; ++k)
        for (std::size_t i = 0; i < so.inner; ++i)
          out[so.index(o, base + k, i)] = x[(o * w + k) * so.inner + i];
    base += w;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].graph().emit(
      OpTag::kConcat, std::move(out), std::move(inputs),
      [so, widths = std::move(widths)](Graph& g, std::size_t self) {
        const Tensor& go = g.grad_of(self);
        std::size_t base = 0;
        for (std::size_t p = 0; p < widths.size(); ++p) {
          const std::size_t w = widths[p];
          if (g.needs_grad(g.parent(self, p))) {
            Tensor dp(g.value_of(g.parent(self, p)).shape());
            for (std::size_t o = 0; o < so.outer; ++o)
              for (std::size_t k = 0; k < w; ++k)
                for (std::size_t i = 0; i < so.inner; ++i)
                  dp[(o * w + k) * so.inner + i] = go[so.index(o, base + k, i)];
            accumulate(g, self, p, dp);
          }
          base += w;
        }
      });
}

Var slice(Var a, std::size_t begin, std::size_t end, std::size_t axis) {
  const AxisSplit s = split_axis("slice", a.shape(), axis);
  if (begin >= end || end > s.n) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for axis " + std::to_string(axis) + " of " +
                     shape_string(a.shape()));
  }
  const std::size_t w = end - begin;
  Shape out_shape = a.shape();
  out_shape[axis] = w;
  Tensor out(out_shape);
  const Tensor& x = a.value();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t k = 0; k < w; ++k)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[(o * w + k) * s.inner + i] = x[s.index(o, begin + k, i)];
  return a.graph().emit(OpTag::kSlice, std::move(out), {a},
                        [s, begin, w](Graph& g, std::size_t self) {
                          const Tensor& go = g.grad_of(self);
                          Tensor da(g.value_of(g.parent(self, 0)).shape());
                          for (std::size_t o = 0; o < s.outer; ++o)
                            for (std::size_t k = 0; k < w; ++k)
                              for (std::size_t i = 0; i < s.inner; ++i)
                                da[s.index(o, begin + k, i)] = go[(o * w + k) * s.inner + i];
                          accumulate(g, self, 0, da);
                        });
}

Var masked_add(Var base, Var delta, const Tensor& mask) {
  require_same_shape("masked_add", base, delta);
  if (mask.shape() != base.shape()) {
    throw ShapeError("masked_add: mask shape " + shape_string(mask.shape()) +
                     " vs input " + shape_string(base.shape()));
  }
  Tensor out(base.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = base.value()[i] + delta.value()[i] * mask[i];
  return base.graph().emit(OpTag::kMaskedAdd, std::move(out), {base, delta},
                           [mask](Graph& g, std::size_t self) {
                             const Tensor& go = g.grad_of(self);
                             accumulate(g, self, 0, go);
                             Tensor dd(go.shape());
                             for (std::size_t i = 0; i < go.size(); ++i) dd[i] = go[i] * mask[i];
                             accumulate(g, self, 1, dd);
                           });
}

Var add_bias(Var a, Var bias) {
  if (a.shape().empty() || bias.shape().size() != 1 || a.shape().back() != bias.shape()[0]) {
    throw ShapeError("add_bias: shapes " + shape_string(a.shape()) + " and " +
                     shape_string(bias.shape()) + " are incompatible");
  }
  const std::size_t width = bias.shape()[0];
  const std::size_t rows = a.value().size() / width;
  Tensor out(a.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < width; ++j)
      out[r * width + j] = a.value()[r * width + j] + bias.value()[j];
  return a.graph().emit(OpTag::kAddBias, std::move(out), {a, bias},
                        [rows, width](Graph& g, std::size_t self) {
                          const Tensor& go = g.grad_of(self);
                          accumulate(g, self, 0, go);
                          Tensor db({width});
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t j = 0; j < width; ++j) db[j] += go[r * width + j];
                          accumulate(g, self, 1, db);
                        });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.graph().emit(OpTag::kReshape, std::move(out), {a}, [](Graph& g, std::size_t self) {
    const Tensor& go = g.grad_of(self);
    accumulate(g, self, 0, go.reshaped(g.value_of(g.parent(self, 0)).shape()));
  });
}

Var detach(Var a) {
  return a.graph().emit(OpTag::kDetach, a.value(), {}, nullptr);
}

}  // namespace tpfl::ad
