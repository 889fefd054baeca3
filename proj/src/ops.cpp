#include "ctxtag/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "ctxtag/error.hpp"

namespace ctxtag {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

bool tracks_grad(std::span<const Tensor> inputs) {
  if (!grad_mode_enabled()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
}

// Wraps forward output into a tensor; records parents and the backward rule
// only when some input requires grad.
template <typename Backward>
Tensor make_result(Shape shape, std::vector<double> data, std::span<const Tensor> inputs,
                   Backward&& backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  if (tracks_grad(inputs)) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const Tensor& t : inputs) node->parents.push_back(t.node());
    node->backward = std::forward<Backward>(backward);
  }
  return Tensor(std::move(node));
}

// Accumulation target for parent `i`, or null when it does not need grad.
std::vector<double>* grad_target(Node& self, std::size_t i) {
  Node& parent = *self.parents[i];
  if (!parent.requires_grad) return nullptr;
  parent.ensure_grad();
  return &parent.grad;
}

// Maps a flat output index onto the flat index of a broadcast operand.
class BroadcastMap {
 public:
  BroadcastMap(const Shape& src, const Shape& out) {
    const std::size_t n = shape_numel(src);
    if (src == out) {
      kind_ = Kind::identity;
    } else if (n == 1) {
      kind_ = Kind::scalar;
    } else if (std::equal(src.rbegin(), src.rend(), out.rbegin())) {
      kind_ = Kind::suffix;
      modulus_ = n;
    } else {
      kind_ = Kind::general;
      const std::size_t offset = out.size() - src.size();
      std::vector<std::size_t> stride(out.size(), 0);
      std::size_t s = 1;
      for (std::size_t i = src.size(); i-- > 0;) {
        stride[i + offset] = src[i] == 1 ? 0 : s;
        s *= src[i];
      }
      const std::size_t total = shape_numel(out);
      index_.resize(total);
      std::vector<std::size_t> pos(out.size(), 0);
      std::size_t src_index = 0;
      for (std::size_t flat = 0; flat < total; ++flat) {
        index_[flat] = src_index;
        for (std::size_t d = out.size(); d-- > 0;) {
          ++pos[d];
          src_index += stride[d];
          if (pos[d] < out[d]) break;
          src_index -= stride[d] * pos[d];
          pos[d] = 0;
        }
      }
    }
  }

  std::size_t operator()(std::size_t i) const {
    switch (kind_) {
      case Kind::identity: return i;
      case Kind::scalar: return 0;
      case Kind::suffix: return i % modulus_;
      case Kind::general: return index_[i];
    }
    return 0;
  }

 private:
  enum class Kind { identity, scalar, suffix, general };
  Kind kind_ = Kind::identity;
  std::size_t modulus_ = 1;
  std::vector<std::size_t> index_;
};

enum class BinaryKind { add, sub, mul };

Tensor binary(BinaryKind kind, const Tensor& a, const Tensor& b) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const std::size_t n = shape_numel(out_shape);
  BroadcastMap map_a(a.shape(), out_shape);
  BroadcastMap map_b(b.shape(), out_shape);
  const auto da = a.data();
  const auto db = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = da[map_a(i)];
    const double y = db[map_b(i)];
    switch (kind) {
      case BinaryKind::add: out[i] = x + y; break;
      case BinaryKind::sub: out[i] = x - y; break;
      case BinaryKind::mul: out[i] = x * y; break;
    }
  }
  const Tensor inputs[] = {a, b};
  return make_result(out_shape, std::move(out), inputs,
                     [kind, map_a = std::move(map_a), map_b = std::move(map_b)](Node& self) {
                       const Node& pa = *self.parents[0];
                       const Node& pb = *self.parents[1];
                       auto* ga = grad_target(self, 0);
                       auto* gb = grad_target(self, 1);
                       const std::size_t count = self.grad.size();
                       for (std::size_t i = 0; i < count; ++i) {
                         const double g = self.grad[i];
                         const std::size_t ia = map_a(i);
                         const std::size_t ib = map_b(i);
                         switch (kind) {
                           case BinaryKind::add:
                             if (ga) (*ga)[ia] += g;
                             if (gb) (*gb)[ib] += g;
                             break;
                           case BinaryKind::sub:
                             if (ga) (*ga)[ia] += g;
                             if (gb) (*gb)[ib] -= g;
                             break;
                           case BinaryKind::mul:
                             if (ga) (*ga)[ia] += g * pb.data[ib];
                             if (gb) (*gb)[ib] += g * pa.data[ia];
                             break;
                         }
                       }
                     });
}

// Unary op where the local derivative is a function of input and output.
template <typename Forward, typename Derivative>
Tensor unary(const Tensor& a, Forward forward, Derivative derivative) {
  const auto src = a.data();
  std::vector<double> out(src.size());
  std::transform(src.begin(), src.end(), out.begin(), forward);
  const Tensor inputs[] = {a};
  return make_result(a.shape(), std::move(out), inputs, [derivative](Node& self) {
    auto* ga = grad_target(self, 0);
    if (!ga) return;
    const Node& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      (*ga)[i] += self.grad[i] * derivative(pa.data[i], self.data[i]);
    }
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Splits a shape around `axis` into outer * extent * inner.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " invalid for shape " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < a.size() ? a[a.size() - 1 - i] : 1;
    const std::size_t db = i < b.size() ? b[b.size() - 1 - i] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("shapes " + shape_str(a) + " and " + shape_str(b) + " are not broadcastable");
    }
    out[rank - 1 - i] = std::max(da, db);
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(BinaryKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(BinaryKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(BinaryKind::mul, a, b); }

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor one_minus(const Tensor& a) {
  return unary(
      a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Tensor log(const Tensor& a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 1 || a.rank() > 2 || b.rank() < 1 || b.rank() > 2) {
    throw ShapeError("matmul expects rank-1 or rank-2 operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const bool a_vec = a.rank() == 1;
  const bool b_vec = b.rank() == 1;
  const std::size_t m = a_vec ? 1 : a.dim(0);
  const std::size_t k = a_vec ? a.dim(0) : a.dim(1);
  const std::size_t kb = b.dim(0);
  const std::size_t n = b_vec ? 1 : b.dim(1);
  if (k != kb) {
    throw ShapeError("matmul inner dimensions differ: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  Shape out_shape;
  if (!a_vec) out_shape.push_back(m);
  if (!b_vec) out_shape.push_back(n);

  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> C(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = C.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  const Tensor inputs[] = {a, b};
  return make_result(std::move(out_shape), std::move(C), inputs, [m, k, n](Node& self) {
    const Node& pa = *self.parents[0];
    const Node& pb = *self.parents[1];
    const std::vector<double>& dC = self.grad;
    if (auto* ga = grad_target(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += dC[i * n + j] * pb.data[p * n + j];
          (*ga)[i * k + p] += acc;
        }
      }
    }
    if (auto* gb = grad_target(self, 1)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = pa.data[i * k + p];
          for (std::size_t j = 0; j < n; ++j) (*gb)[p * n + j] += av * dC[i * n + j];
        }
      }
    }
  });
}

Tensor softmax(const Tensor& x, std::size_t axis, const Mask* mask) {
  const AxisSplit s = split_axis(x.shape(), axis);
  if (mask && mask->size() != s.extent) {
    throw ShapeError("softmax mask length " + std::to_string(mask->size()) + " does not match extent " +
                     std::to_string(s.extent) + " of axis " + std::to_string(axis));
  }
  if (mask && std::none_of(mask->begin(), mask->end(), [](bool m) { return m; })) {
    throw ShapeError("softmax over a fully masked slice");
  }
  auto live = [mask](std::size_t t) { return !mask || (*mask)[t]; };

  const auto src = x.data();
  std::vector<double> out(src.size(), 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      auto idx = [&](std::size_t t) { return (o * s.extent + t) * s.inner + in; };
      double peak = -INFINITY;
      for (std::size_t t = 0; t < s.extent; ++t) {
        if (live(t)) peak = std::max(peak, src[idx(t)]);
      }
      double total = 0.0;
      for (std::size_t t = 0; t < s.extent; ++t) {
        if (!live(t)) continue;
        out[idx(t)] = std::exp(src[idx(t)] - peak);
        total += out[idx(t)];
      }
      for (std::size_t t = 0; t < s.extent; ++t) {
        if (live(t)) out[idx(t)] /= total;
      }
    }
  }
  const Tensor inputs[] = {x};
  return make_result(x.shape(), std::move(out), inputs, [s](Node& self) {
    auto* gx = grad_target(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        auto idx = [&](std::size_t t) { return (o * s.extent + t) * s.inner + in; };
        double dot = 0.0;
        for (std::size_t t = 0; t < s.extent; ++t) dot += self.data[idx(t)] * self.grad[idx(t)];
        for (std::size_t t = 0; t < s.extent; ++t) {
          (*gx)[idx(t)] += self.data[idx(t)] * (self.grad[idx(t)] - dot);
        }
      }
    }
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  std::vector<std::size_t> extents;
  extents.reserve(parts.size());
  std::size_t total_extent = 0;
  for (const Tensor& t : parts) {
    const Shape& sh = t.shape();
    bool ok = sh.size() == first.size() && axis < sh.size();
    for (std::size_t d = 0; ok && d < sh.size(); ++d) {
      if (d != axis && sh[d] != first[d]) ok = false;
    }
    if (!ok) {
      throw ShapeError("concat along axis " + std::to_string(axis) + ": shape " + shape_str(sh) +
                       " incompatible with " + shape_str(first));
    }
    extents.push_back(sh[axis]);
    total_extent += sh[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total_extent;
  const AxisSplit s = split_axis(out_shape, axis);

  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto src = parts[p].data();
    const std::size_t block = extents[p] * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(src.begin() + o * block, block, out.begin() + (o * total_extent + offset) * s.inner);
    }
    offset += extents[p];
  }
  return make_result(std::move(out_shape), std::move(out), parts,
                     [s, total_extent, extents = std::move(extents)](Node& self) {
                       std::size_t offset = 0;
                       for (std::size_t p = 0; p < extents.size(); ++p) {
                         const std::size_t block = extents[p] * s.inner;
                         if (auto* g = grad_target(self, p)) {
                           for (std::size_t o = 0; o < s.outer; ++o) {
                             const double* src = self.grad.data() + (o * total_extent + offset) * s.inner;
                             double* dst = g->data() + o * block;
                             for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                           }
                         }
                         offset += extents[p];
                       }
                     });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw ShapeError("stack_rows of zero tensors");
  const std::size_t width = rows.front().numel();
  for (const Tensor& r : rows) {
    if (r.rank() != 1 || r.numel() != width) {
      throw ShapeError("stack_rows expects rank-1 tensors of length " + std::to_string(width) + ", got " +
                       shape_str(r.shape()));
    }
  }
  std::vector<double> out(rows.size() * width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].data().begin(), rows[i].data().end(), out.begin() + i * width);
  }
  return make_result(Shape{rows.size(), width}, std::move(out), rows, [width](Node& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      if (auto* g = grad_target(self, i)) {
        for (std::size_t j = 0; j < width; ++j) (*g)[j] += self.grad[i * width + j];
      }
    }
  });
}

Tensor gather_rows(const Tensor& t, std::size_t index) {
  if (t.rank() != 1 && t.rank() != 2) {
    throw ShapeError("gather_rows expects rank 1 or 2, got " + shape_str(t.shape()));
  }
  if (index >= t.dim(0)) {
    throw ShapeError("row index " + std::to_string(index) + " out of bounds for shape " + shape_str(t.shape()));
  }
  const std::size_t width = t.rank() == 2 ? t.dim(1) : 1;
  const auto src = t.data();
  std::vector<double> out(src.begin() + index * width, src.begin() + (index + 1) * width);
  Shape out_shape = t.rank() == 2 ? Shape{width} : Shape{};
  const Tensor inputs[] = {t};
  return make_result(std::move(out_shape), std::move(out), inputs, [index, width](Node& self) {
    if (auto* g = grad_target(self, 0)) {
      for (std::size_t j = 0; j < width; ++j) (*g)[index * width + j] += self.grad[j];
    }
  });
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> indices) {
  if (t.rank() != 2) throw ShapeError("gather_rows with an index list expects a matrix, got " + shape_str(t.shape()));
  if (indices.empty()) throw ShapeError("gather_rows with an empty index list");
  const std::size_t rows = t.dim(0);
  const std::size_t width = t.dim(1);
  const auto src = t.data();
  std::vector<double> out(indices.size() * width);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) {
      throw ShapeError("row index " + std::to_string(indices[i]) + " out of bounds for shape " +
                       shape_str(t.shape()));
    }
    std::copy_n(src.begin() + indices[i] * width, width, out.begin() + i * width);
  }
  const Tensor inputs[] = {t};
  return make_result(Shape{indices.size(), width}, std::move(out), inputs,
                     [idx = std::vector<std::size_t>(indices.begin(), indices.end()), width](Node& self) {
                       if (auto* g = grad_target(self, 0)) {
                         for (std::size_t i = 0; i < idx.size(); ++i) {
                           for (std::size_t j = 0; j < width; ++j) (*g)[idx[i] * width + j] += self.grad[i * width + j];
                         }
                       }
                     });
}

Tensor reshape(const Tensor& t, Shape shape) {
  if (shape_numel(shape) != t.numel()) {
    throw ShapeError("cannot reshape " + shape_str(t.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(t.data().begin(), t.data().end());
  const Tensor inputs[] = {t};
  return make_result(std::move(shape), std::move(out), inputs, [](Node& self) {
    if (auto* g = grad_target(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor sum(const Tensor& t) {
  const auto src = t.data();
  const double total = std::accumulate(src.begin(), src.end(), 0.0);
  const Tensor inputs[] = {t};
  return make_result(Shape{}, std::vector<double>{total}, inputs, [](Node& self) {
    if (auto* g = grad_target(self, 0)) {
      for (double& v : *g) v += self.grad[0];
    }
  });
}

Tensor sum(const Tensor& t, std::size_t axis) {
  const AxisSplit s = split_axis(t.shape(), axis);
  Shape out_shape = t.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  const auto src = t.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      for (std::size_t in = 0; in < s.inner; ++in) out[o * s.inner + in] += src[(o * s.extent + e) * s.inner + in];
    }
  }
  const Tensor inputs[] = {t};
  return make_result(std::move(out_shape), std::move(out), inputs, [s](Node& self) {
    if (auto* g = grad_target(self, 0)) {
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t e = 0; e < s.extent; ++e) {
          for (std::size_t in = 0; in < s.inner; ++in) (*g)[(o * s.extent + e) * s.inner + in] += self.grad[o * s.inner + in];
        }
      }
    }
  });
}

Tensor mean(const Tensor& t) { return scale(sum(t), 1.0 / static_cast<double>(t.numel())); }

Tensor mean(const Tensor& t, std::size_t axis) {
  const std::size_t extent = split_axis(t.shape(), axis).extent;
  return scale(sum(t, axis), 1.0 / static_cast<double>(extent));
}

}  // namespace ctxtag
