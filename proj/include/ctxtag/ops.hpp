#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ctxtag/tensor.hpp"

namespace ctxtag {

using Mask = std::vector<bool>;

// Elementwise. Binary ops broadcast over trailing dimensions (numpy rules).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor one_minus(const Tensor& a);
Tensor log(const Tensor& a);
// Subgradient 0 at the kink.
Tensor abs(const Tensor& a);
// Gradient passes where lo <= x <= hi, zero outside.
Tensor clamp(const Tensor& a, double lo, double hi);

Shape broadcast_shape(const Shape& a, const Shape& b);

// (m x k)(k x n) -> (m x n). A rank-1 left operand is a row vector and a
// rank-1 right operand a column vector; the corresponding output dim is dropped.
Tensor matmul(const Tensor& a, const Tensor& b);

// Softmax along `axis`. When a mask is given its length equals the extent of
// `axis`; masked positions come out exactly zero and every slice needs at
// least one unmasked position.
Tensor softmax(const Tensor& x, std::size_t axis, const Mask* mask = nullptr);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
// Stacks equal-shape rank-1 tensors into an (n x len) matrix.
Tensor stack_rows(std::span<const Tensor> rows);
// Row `index` of a matrix as a rank-1 tensor; row i of a vector is a scalar.
Tensor gather_rows(const Tensor& t, std::size_t index);
// Rows `indices` of a matrix as an (n x cols) matrix. Repeated indices
// accumulate gradient.
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> indices);
Tensor reshape(const Tensor& t, Shape shape);

Tensor sum(const Tensor& t);
Tensor sum(const Tensor& t, std::size_t axis);
Tensor mean(const Tensor& t);
Tensor mean(const Tensor& t, std::size_t axis);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace ctxtag
