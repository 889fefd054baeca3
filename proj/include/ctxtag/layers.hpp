#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxtag/ops.hpp"
#include "ctxtag/rng.hpp"
#include "ctxtag/tensor.hpp"

namespace ctxtag {

using TokenId = std::uint32_t;
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;

using NamedTensors = std::map<std::string, Tensor>;

// Uniform in +-sqrt(6 / (fan_in + fan_out)), shape (fan_in x fan_out).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Frozen pretrained table concatenated with an optional trainable table.
/// Row kPadId of both tables is zero.
struct EmbeddingLayer {
  Tensor pretrained;              // V x d_p, never requires grad
  std::optional<Tensor> learned;  // V x d_l

  static EmbeddingLayer create(const Tensor& pretrained, std::size_t learned_dim, Rng& rng);

  std::size_t vocab_size() const { return pretrained.dim(0); }
  std::size_t width() const;
  // Re-zeroes the PAD row of the learned table after an optimizer step.
  void reset_pad_row();
  void register_into(NamedTensors& out, const std::string& prefix) const;
};

// (T x width); gradient reaches only the learned table.
Tensor embed_lookup(const EmbeddingLayer& layer, std::span<const TokenId> ids);

/// GRU cell in row-vector form: gate = act(x W + h U + b).
struct GruCell {
  Tensor w_z, u_z, b_z;
  Tensor w_r, u_r, b_r;
  Tensor w_h, u_h, b_h;

  static GruCell create(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

  std::size_t input_dim() const { return w_z.dim(0); }
  std::size_t hidden_dim() const { return w_z.dim(1); }
  void register_into(NamedTensors& out, const std::string& prefix) const;
};

// z = s(xW_z + hU_z + b_z), r = s(xW_r + hU_r + b_r),
// c = tanh(xW_h + (r*h)U_h + b_h), h' = (1 - z)*h + z*c
Tensor gru_step(const GruCell& cell, const Tensor& x, const Tensor& h_prev);

// Runs the cell over the rows of `inputs` (T x d) from h_0 = 0. At masked
// positions the state is carried unchanged and the emitted row is zero.
// With `reverse`, reading starts at row T-1; row t of the output is still
// the state at position t.
Tensor gru_sequence(const GruCell& cell, const Tensor& inputs, const Mask& mask, bool reverse);

// Row t = [forward state at t, backward state at t], shape (T x 2H).
Tensor bigru(const GruCell& forward, const GruCell& backward, const Tensor& inputs, const Mask& mask);

/// Additive attention with a learned context vector.
struct AttentionPool {
  Tensor w;  // input_dim x a
  Tensor b;  // a
  Tensor u;  // a

  static AttentionPool create(std::size_t input_dim, std::size_t attention_dim, Rng& rng);
  void register_into(NamedTensors& out, const std::string& prefix) const;
};

struct AttentionOutput {
  Tensor pooled;   // input_dim
  Tensor weights;  // T
};

// u_t = tanh(W h_t + b); alpha = masked softmax(u_t . u); s = sum_t alpha_t h_t
AttentionOutput attention_pool(const AttentionPool& att, const Tensor& hidden, const Mask& mask);

struct DenseHead {
  Tensor w;  // in x out
  Tensor b;  // out

  static DenseHead create(std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_dim() const { return w.dim(0); }
  std::size_t out_dim() const { return w.dim(1); }
  void register_into(NamedTensors& out, const std::string& prefix) const;
};

// sigmoid(x W + b) for a vector x (in) or a batch of rows (n x in).
Tensor dense_sigmoid(const DenseHead& head, const Tensor& x);

// [row i of h_e, h_c]
Tensor share_slice(const Tensor& h_e, std::size_t i, const Tensor& h_c);

}  // namespace ctxtag
