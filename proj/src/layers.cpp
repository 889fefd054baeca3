#include "ctxtag/layers.hpp"

#include <cmath>

#include "ctxtag/error.hpp"

namespace ctxtag {

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> values(fan_in * fan_out);
  for (double& v : values) v = rng.uniform(-limit, limit);
  return Tensor::matrix(fan_in, fan_out, std::move(values), true);
}

// ---------------------------------------------------------------------------
// Embeddings

EmbeddingLayer EmbeddingLayer::create(const Tensor& pretrained, std::size_t learned_dim, Rng& rng) {
  if (pretrained.rank() != 2) throw ShapeError("pretrained table must be a matrix");
  if (pretrained.requires_grad()) throw ShapeError("pretrained table must be frozen");
  EmbeddingLayer layer{pretrained, std::nullopt};
  if (learned_dim > 0) {
    const std::size_t vocab = pretrained.dim(0);
    std::vector<double> values(vocab * learned_dim);
    for (double& v : values) v = rng.uniform(-0.05, 0.05);
    layer.learned = Tensor::matrix(vocab, learned_dim, std::move(values), true);
    layer.reset_pad_row();
  }
  return layer;
}

std::size_t EmbeddingLayer::width() const {
  return pretrained.dim(1) + (learned ? learned->dim(1) : 0);
}

void EmbeddingLayer::reset_pad_row() {
  if (!learned) return;
  auto values = learned->mutable_data();
  const std::size_t width = learned->dim(1);
  std::fill_n(values.begin() + kPadId * width, width, 0.0);
}

void EmbeddingLayer::register_into(NamedTensors& out, const std::string& prefix) const {
  if (learned) out.emplace(prefix + "learned", *learned);
}

Tensor embed_lookup(const EmbeddingLayer& layer, std::span<const TokenId> ids) {
  if (ids.empty()) throw ShapeError("embed_lookup of an empty id sequence");
  const std::size_t vocab = layer.vocab_size();
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) {
      throw ShapeError("token id " + std::to_string(ids[i]) + " outside vocabulary of size " +
                       std::to_string(vocab));
    }
    rows[i] = ids[i];
  }
  Tensor fixed = gather_rows(layer.pretrained, rows);
  if (!layer.learned) return fixed;
  return concat({fixed, gather_rows(*layer.learned, rows)}, 1);
}

// ---------------------------------------------------------------------------
// GRU

GruCell GruCell::create(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  auto bias = [hidden_dim] { return Tensor::zeros({hidden_dim}, true); };
  GruCell c;
  c.w_z = glorot_uniform(input_dim, hidden_dim, rng);
  c.u_z = glorot_uniform(hidden_dim, hidden_dim, rng);
  c.b_z = bias();
  c.w_r = glorot_uniform(input_dim, hidden_dim, rng);
  c.u_r = glorot_uniform(hidden_dim, hidden_dim, rng);
  c.b_r = bias();
  c.w_h = glorot_uniform(input_dim, hidden_dim, rng);
  c.u_h = glorot_uniform(hidden_dim, hidden_dim, rng);
  c.b_h = bias();
  return c;
}

void GruCell::register_into(NamedTensors& out, const std::string& prefix) const {
  out.emplace(prefix + "w_z", w_z);
  out.emplace(prefix + "u_z", u_z);
  out.emplace(prefix + "b_z", b_z);
  out.emplace(prefix + "w_r", w_r);
  out.emplace(prefix + "u_r", u_r);
  out.emplace(prefix + "b_r", b_r);
  out.emplace(prefix + "w_h", w_h);
  out.emplace(prefix + "u_h", u_h);
  out.emplace(prefix + "b_h", b_h);
}

namespace {

// Shared by gru_step and gru_sequence so both evaluate identically; the x
// projections already include their biases.
Tensor step_from_projections(const GruCell& cell, const Tensor& xz, const Tensor& xr, const Tensor& xh,
                             const Tensor& h_prev) {
  const Tensor z = sigmoid(xz + matmul(h_prev, cell.u_z));
  const Tensor r = sigmoid(xr + matmul(h_prev, cell.u_r));
  const Tensor candidate = tanh(xh + matmul(r * h_prev, cell.u_h));
  return one_minus(z) * h_prev + z * candidate;
}

}  // namespace

Tensor gru_step(const GruCell& cell, const Tensor& x, const Tensor& h_prev) {
  if (x.rank() != 1 || x.numel() != cell.input_dim()) {
    throw ShapeError("gru_step input " + shape_str(x.shape()) + " does not match input_dim " +
                     std::to_string(cell.input_dim()));
  }
  if (h_prev.rank() != 1 || h_prev.numel() != cell.hidden_dim()) {
    throw ShapeError("gru_step state " + shape_str(h_prev.shape()) + " does not match hidden_dim " +
                     std::to_string(cell.hidden_dim()));
  }
  return step_from_projections(cell, matmul(x, cell.w_z) + cell.b_z, matmul(x, cell.w_r) + cell.b_r,
                               matmul(x, cell.w_h) + cell.b_h, h_prev);
}

Tensor gru_sequence(const GruCell& cell, const Tensor& inputs, const Mask& mask, bool reverse) {
  if (inputs.rank() != 2 || inputs.dim(1) != cell.input_dim()) {
    throw ShapeError("gru_sequence inputs " + shape_str(inputs.shape()) + " do not match input_dim " +
                     std::to_string(cell.input_dim()));
  }
  const std::size_t steps = inputs.dim(0);
  if (mask.size() != steps) {
    throw ShapeError("gru_sequence mask length " + std::to_string(mask.size()) + " differs from " +
                     std::to_string(steps) + " input rows");
  }
  const std::size_t hidden = cell.hidden_dim();
  const Tensor zeros = Tensor::zeros({hidden});
  std::vector<Tensor> rows(steps, zeros);

  std::vector<std::size_t> live;
  for (std::size_t t = 0; t < steps; ++t) {
    if (mask[t]) live.push_back(t);
  }
  if (live.empty()) return stack_rows(rows);

  // Input projections for the real rows only, one matmul per gate.
  const Tensor real = live.size() == steps ? inputs : gather_rows(inputs, live);
  const Tensor pz = matmul(real, cell.w_z) + cell.b_z;
  const Tensor pr = matmul(real, cell.w_r) + cell.b_r;
  const Tensor ph = matmul(real, cell.w_h) + cell.b_h;

  Tensor h = zeros;
  for (std::size_t k = 0; k < live.size(); ++k) {
    const std::size_t j = reverse ? live.size() - 1 - k : k;
    h = step_from_projections(cell, gather_rows(pz, j), gather_rows(pr, j), gather_rows(ph, j), h);
    rows[live[j]] = h;
  }
  return stack_rows(rows);
}

Tensor bigru(const GruCell& forward, const GruCell& backward, const Tensor& inputs, const Mask& mask) {
  if (forward.input_dim() != backward.input_dim() || forward.hidden_dim() != backward.hidden_dim()) {
    throw ShapeError("bigru cells disagree on dimensions");
  }
  return concat({gru_sequence(forward, inputs, mask, false), gru_sequence(backward, inputs, mask, true)}, 1);
}

// ---------------------------------------------------------------------------
// Attention

AttentionPool AttentionPool::create(std::size_t input_dim, std::size_t attention_dim, Rng& rng) {
  if (attention_dim == 0) throw ShapeError("attention dimension must be positive");
  AttentionPool att;
  att.w = glorot_uniform(input_dim, attention_dim, rng);
  att.b = Tensor::zeros({attention_dim}, true);
  att.u = reshape(glorot_uniform(attention_dim, 1, rng), {attention_dim}).detach().set_requires_grad(true);
  return att;
}

void AttentionPool::register_into(NamedTensors& out, const std::string& prefix) const {
  out.emplace(prefix + "w", w);
  out.emplace(prefix + "b", b);
  out.emplace(prefix + "u", u);
}

AttentionOutput attention_pool(const AttentionPool& att, const Tensor& hidden, const Mask& mask) {
  if (hidden.rank() != 2 || hidden.dim(1) != att.w.dim(0)) {
    throw ShapeError("attention input " + shape_str(hidden.shape()) + " does not match width " +
                     std::to_string(att.w.dim(0)));
  }
  if (mask.size() != hidden.dim(0)) throw ShapeError("attention mask length differs from sequence length");
  const Tensor projected = tanh(matmul(hidden, att.w) + att.b);
  const Tensor logits = matmul(projected, att.u);
  Tensor weights = softmax(logits, 0, &mask);
  Tensor pooled = matmul(weights, hidden);
  return {std::move(pooled), std::move(weights)};
}

// ---------------------------------------------------------------------------
// Heads

DenseHead DenseHead::create(std::size_t in, std::size_t out, Rng& rng) {
  return DenseHead{glorot_uniform(in, out, rng), Tensor::zeros({out}, true)};
}

void DenseHead::register_into(NamedTensors& out, const std::string& prefix) const {
  out.emplace(prefix + "w", w);
  out.emplace(prefix + "b", b);
}

Tensor dense_sigmoid(const DenseHead& head, const Tensor& x) {
  const std::size_t width = x.rank() == 2 ? x.dim(1) : x.numel();
  if ((x.rank() != 1 && x.rank() != 2) || width != head.in_dim()) {
    throw ShapeError("dense head expects width " + std::to_string(head.in_dim()) + ", got " +
                     shape_str(x.shape()));
  }
  return sigmoid(matmul(x, head.w) + head.b);
}

Tensor share_slice(const Tensor& h_e, std::size_t i, const Tensor& h_c) {
  if (h_e.rank() != 2) throw ShapeError("share_slice expects a matrix of sentence encodings");
  if (i >= h_e.dim(0)) {
    throw ShapeError("sentence index " + std::to_string(i) + " out of range for " +
                     std::to_string(h_e.dim(0)) + " sentences");
  }
  return concat({gather_rows(h_e, i), h_c}, 0);
}

}  // namespace ctxtag
