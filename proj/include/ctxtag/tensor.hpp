#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ctxtag {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the reverse-mode graph. Leaves have no parents and no
// backward rule; op results hold their inputs and a rule that reads
// `grad` and accumulates into the parents' grads.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  std::uint64_t visit_mark = 0;  // traversal stamp for topological sorts

  void ensure_grad();
};

}  // namespace detail

/// Dense row-major float64 tensor with value-handle semantics.
///
/// Copies of a Tensor share the same node, so a parameter held by a layer and
/// the handle captured in a graph refer to one buffer. Operations always
/// allocate fresh outputs; nothing aliases a slice of another tensor.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Direct write access, used by optimizers and finite-difference probes.
  // Mutating a tensor that is already part of a live graph invalidates it.
  std::span<double> mutable_data();

  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Seeds d(this)/d(this) = 1 and propagates to every reachable tensor that
  // requires grad. Leaf grads accumulate across calls; intermediate grads are
  // reset at the start of each call.
  void backward() const;

  // Fresh leaf with a copy of the data and no history.
  Tensor detach() const;

  bool is_leaf() const;
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Internal: used by op implementations.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Topologically ordered view of the graph reachable from a root.
class Graph {
 public:
  static Graph from(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  std::span<const Tensor> nodes() const { return nodes_; }
  // True when every node appears after all of its inputs.
  bool is_topologically_ordered() const;

 private:
  std::vector<Tensor> nodes_;
};

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

}  // namespace ctxtag
