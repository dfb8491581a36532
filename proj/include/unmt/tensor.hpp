#pragma once

// Minimal reverse-mode automatic differentiation.
//
// A Graph is a tape of nodes created in topological order; each node owns
// its value (or borrows a Parameter's storage) and, while recording, a
// closure that pushes its gradient to its parents. Graphs are meant to live
// for one mini-batch: build, call backward() once, drop.
//
// Row-major layout throughout. Weight matrices use the row-vector
// convention: a layer computes x * W with W shaped [in x out].

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "unmt/errors.hpp"

namespace unmt {

using Shape = std::vector<std::size_t>;
using Rng = std::mt19937_64;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until a backward pass reaches this parameter
  bool trainable = true;

  Parameter(std::string n, Shape s, bool is_trainable = true)
      : name(std::move(n)), shape(std::move(s)), value(numel(shape)), trainable(is_trainable) {}

  std::size_t size() const { return value.size(); }
  bool has_grad() const { return !grad.empty(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
class Graph;

// Handle to a node in a Graph. Cheap to copy; valid while its graph lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr; }
  Graph<T>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }

  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t size() const;
  std::span<const T> value() const;
  // Empty when no gradient reached this node.
  std::span<const T> grad() const;
  T item() const;

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  // A graph built with record_gradients=false stores no backward closures;
  // use it for inference.
  explicit Graph(bool record_gradients = true) : recording_(record_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  Var<T> constant(Shape shape, std::vector<T> values);
  // Leaf that accumulates a gradient readable through Var::grad().
  Var<T> input(Shape shape, std::vector<T> values);
  // Leaf aliasing a parameter's storage. Gradients accumulate straight into
  // Parameter::grad, and only when the parameter is trainable.
  Var<T> parameter(Parameter<T>& p);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse
  // creation order. loss must hold exactly one element.
  void backward(Var<T> loss);

  // Interface for operation implementations.
  Var<T> record(Shape shape, std::vector<T> value, std::initializer_list<Var<T>> parents,
                BackwardFn fn);
  Var<T> record(Shape shape, std::vector<T> value, std::span<const Var<T>> parents, BackwardFn fn);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::span<T> grad_buffer(std::size_t id);
  std::span<const T> grad_of(std::size_t id) const;
  std::span<const T> value_of(std::size_t id) const;
  const Shape& shape_of(std::size_t id) const { return nodes_[id].shape; }

 private:
  struct Node {
    Shape shape;
    std::vector<T> owned;
    Parameter<T>* param = nullptr;
    std::vector<T> grad;
    bool needs_grad = false;
    BackwardFn backward;
  };

  Var<T> push(Node node);

  bool recording_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> param_nodes_;
};

template <typename T>
const Shape& Var<T>::shape() const {
  return graph_->shape_of(id_);
}
template <typename T>
std::size_t Var<T>::size() const {
  return numel(shape());
}
template <typename T>
std::span<const T> Var<T>::value() const {
  return graph_->value_of(id_);
}
template <typename T>
std::span<const T> Var<T>::grad() const {
  return graph_->grad_of(id_);
}
template <typename T>
T Var<T>::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return value()[0];
}

// ---------------------------------------------------------------------------
// Operations. Shapes are checked eagerly; violations throw DimensionError.

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);
template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> sub(Var<T> a, Var<T> b);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
// scale * x + shift, elementwise.
template <typename T>
Var<T> affine(Var<T> x, T scale, T shift);
// x[m x n] + bias[n] broadcast over rows.
template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias);
template <typename T>
Var<T> tanh(Var<T> x);
template <typename T>
Var<T> sigmoid(Var<T> x);
template <typename T>
Var<T> sum(Var<T> x);

// Concatenation of [m x n_i] blocks along the feature axis.
template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts);
// Concatenation of [m_i x n] blocks along the first axis.
template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts);
// Selects slices of the first axis; repeats allowed. Used both for embedding
// lookup and for reordering beam states.
template <typename T>
Var<T> gather_rows(Var<T> table, std::span<const int> ids);
template <typename T>
Var<T> reshape(Var<T> x, Shape shape);
// Row i comes from a where keep[i] is set, from b otherwise.
template <typename T>
Var<T> blend_rows(Var<T> a, Var<T> b, std::span<const std::uint8_t> keep);

// Inverted dropout: each element survives with probability 1-p and is scaled
// by 1/(1-p). A null rng (evaluation mode) or p == 0 makes this the identity.
template <typename T>
Var<T> dropout(Var<T> x, double p, Rng* rng);

template <typename T>
Var<T> softmax_rows(Var<T> x);
// Softmax over the entries of each row whose mask is set; the rest get
// exactly zero weight. A row with no valid entry is a ContractError.
template <typename T>
Var<T> masked_softmax_rows(Var<T> x, std::span<const std::uint8_t> mask);
// Mean of -log softmax(logits)[target] over rows whose mask is set.
template <typename T>
Var<T> cross_entropy_from_logits(Var<T> logits, std::span<const int> targets,
                                 std::span<const std::uint8_t> mask);

// Sequence helpers over [batch x steps x features] tensors.
template <typename T>
Var<T> stack_steps(std::span<const Var<T>> steps);
template <typename T>
Var<T> batched_dot(Var<T> query, Var<T> keys);
template <typename T>
Var<T> weighted_sum(Var<T> weights, Var<T> values);
template <typename T>
Var<T> masked_mean_steps(Var<T> values, std::span<const std::uint8_t> mask);

// Numerically stable log-softmax of a plain row (no graph involvement).
template <typename T>
void log_softmax_inplace(std::span<T> row);

}  // namespace unmt
