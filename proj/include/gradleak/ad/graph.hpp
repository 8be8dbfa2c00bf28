#pragma once

// Eager reverse-mode differentiation over dense tensors.
//
// Every op computes its value when it is created and records how to produce
// its adjoint. Backward rules are themselves expressed with graph ops, so the
// result of `grad()` is again a set of graph nodes that can be differentiated.
// That is how the gradient-matching loss gets its input gradient: the
// parameter gradient is built as part of the graph, compared against the
// leaked gradient, and `grad()` is called a second time on the comparison.
//
// A Graph is single-threaded. Use one graph per worker.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <vector>

#include "gradleak/tensor.hpp"

namespace gradleak::ad {

class Graph;

// Handle to a node in a graph.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

enum class Op : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kAffine,           // scale * x + shift
  kMatMul,
  kBroadcastRows,    // (c) -> (r x c)
  kSumRows,          // (r x c) -> (c)
  kRowSumBroadcast,  // each entry replaced by its row sum
  kSum,              // -> (1)
  kFill,             // (1) -> shape
  kSigmoid,
  kExp,
  kLogSoftmax,       // over the last axis
  kSqrt,
  kGather,           // out[i] = x[index[i]], or 0 for index -1
  kScatterAdd,       // out[index[i]] += x[i]
  kReshape,
};

using IndexMap = std::shared_ptr<const std::vector<std::int64_t>>;

struct ComputationNode {
  Op op = Op::kLeaf;
  std::size_t parents[2] = {0, 0};
  std::uint8_t num_parents = 0;
  Tensor value;
  double scale = 1.0;
  double shift = 0.0;
  bool trans_a = false;
  bool trans_b = false;
  IndexMap index;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var variable(Tensor value);
  Var constant(Tensor value);

  const ComputationNode& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  // Gradients of scalar `output` with respect to each of `wrt`. The returned
  // vars live in this graph and can be differentiated again. A var that does
  // not influence `output` receives a zero tensor.
  std::vector<Var> grad(Var output, std::span<const Var> wrt);

  // Used by the op constructors below.
  Var push(ComputationNode node);

 private:
  std::vector<Var> backward_rule(std::size_t id, Var adjoint, const std::vector<char>& needs);

  // deque: references to existing nodes survive push_back.
  std::deque<ComputationNode> nodes_;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var affine(Var x, double scale, double shift);
inline Var scale(Var x, double c) { return affine(x, c, 0.0); }
inline Var neg(Var x) { return affine(x, -1.0, 0.0); }

// op(a) * op(b) for 2-D operands; op transposes when the flag is set.
Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);

Var broadcast_rows(Var row, std::size_t rows);
Var sum_rows(Var x);
Var row_sum_broadcast(Var x);
Var sum(Var x);
Var fill(Var scalar, Shape shape);

Var sigmoid(Var x);
Var relu(Var x);
Var abs(Var x);
Var exp(Var x);
Var log_softmax(Var x);
Var sqrt(Var x);

Var gather(Var x, IndexMap index, Shape out_shape);
Var scatter_add(Var x, IndexMap index, Shape out_shape);
Var reshape(Var x, Shape shape);

// Sum of squares.
inline Var squared_norm(Var x) { return sum(mul(x, x)); }

}  // namespace gradleak::ad
