#include "gradleak/ad/graph.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "gradleak/error.hpp"
#include "gradleak/simd/kernels.hpp"

namespace gradleak::ad {

const Tensor& Var::value() const { return graph_->node(id_).value; }

namespace {

Graph& same_graph(Var a, Var b) {
  require(&a.graph() == &b.graph(), ErrorKind::kInvalidArgument, "operands belong to different graphs");
  return a.graph();
}

void check_same_shape(Var a, Var b, const char* op) {
  require(a.shape() == b.shape(), ErrorKind::kShape,
          std::string(op) + ": " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
}

ComputationNode make_node(Op op, Tensor value, std::initializer_list<Var> parents) {
  ComputationNode node;
  node.op = op;
  node.value = std::move(value);
  for (Var p : parents) node.parents[node.num_parents++] = p.id();
  return node;
}

std::size_t rows_of(const Tensor& t) { return t.size() / t.shape().back(); }

// C = op(A) op(B), all row-major 2-D.
Tensor matmul_value(const Tensor& a, const Tensor& b, bool ta, bool tb) {
  require(a.rank() == 2 && b.rank() == 2, ErrorKind::kShape, "matmul expects 2-D operands");
  const std::size_t ar = a.dim(0), ac = a.dim(1), br = b.dim(0), bc = b.dim(1);
  const std::size_t m = ta ? ac : ar;
  const std::size_t k = ta ? ar : ac;
  const std::size_t kb = tb ? bc : br;
  const std::size_t n = tb ? br : bc;
  require(k == kb, ErrorKind::kShape,
          "matmul inner dimensions differ: " + shape_to_string(a.shape()) + (ta ? "^T" : "") + " * " +
              shape_to_string(b.shape()) + (tb ? "^T" : ""));
  const auto& kern = simd::active();
  std::vector<double> out(m * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  if (!ta && !tb) {
    for (std::size_t i = 0; i < m; ++i) {
      double* row = out.data() + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double s = A[i * ac + p];
        if (s != 0.0) kern.axpy(s, B + p * bc, row, n);
      }
    }
  } else if (!ta && tb) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] = kern.dot(A + i * ac, B + j * bc, k);
    }
  } else if (ta && !tb) {
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t i = 0; i < m; ++i) {
        const double s = A[p * ac + i];
        if (s != 0.0) kern.axpy(s, B + p * bc, out.data() + i * n, n);
      }
    }
  } else {
    // A^T B^T = (B A)^T
    Tensor ba = matmul_value(b, a, false, false);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] = ba.data()[j * m + i];
    }
  }
  return Tensor::adopt({m, n}, std::move(out));
}

}  // namespace

Var Graph::push(ComputationNode node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::variable(Tensor value) { return push(make_node(Op::kLeaf, std::move(value), {})); }

Var Graph::constant(Tensor value) { return push(make_node(Op::kLeaf, std::move(value), {})); }

// ---------------------------------------------------------------------------
// Op constructors

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  check_same_shape(a, b, "add");
  Tensor out(a.shape());
  simd::active().add(a.value().data().data(), b.value().data().data(), out.data().data(), out.size());
  return g.push(make_node(Op::kAdd, std::move(out), {a, b}));
}

Var sub(Var a, Var b) {
  Graph& g = same_graph(a, b);
  check_same_shape(a, b, "sub");
  Tensor out(a.shape());
  simd::active().sub(a.value().data().data(), b.value().data().data(), out.data().data(), out.size());
  return g.push(make_node(Op::kSub, std::move(out), {a, b}));
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  check_same_shape(a, b, "mul");
  Tensor out(a.shape());
  simd::active().mul(a.value().data().data(), b.value().data().data(), out.data().data(), out.size());
  return g.push(make_node(Op::kMul, std::move(out), {a, b}));
}

Var div(Var a, Var b) {
  Graph& g = same_graph(a, b);
  check_same_shape(a, b, "div");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] / b.value()[i];
  return g.push(make_node(Op::kDiv, std::move(out), {a, b}));
}

Var affine(Var x, double scale, double shift) {
  Tensor out(x.shape());
  simd::active().scale(x.value().data().data(), scale, out.data().data(), out.size());
  if (shift != 0.0) {
    for (double& v : out.data()) v += shift;
  }
  auto node = make_node(Op::kAffine, std::move(out), {x});
  node.scale = scale;
  node.shift = shift;
  return x.graph().push(std::move(node));
}

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
  Graph& g = same_graph(a, b);
  auto node = make_node(Op::kMatMul, matmul_value(a.value(), b.value(), trans_a, trans_b), {a, b});
  node.trans_a = trans_a;
  node.trans_b = trans_b;
  return g.push(std::move(node));
}

Var broadcast_rows(Var row, std::size_t rows) {
  require(row.value().rank() == 1, ErrorKind::kShape, "broadcast_rows expects a 1-D operand");
  const std::size_t cols = row.value().size();
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(row.value().data().data(), cols, out.data() + r * cols);
  return row.graph().push(make_node(Op::kBroadcastRows, Tensor::adopt({rows, cols}, std::move(out)), {row}));
}

Var sum_rows(Var x) {
  require(x.value().rank() == 2, ErrorKind::kShape, "sum_rows expects a 2-D operand");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  Tensor out({cols});
  for (std::size_t r = 0; r < rows; ++r) {
    simd::active().axpy(1.0, x.value().data().data() + r * cols, out.data().data(), cols);
  }
  return x.graph().push(make_node(Op::kSumRows, std::move(out), {x}));
}

Var row_sum_broadcast(Var x) {
  const std::size_t cols = x.shape().back();
  const std::size_t rows = rows_of(x.value());
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double s = simd::active().sum(x.value().data().data() + r * cols, cols);
    std::fill_n(out.data().data() + r * cols, cols, s);
  }
  return x.graph().push(make_node(Op::kRowSumBroadcast, std::move(out), {x}));
}

Var sum(Var x) {
  return x.graph().push(make_node(Op::kSum, Tensor::scalar(simd::sum(x.value().data())), {x}));
}

Var fill(Var scalar, Shape shape) {
  require(scalar.value().size() == 1, ErrorKind::kShape, "fill expects a scalar operand");
  return scalar.graph().push(make_node(Op::kFill, Tensor(std::move(shape), scalar.value()[0]), {scalar}));
}

Var sigmoid(Var x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.value()[i];
    // Split on sign so exp never overflows.
    if (v >= 0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  return x.graph().push(make_node(Op::kSigmoid, std::move(out), {x}));
}

Var relu(Var x) {
  Tensor mask(x.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = x.value()[i] > 0.0 ? 1.0 : 0.0;
  return mul(x, x.graph().constant(std::move(mask)));
}

Var abs(Var x) {
  Tensor sign(x.shape());
  for (std::size_t i = 0; i < sign.size(); ++i) {
    const double v = x.value()[i];
    sign[i] = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  }
  return mul(x, x.graph().constant(std::move(sign)));
}

Var exp(Var x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x.value()[i]);
  return x.graph().push(make_node(Op::kExp, std::move(out), {x}));
}

Var log_softmax(Var x) {
  const std::size_t cols = x.shape().back();
  const std::size_t rows = rows_of(x.value());
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.value().data().data() + r * cols;
    double* o = out.data().data() + r * cols;
    const double peak = *std::max_element(in, in + cols);
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += std::exp(in[c] - peak);
    const double lse = peak + std::log(acc);
    for (std::size_t c = 0; c < cols; ++c) o[c] = in[c] - lse;
  }
  return x.graph().push(make_node(Op::kLogSoftmax, std::move(out), {x}));
}

Var sqrt(Var x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(x.value()[i]);
  return x.graph().push(make_node(Op::kSqrt, std::move(out), {x}));
}

Var gather(Var x, IndexMap index, Shape out_shape) {
  require(index && index->size() == shape_size(out_shape), ErrorKind::kShape, "gather index does not match output shape");
  const auto& in = x.value();
  std::vector<double> out(index->size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::int64_t src = (*index)[i];
    out[i] = src < 0 ? 0.0 : in[static_cast<std::size_t>(src)];
  }
  auto node = make_node(Op::kGather, Tensor::adopt(std::move(out_shape), std::move(out)), {x});
  node.index = std::move(index);
  return x.graph().push(std::move(node));
}

Var scatter_add(Var x, IndexMap index, Shape out_shape) {
  require(index && index->size() == x.value().size(), ErrorKind::kShape, "scatter index does not match input size");
  Tensor out(std::move(out_shape));
  const auto& in = x.value();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::int64_t dst = (*index)[i];
    if (dst >= 0) out[static_cast<std::size_t>(dst)] += in[i];
  }
  auto node = make_node(Op::kScatterAdd, std::move(out), {x});
  node.index = std::move(index);
  return x.graph().push(std::move(node));
}

Var reshape(Var x, Shape shape) {
  require(shape_size(shape) == x.value().size(), ErrorKind::kShape,
          "cannot reshape " + shape_to_string(x.shape()) + " to " + shape_to_string(shape));
  return x.graph().push(make_node(Op::kReshape, x.value().reshaped(std::move(shape)), {x}));
}

// ---------------------------------------------------------------------------
// Backward

std::vector<Var> Graph::backward_rule(std::size_t id, Var g, const std::vector<char>& needs) {
  // Pull fields out first; the rule pushes new nodes.
  const ComputationNode& n = nodes_[id];
  const Op op = n.op;
  const Var a(this, n.parents[0]);
  const Var b(this, n.parents[1]);
  const Var self(this, id);
  const bool need_a = n.num_parents > 0 && needs[n.parents[0]];
  const bool need_b = n.num_parents > 1 && needs[n.parents[1]];
  const double scale_c = n.scale;
  const bool ta = n.trans_a, tb = n.trans_b;
  const IndexMap index = n.index;

  std::vector<Var> out(2);
  switch (op) {
    case Op::kLeaf:
      break;
    case Op::kAdd:
      if (need_a) out[0] = g;
      if (need_b) out[1] = g;
      break;
    case Op::kSub:
      if (need_a) out[0] = g;
      if (need_b) out[1] = neg(g);
      break;
    case Op::kMul:
      if (need_a) out[0] = mul(g, b);
      if (need_b) out[1] = mul(g, a);
      break;
    case Op::kDiv: {
      Var gb = div(g, b);
      if (need_a) out[0] = gb;
      if (need_b) out[1] = neg(mul(gb, self));
      break;
    }
    case Op::kAffine:
      out[0] = scale(g, scale_c);
      break;
    case Op::kMatMul:
      if (!ta && !tb) {
        if (need_a) out[0] = matmul(g, b, false, true);
        if (need_b) out[1] = matmul(a, g, true, false);
      } else if (!ta && tb) {
        if (need_a) out[0] = matmul(g, b, false, false);
        if (need_b) out[1] = matmul(g, a, true, false);
      } else if (ta && !tb) {
        if (need_a) out[0] = matmul(b, g, false, true);
        if (need_b) out[1] = matmul(a, g, false, false);
      } else {
        if (need_a) out[0] = matmul(b, g, true, true);
        if (need_b) out[1] = matmul(g, a, true, true);
      }
      break;
    case Op::kBroadcastRows:
      out[0] = sum_rows(g);
      break;
    case Op::kSumRows:
      out[0] = broadcast_rows(g, a.shape()[0]);
      break;
    case Op::kRowSumBroadcast:
      out[0] = row_sum_broadcast(g);
      break;
    case Op::kSum:
      out[0] = fill(g, a.shape());
      break;
    case Op::kFill:
      out[0] = sum(g);
      break;
    case Op::kSigmoid:
      out[0] = mul(g, mul(self, affine(self, -1.0, 1.0)));
      break;
    case Op::kExp:
      out[0] = mul(g, self);
      break;
    case Op::kLogSoftmax:
      out[0] = sub(g, mul(exp(self), row_sum_broadcast(g)));
      break;
    case Op::kSqrt:
      out[0] = scale(div(g, self), 0.5);
      break;
    case Op::kGather:
      out[0] = scatter_add(g, index, a.shape());
      break;
    case Op::kScatterAdd:
      out[0] = gather(g, index, a.shape());
      break;
    case Op::kReshape:
      out[0] = reshape(g, a.shape());
      break;
  }
  return out;
}

std::vector<Var> Graph::grad(Var output, std::span<const Var> wrt) {
  require(&output.graph() == this, ErrorKind::kInvalidArgument, "output belongs to another graph");
  require(output.value().size() == 1, ErrorKind::kShape, "grad() needs a scalar output");
  const std::size_t top = output.id();

  // needs[i]: node i lies on a path from some wrt leaf, so its adjoint matters.
  std::vector<char> needs(top + 1, 0);
  for (Var w : wrt) {
    require(&w.graph() == this, ErrorKind::kInvalidArgument, "wrt var belongs to another graph");
    if (w.id() <= top) needs[w.id()] = 1;
  }
  for (std::size_t i = 0; i <= top; ++i) {
    const ComputationNode& n = nodes_[i];
    for (std::uint8_t p = 0; p < n.num_parents && !needs[i]; ++p) needs[i] = needs[n.parents[p]];
  }

  std::vector<std::optional<Var>> adjoint(top + 1);
  if (needs[top]) adjoint[top] = constant(Tensor(output.shape(), 1.0));

  for (std::size_t i = top + 1; i-- > 0;) {
    if (!adjoint[i] || nodes_[i].op == Op::kLeaf) continue;
    const std::uint8_t np = nodes_[i].num_parents;
    const std::size_t parents[2] = {nodes_[i].parents[0], nodes_[i].parents[1]};
    std::vector<Var> contrib = backward_rule(i, *adjoint[i], needs);
    for (std::uint8_t p = 0; p < np; ++p) {
      if (!contrib[p].valid()) continue;
      auto& slot = adjoint[parents[p]];
      slot = slot ? add(*slot, contrib[p]) : contrib[p];
    }
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (Var w : wrt) {
    if (w.id() <= top && adjoint[w.id()]) {
      result.push_back(*adjoint[w.id()]);
    } else {
      result.push_back(constant(Tensor(w.shape())));
    }
  }
  return result;
}

}  // namespace gradleak::ad
