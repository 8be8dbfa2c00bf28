#include "gradleak/attack/label_recovery.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>
#include <random>

#include "gradleak/error.hpp"
#include "gradleak/rng.hpp"
#include "gradleak/simd/kernels.hpp"

namespace gradleak {
namespace {

Tensor slice(const std::vector<double>& flat, std::size_t offset, Shape shape) {
  const std::size_t n = shape_size(shape);
  return Tensor::adopt(std::move(shape), std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                                                             flat.begin() + static_cast<std::ptrdiff_t>(offset + n)));
}

}  // namespace

FcSlice fc_slice(const ModelSpec& spec, const GradObservation& obs) {
  require(obs.dim() == spec.total_params(), ErrorKind::kShape,
          "observation has " + std::to_string(obs.dim()) + " parameters, model has " +
              std::to_string(spec.total_params()));
  const std::size_t wi = spec.fc_weight_index();
  const auto& layout = spec.param_layout();
  std::size_t off = 0;
  for (std::size_t i = 0; i < wi; ++i) off += shape_size(layout[i].shape);
  const std::size_t wsize = shape_size(layout[wi].shape);
  LayerKind act = LayerKind::kDense;
  for (std::size_t l = layout[wi].layer; l-- > 0;) {
    const LayerKind k = spec.layers()[l].kind;
    if (k == LayerKind::kFlatten || k == LayerKind::kMaxPool2x2) continue;
    if (k == LayerKind::kSigmoid || k == LayerKind::kRelu) act = k;
    break;
  }
  return {slice(obs.weights(), off, layout[wi].shape), slice(obs.weights(), off + wsize, layout[wi + 1].shape),
          slice(obs.gradient(), off, layout[wi].shape), slice(obs.gradient(), off + wsize, layout[wi + 1].shape),
          act};
}

std::vector<std::size_t> round_class_mass(std::span<const double> mass, std::size_t total) {
  const double sum = std::accumulate(mass.begin(), mass.end(), 0.0);
  require(!mass.empty() && sum > 0.0, ErrorKind::kInvalidArgument, "class mass must be positive");
  std::vector<std::size_t> count(mass.size());
  std::vector<double> rem(mass.size());
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < mass.size(); ++c) {
    require(mass[c] >= 0.0, ErrorKind::kInvalidArgument, "class mass must be non-negative");
    const double share = mass[c] * static_cast<double>(total) / sum;
    count[c] = static_cast<std::size_t>(std::floor(share));
    rem[c] = share - static_cast<double>(count[c]);
    assigned += count[c];
  }
  std::vector<std::size_t> order(mass.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++count[order[i % order.size()]];
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < count.size(); ++c) labels.insert(labels.end(), count[c], c);
  return labels;
}

namespace {

LabelRecovery recover_once(const FcSlice& fc, std::size_t b, std::size_t steps, std::uint64_t seed,
                           LabelDecoding decoding, const OptimizerConfig& optimizer) {
  const std::size_t n = fc.weight.dim(0), m = fc.weight.dim(1);
  const std::size_t xs = b * m;
  const Objective objective = [&](const Tensor& z) {
    ad::Graph g;
    const auto& flat = z.vector();
    ad::Var u = g.variable(slice(flat, 0, {b, m}));
    ad::Var s = g.variable(slice(flat, xs, {b, n}));
    ad::Var x = fc.input_activation == LayerKind::kSigmoid ? ad::sigmoid(u)
                : fc.input_activation == LayerKind::kRelu  ? ad::relu(u)
                                                           : u;
    ad::Var w = g.variable(fc.weight);
    ad::Var bias = g.variable(fc.bias);
    ad::Var logits = ad::add(ad::matmul(x, w, false, true), ad::broadcast_rows(bias, b));
    ad::Var loss = ad::cross_entropy(logits, ad::exp(ad::log_softmax(s)));
    const ad::Var params[] = {w, bias};
    const auto grads = g.grad(loss, params);
    ad::Var match = ad::add(ad::squared_norm(ad::sub(grads[0], g.constant(fc.weight_grad))),
                            ad::squared_norm(ad::sub(grads[1], g.constant(fc.bias_grad))));
    const ad::Var wrt[] = {u, s};
    const auto dz = g.grad(match, wrt);
    std::vector<double> grad = dz[0].value().vector();
    const auto& ds = dz[1].value().vector();
    grad.insert(grad.end(), ds.begin(), ds.end());
    return LossAndGradient{match.value().item(), Tensor::adopt(z.shape(), std::move(grad))};
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> init(b * (m + n));
  for (double& v : init) v = normal(rng);
  const Shape shape{init.size()};
  const auto result = minimize(objective, Tensor::adopt(shape, std::move(init)), steps, optimizer, false);

  std::vector<std::size_t> labels(b);
  std::vector<double> mass(n, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    const double* row = result.x.data().data() + xs + i * n;
    labels[i] = static_cast<std::size_t>(std::max_element(row, row + n) - row);
    const double top = row[labels[i]];
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) z += std::exp(row[c] - top);
    for (std::size_t c = 0; c < n; ++c) mass[c] += std::exp(row[c] - top) / z;
  }
  if (decoding == LabelDecoding::kColumnMass) {
    labels = round_class_mass(mass, b);
  } else {
    std::sort(labels.begin(), labels.end());
  }
  const double scale = simd::dot(fc.weight_grad.data(), fc.weight_grad.data()) +
                       simd::dot(fc.bias_grad.data(), fc.bias_grad.data());
  return {Labels::hard(std::move(labels)), std::move(mass), result.loss, result.steps, !result.collapsed && result.loss <= 1e-6 * scale};
}

}  // namespace

LabelRecovery recover_labels(const FcSlice& fc, std::size_t b, std::size_t steps, std::uint64_t seed,
                             LabelDecoding decoding, const OptimizerConfig& optimizer, std::size_t restarts) {
  require(fc.weight.rank() == 2 && fc.weight.shape() == fc.weight_grad.shape(), ErrorKind::kShape,
          "FC gradient does not match FC weights");
  const std::size_t n = fc.weight.dim(0);
  require(fc.bias.shape() == Shape{n} && fc.bias_grad.shape() == Shape{n}, ErrorKind::kShape,
          "FC bias does not match FC weights");
  require(b >= 1, ErrorKind::kInvalidArgument, "batch size must be at least 1");
  require(restarts >= 1, ErrorKind::kInvalidArgument, "need at least one label-recovery run");
  if (n == 1) return {Labels::hard(std::vector<std::size_t>(b, 0)), {static_cast<double>(b)}, 0.0, 0, true};

  LabelRecovery best = recover_once(fc, b, steps, seed, decoding, optimizer);
  for (std::size_t r = 1; r < restarts && !best.converged; ++r) {
    LabelRecovery next = recover_once(fc, b, steps, derive_seed(seed, {0x7e57a7, r}), decoding, optimizer);
    if (next.converged || next.loss < best.loss) best = std::move(next);
  }
  return best;
}

double multiset_accuracy(std::vector<std::size_t> recovered, std::vector<std::size_t> truth) {
  require(recovered.size() == truth.size() && !truth.empty(), ErrorKind::kShape, "label multisets differ in size");
  std::sort(recovered.begin(), recovered.end());
  std::sort(truth.begin(), truth.end());
  std::vector<std::size_t> common;
  std::set_intersection(recovered.begin(), recovered.end(), truth.begin(), truth.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(truth.size());
}

}  // namespace gradleak
