#include "gradleak/ad/gradients.hpp"

#include <algorithm>
#include <cmath>

#include "gradleak/error.hpp"

namespace gradleak {
namespace ad {

ParamGradient build_param_gradient(Graph& graph, const ModelSpec& spec, const ParamSet& params, const Tensor& x,
                                   const Labels& y) {
  ParamGradient out;
  for (const auto& [name, t] : params.layers()) out.params.push_back(graph.variable(t));
  out.input = graph.variable(x);
  Var logits = build_logits(spec, out.params, out.input);
  out.loss = cross_entropy(logits, y);
  out.grads = graph.grad(out.loss, out.params);
  return out;
}

std::vector<Var> target_constants(Graph& graph, const ParamSet& params, std::span<const double> target) {
  require(target.size() == params.total_dim(), ErrorKind::kShape,
          "target gradient has " + std::to_string(target.size()) + " entries, parameter set has " +
              std::to_string(params.total_dim()));
  std::vector<Var> out;
  std::size_t off = 0;
  for (const auto& [name, t] : params.layers()) {
    out.push_back(graph.constant(
        Tensor::adopt(t.shape(), std::vector<double>(target.begin() + off, target.begin() + off + t.size()))));
    off += t.size();
  }
  return out;
}

Var weighted_l2_match(std::span<const Var> grads, std::span<const Var> targets, std::span<const double> weights) {
  require(grads.size() == targets.size() && grads.size() == weights.size(), ErrorKind::kShape,
          "need one weight per parameter layer (" + std::to_string(grads.size()) + "), got " +
              std::to_string(weights.size()));
  Var total;
  for (std::size_t l = 0; l < grads.size(); ++l) {
    require(weights[l] >= 0.0, ErrorKind::kInvalidArgument, "layer weights must be non-negative");
    if (weights[l] == 0.0) continue;
    Var term = scale(squared_norm(sub(grads[l], targets[l])), weights[l]);
    total = total.valid() ? add(total, term) : term;
  }
  if (!total.valid()) total = grads.front().graph().constant(Tensor::scalar(0.0));
  return total;
}

}  // namespace ad

namespace {

void check_layer_weights(const ParamSet& params, std::span<const double> layer_weights) {
  require(layer_weights.size() == params.num_layers(), ErrorKind::kShape,
          "layer weights: expected " + std::to_string(params.num_layers()) + ", got " +
              std::to_string(layer_weights.size()));
}

}  // namespace

double forward_loss(const ModelSpec& spec, const ParamSet& params, const Tensor& x, const Labels& y) {
  ad::Graph g;
  std::vector<ad::Var> vars;
  for (const auto& [name, t] : params.layers()) vars.push_back(g.constant(t));
  return ad::cross_entropy(ad::build_logits(spec, vars, g.constant(x)), y).value().item();
}

std::vector<double> grad_params(const ModelSpec& spec, const ParamSet& params, const Tensor& x, const Labels& y) {
  ad::Graph g;
  auto pg = ad::build_param_gradient(g, spec, params, x, y);
  std::vector<double> flat;
  flat.reserve(params.total_dim());
  for (ad::Var v : pg.grads) flat.insert(flat.end(), v.value().data().begin(), v.value().data().end());
  return flat;
}

double gia_loss(const ModelSpec& spec, const ParamSet& params, const Tensor& x_hat, const Labels& y_hat,
                std::span<const double> target, std::span<const double> layer_weights) {
  check_layer_weights(params, layer_weights);
  ad::Graph g;
  auto targets = ad::target_constants(g, params, target);
  auto pg = ad::build_param_gradient(g, spec, params, x_hat, y_hat);
  return ad::weighted_l2_match(pg.grads, targets, layer_weights).value().item();
}

LossAndGradient gia_loss_and_grad(const ModelSpec& spec, const ParamSet& params, const Tensor& x_hat,
                                  const Labels& y_hat, std::span<const double> target,
                                  std::span<const double> layer_weights) {
  check_layer_weights(params, layer_weights);
  ad::Graph g;
  auto targets = ad::target_constants(g, params, target);
  auto pg = ad::build_param_gradient(g, spec, params, x_hat, y_hat);
  ad::Var loss = ad::weighted_l2_match(pg.grads, targets, layer_weights);
  const ad::Var wrt[] = {pg.input};
  Tensor grad = g.grad(loss, wrt)[0].value().reshaped(x_hat.shape());
  const double value = loss.value().item();
  require(std::isfinite(value) && grad.all_finite(), ErrorKind::kOverflow,
          "gradient-matching loss or its input gradient is not finite");
  return {value, std::move(grad)};
}

Tensor grad_input(const ModelSpec& spec, const ParamSet& params, const Tensor& x_hat, const Labels& y_hat,
                  std::span<const double> target, std::span<const double> layer_weights) {
  return gia_loss_and_grad(spec, params, x_hat, y_hat, target, layer_weights).gradient;
}

double finite_diff_check(const std::function<double(const Tensor&)>& f, const Tensor& analytic, const Tensor& x,
                         double step, std::optional<std::vector<std::size_t>> coords) {
  require(step > 0.0, ErrorKind::kInvalidArgument, "finite-difference step must be positive");
  require(analytic.size() == x.size(), ErrorKind::kShape, "analytic gradient does not match x");
  std::vector<std::size_t> probe;
  if (coords) {
    probe = std::move(*coords);
  } else {
    probe.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) probe[i] = i;
  }
  double worst = 0.0;
  Tensor work = x;
  for (std::size_t i : probe) {
    require(i < x.size(), ErrorKind::kInvalidArgument, "probe coordinate out of range");
    const double orig = work[i];
    work[i] = orig + step;
    const double up = f(work);
    work[i] = orig - step;
    const double down = f(work);
    work[i] = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace gradleak
