#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "gradleak/ad/graph.hpp"
#include "gradleak/model/model.hpp"

namespace gradleak {

// Mean softmax cross-entropy of the model on (x, y).
double forward_loss(const ModelSpec& spec, const ParamSet& params, const Tensor& x, const Labels& y);

// Gradient of forward_loss with respect to the parameters, flattened in
// ParamSet order.
std::vector<double> grad_params(const ModelSpec& spec, const ParamSet& params, const Tensor& x, const Labels& y);

// Σ_l weight_l · ||∇_{w_l} L(x̂, ŷ) − target_l||²
double gia_loss(const ModelSpec& spec, const ParamSet& params, const Tensor& x_hat, const Labels& y_hat,
                std::span<const double> target, std::span<const double> layer_weights);

// ∇_{x̂} gia_loss, same shape as x_hat. Differentiates through the parameter
// gradient. Throws ErrorKind::kOverflow if the loss or gradient is not finite.
Tensor grad_input(const ModelSpec& spec, const ParamSet& params, const Tensor& x_hat, const Labels& y_hat,
                  std::span<const double> target, std::span<const double> layer_weights);

struct LossAndGradient {
  double loss = 0.0;
  Tensor gradient;
};

// gia_loss and grad_input from one graph.
LossAndGradient gia_loss_and_grad(const ModelSpec& spec, const ParamSet& params, const Tensor& x_hat,
                                  const Labels& y_hat, std::span<const double> target,
                                  std::span<const double> layer_weights);

namespace ad {

// Graph pieces shared by the matching losses: parameter leaves, the input
// var, the training loss, and its per-layer parameter gradients (which
// remain differentiable with respect to the input).
struct ParamGradient {
  std::vector<Var> params;
  Var input;
  Var loss;
  std::vector<Var> grads;
};

ParamGradient build_param_gradient(Graph& graph, const ModelSpec& spec, const ParamSet& params, const Tensor& x,
                                   const Labels& y);

// Splits a flat target into per-layer constants shaped like `params`.
std::vector<Var> target_constants(Graph& graph, const ParamSet& params, std::span<const double> target);

// Σ_l w_l ||grads_l − targets_l||²
Var weighted_l2_match(std::span<const Var> grads, std::span<const Var> targets, std::span<const double> weights);

}  // namespace ad

// Central-difference check of `analytic` (the claimed gradient of f at x).
// Returns max_i |a_i − n_i| / max(|a_i|, |n_i|, 1e-8). When `coords` is set
// only those flat indices are probed.
double finite_diff_check(const std::function<double(const Tensor&)>& f, const Tensor& analytic, const Tensor& x,
                         double step, std::optional<std::vector<std::size_t>> coords = std::nullopt);

}  // namespace gradleak
