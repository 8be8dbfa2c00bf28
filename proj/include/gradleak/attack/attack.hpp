#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gradleak/attack/optimizer.hpp"
#include "gradleak/fl/observation.hpp"
#include "gradleak/model/model.hpp"
#include "gradleak/robust/aggregate.hpp"

namespace gradleak {

enum class LossKind { kL2, kCosine };
enum class LayerWeighting { kUniform, kLinearIncrease };

struct AttackConfig {
  std::size_t T = 10;
  std::size_t R_g = 300;
  std::size_t R_l = 20;
  std::size_t batch_size = 1;
  OptimizerConfig optimizer = OptimizerConfig::lbfgs(1.0);
  AggregatorKind aggregator = AggregatorKind::median();
  LossKind loss = LossKind::kL2;
  LayerWeighting layer_weighting = LayerWeighting::kLinearIncrease;
  double tv_weight = 0.0;
  std::vector<double> alpha;  // per-temporal weights under Mean; empty means uniform
  std::size_t label_steps = 100;
  std::size_t label_restarts = 5;
  std::uint64_t seed = 0;
  std::size_t workers = 1;  // 0 means one per hardware thread

  void validate() const;
};

// Uniform → all 1; LinearIncrease → l / Σj for l = 1..L.
std::vector<double> layer_weights(std::size_t num_layers, LayerWeighting kind);

// layer_weights over the parametric layers of `spec`, repeated for each
// tensor (weight and bias) of a layer, in ParamSet order.
std::vector<double> tensor_weights(const ModelSpec& spec, LayerWeighting kind);

// Anisotropic TV summed over images and channels of (b, C, H, W) or (C, H, W).
double total_variation(const Tensor& x);

// L2: gia_loss. Cosine: 1 − ⟨ĝ, g⟩/(‖ĝ‖‖g‖) with inner products weighted
// per tensor. Both plus tv_weight·TV(x̂). Gradient is with respect to x̂.
LossAndGradient attack_loss(const ModelSpec& spec, const ParamSet& params, const Tensor& x_hat, const Labels& y_hat,
                            std::span<const double> target, std::span<const double> weights, LossKind loss,
                            double tv_weight);

// R_l optimizer steps on the attack loss for one observation.
OptimizeResult local_optimize(const Tensor& x_init, const GradObservation& obs, const Labels& y_hat,
                              const ModelSpec& spec, const AttackConfig& config);

struct ReconstructionResult {
  Tensor x;  // (b, C, H, W)
  Labels labels = Labels::hard({});
  std::vector<double> loss_trace;                         // per global round
  std::vector<std::vector<double>> per_temporal_losses;   // T × R_g; NaN where collapsed
  std::vector<std::size_t> collapsed_per_round;
  double wall_time_s = 0.0;
};

// Initial dummy batch: N(0, 1) draws seeded from config.seed.
Tensor initial_batch(const ModelSpec& spec, const AttackConfig& config);

// Labels from the FC slice of the earliest observation.
Labels attack_labels(std::span<const GradObservation> observations, const ModelSpec& spec,
                     const AttackConfig& config);

// Multi-temporal attack. Labels are recovered from the earliest observation
// unless given.
ReconstructionResult tgias_ro(std::span<const GradObservation> observations, const ModelSpec& spec,
                              const AttackConfig& config, std::optional<Labels> labels = std::nullopt);

// Single-observation baseline: tgias_ro with T = 1 and Mean.
ReconstructionResult dlg_attack(const GradObservation& obs, const ModelSpec& spec, const AttackConfig& config,
                                std::optional<Labels> labels = std::nullopt);

}  // namespace gradleak
