#include "gradleak/attack/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "gradleak/ad/gradients.hpp"
#include "gradleak/attack/label_recovery.hpp"
#include "gradleak/error.hpp"
#include "gradleak/rng.hpp"
#include "gradleak/simd/kernels.hpp"

namespace gradleak {
namespace {

std::size_t image_dims(const Tensor& x, std::size_t& c, std::size_t& h, std::size_t& w) {
  require(x.rank() == 3 || x.rank() == 4, ErrorKind::kShape, "TV expects (C, H, W) or (b, C, H, W)");
  const std::size_t r = x.rank();
  c = x.shape()[r - 3];
  h = x.shape()[r - 2];
  w = x.shape()[r - 1];
  return r == 4 ? x.dim(0) : 1;
}

// Flat index pairs (first, second) of horizontally and vertically adjacent pixels.
std::pair<ad::IndexMap, ad::IndexMap> neighbour_pairs(const Tensor& x) {
  std::size_t c = 0, h = 0, w = 0;
  const std::size_t b = image_dims(x, c, h, w);
  auto first = std::make_shared<std::vector<std::int64_t>>();
  auto second = std::make_shared<std::vector<std::int64_t>>();
  for (std::size_t plane = 0; plane < b * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        const auto at = static_cast<std::int64_t>(base + y * w + xx);
        if (xx + 1 < w) {
          first->push_back(at);
          second->push_back(at + 1);
        }
        if (y + 1 < h) {
          first->push_back(at);
          second->push_back(at + static_cast<std::int64_t>(w));
        }
      }
  }
  return {std::move(first), std::move(second)};
}

ad::Var tv_term(ad::Var x) {
  auto [first, second] = neighbour_pairs(x.value());
  if (first->empty()) return x.graph().constant(Tensor::scalar(0.0));
  const Shape s{first->size()};
  return ad::sum(ad::abs(ad::sub(ad::gather(x, second, s), ad::gather(x, first, s))));
}

ad::Var cosine_match(std::span<const ad::Var> grads, std::span<const ad::Var> targets,
                     std::span<const double> weights) {
  require(grads.size() == weights.size(), ErrorKind::kShape, "need one weight per parameter tensor");
  ad::Var dot, norm;
  double target_norm = 0.0;
  for (std::size_t l = 0; l < grads.size(); ++l) {
    require(weights[l] >= 0.0, ErrorKind::kInvalidArgument, "layer weights must be non-negative");
    if (weights[l] == 0.0) continue;
    ad::Var d = ad::scale(ad::sum(ad::mul(grads[l], targets[l])), weights[l]);
    ad::Var n = ad::scale(ad::squared_norm(grads[l]), weights[l]);
    dot = dot.valid() ? ad::add(dot, d) : d;
    norm = norm.valid() ? ad::add(norm, n) : n;
    const auto& t = targets[l].value().data();
    target_norm += weights[l] * simd::dot(t, t);
  }
  require(target_norm > 0.0, ErrorKind::kInvalidArgument, "cosine loss needs a non-zero target gradient");
  ad::Var denom = ad::scale(ad::sqrt(norm), std::sqrt(target_norm));
  return ad::affine(ad::div(dot, denom), -1.0, 1.0);
}

ParamSet params_at(const ModelSpec& spec, const GradObservation& obs) {
  require(obs.dim() == spec.total_params(), ErrorKind::kShape,
          "observation has " + std::to_string(obs.dim()) + " parameters, model has " +
              std::to_string(spec.total_params()));
  return zero_params(spec).unflatten(obs.weights());
}

Vector combine(const AggregatorKind& kind, const std::vector<Vector>& xs, const std::vector<double>& alpha) {
  if (xs.size() == 1) return xs.front();
  if (kind.type == AggregatorKind::Type::kMean) return aggregate(kind, xs, alpha);
  if (kind.type == AggregatorKind::Type::kKrum) {
    if (xs.size() < 3) return xs.front();
    const std::size_t f = kind.krum_f.value_or((xs.size() - 1) / 3);
    return xs[krum_select(xs, std::min(f, xs.size() - 3))];
  }
  return aggregate(kind, xs);
}

std::size_t worker_count(std::size_t requested, std::size_t jobs) {
  std::size_t w = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  return std::min(w, jobs);
}

}  // namespace

void AttackConfig::validate() const {
  require(T >= 1 && R_g >= 1 && R_l >= 1, ErrorKind::kConfig, "T, R_g and R_l must be at least 1");
  require(batch_size >= 1, ErrorKind::kConfig, "batch size must be at least 1");
  require(label_restarts >= 1, ErrorKind::kConfig, "label_restarts must be at least 1");
  require(optimizer.lr > 0.0, ErrorKind::kConfig, "step size must be positive");
  require(tv_weight >= 0.0, ErrorKind::kConfig, "tv_weight must be >= 0");
  if (!alpha.empty()) {
    require(alpha.size() == T, ErrorKind::kConfig, "need one alpha per temporal gradient");
    double total = 0.0;
    for (double a : alpha) {
      require(a >= 0.0, ErrorKind::kConfig, "alpha must be non-negative");
      total += a;
    }
    require(std::abs(total - 1.0) <= 1e-9, ErrorKind::kConfig, "alpha must sum to 1");
  }
}

std::vector<double> layer_weights(std::size_t num_layers, LayerWeighting kind) {
  require(num_layers >= 1, ErrorKind::kInvalidArgument, "need at least one layer");
  std::vector<double> w(num_layers, 1.0);
  if (kind == LayerWeighting::kLinearIncrease) {
    const double total = static_cast<double>(num_layers * (num_layers + 1) / 2);
    for (std::size_t l = 0; l < num_layers; ++l) w[l] = static_cast<double>(l + 1) / total;
  }
  return w;
}

std::vector<double> tensor_weights(const ModelSpec& spec, LayerWeighting kind) {
  const auto& layout = spec.param_layout();
  std::vector<std::size_t> rank(layout.size());
  std::size_t layers = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (i > 0 && layout[i].layer != layout[i - 1].layer) ++layers;
    rank[i] = layers;
  }
  const auto per_layer = layer_weights(layers + 1, kind);
  std::vector<double> out(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) out[i] = per_layer[rank[i]];
  return out;
}

double total_variation(const Tensor& x) {
  std::size_t c = 0, h = 0, w = 0;
  const std::size_t b = image_dims(x, c, h, w);
  double tv = 0.0;
  for (std::size_t plane = 0; plane < b * c; ++plane) {
    const double* p = x.data().data() + plane * h * w;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        if (xx + 1 < w) tv += std::abs(p[y * w + xx + 1] - p[y * w + xx]);
        if (y + 1 < h) tv += std::abs(p[(y + 1) * w + xx] - p[y * w + xx]);
      }
  }
  return tv;
}

LossAndGradient attack_loss(const ModelSpec& spec, const ParamSet& params, const Tensor& x_hat, const Labels& y_hat,
                            std::span<const double> target, std::span<const double> weights, LossKind loss,
                            double tv_weight) {
  require(weights.size() == params.num_layers(), ErrorKind::kShape,
          "layer weights: expected " + std::to_string(params.num_layers()) + ", got " +
              std::to_string(weights.size()));
  require(tv_weight >= 0.0, ErrorKind::kInvalidArgument, "tv_weight must be >= 0");
  ad::Graph g;
  auto targets = ad::target_constants(g, params, target);
  auto pg = ad::build_param_gradient(g, spec, params, x_hat, y_hat);
  ad::Var total = loss == LossKind::kL2 ? ad::weighted_l2_match(pg.grads, targets, weights)
                                        : cosine_match(pg.grads, targets, weights);
  if (tv_weight > 0.0) total = ad::add(total, ad::scale(tv_term(pg.input), tv_weight));
  const ad::Var wrt[] = {pg.input};
  Tensor grad = g.grad(total, wrt)[0].value().reshaped(x_hat.shape());
  const double value = total.value().item();
  require(std::isfinite(value) && grad.all_finite(), ErrorKind::kOverflow, "attack loss or gradient is not finite");
  return {value, std::move(grad)};
}

OptimizeResult local_optimize(const Tensor& x_init, const GradObservation& obs, const Labels& y_hat,
                              const ModelSpec& spec, const AttackConfig& config) {
  require(config.R_l >= 1, ErrorKind::kConfig, "R_l must be at least 1");
  const ParamSet params = params_at(spec, obs);
  const auto weights = tensor_weights(spec, config.layer_weighting);
  const Objective f = [&](const Tensor& x) {
    return attack_loss(spec, params, x, y_hat, obs.gradient(), weights, config.loss, config.tv_weight);
  };
  return minimize(f, x_init, config.R_l, config.optimizer, true);
}

Tensor initial_batch(const ModelSpec& spec, const AttackConfig& config) {
  Shape s{config.batch_size};
  s.insert(s.end(), spec.input_shape().begin(), spec.input_shape().end());
  std::mt19937_64 rng(derive_seed(config.seed, {0x1a17}));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(shape_size(s));
  for (double& x : v) x = normal(rng);
  return Tensor::adopt(std::move(s), std::move(v));
}

Labels attack_labels(std::span<const GradObservation> observations, const ModelSpec& spec,
                     const AttackConfig& config) {
  require(!observations.empty(), ErrorKind::kInvalidArgument, "no observations");
  const auto earliest = std::min_element(observations.begin(), observations.end(),
                                         [](const auto& a, const auto& b) { return a.round() < b.round(); });
  return recover_labels(fc_slice(spec, *earliest), config.batch_size, config.label_steps,
                        derive_seed(config.seed, {0x1abe1}), LabelDecoding::kColumnMass, OptimizerConfig::lbfgs(),
                        config.label_restarts)
      .labels;
}

ReconstructionResult tgias_ro(std::span<const GradObservation> observations, const ModelSpec& spec,
                              const AttackConfig& config, std::optional<Labels> labels) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  require(observations.size() == config.T, ErrorKind::kConfig,
          "expected T = " + std::to_string(config.T) + " observations, got " + std::to_string(observations.size()));
  for (const auto& o : observations)
    require(o.dim() == spec.total_params(), ErrorKind::kShape, "observation dimension does not match the model");

  ReconstructionResult result;
  result.labels = labels ? std::move(*labels) : attack_labels(observations, spec, config);
  require(result.labels.batch() == config.batch_size, ErrorKind::kShape, "label count does not match batch size");
  result.labels.validate(spec.num_classes());
  result.x = initial_batch(spec, config);
  result.per_temporal_losses.assign(config.T, {});

  const std::size_t workers = worker_count(config.workers, config.T);
  std::vector<OptimizeResult> local(config.T);
  for (std::size_t s = 0; s < config.R_g; ++s) {
    const auto run = [&](std::size_t first) {
      for (std::size_t t = first; t < config.T; t += workers)
        local[t] = local_optimize(result.x, observations[t], result.labels, spec, config);
    };
    if (workers <= 1) {
      run(0);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    }

    std::vector<Vector> survivors;
    std::vector<double> alpha;
    std::vector<double> losses;
    for (std::size_t t = 0; t < config.T; ++t) {
      if (local[t].collapsed) {
        result.per_temporal_losses[t].push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      result.per_temporal_losses[t].push_back(local[t].loss);
      losses.push_back(local[t].loss);
      survivors.push_back(local[t].x.vector());
      alpha.push_back(config.alpha.empty() ? 1.0 : config.alpha[t]);
    }
    result.collapsed_per_round.push_back(config.T - survivors.size());
    if (survivors.empty()) {
      fail(ErrorKind::kCollapsed, "all " + std::to_string(config.T) + " temporal reconstructions collapsed in global round " +
                                      std::to_string(s + 1));
    }
    double alpha_total = 0.0;
    for (double a : alpha) alpha_total += a;
    require(alpha_total > 0.0, ErrorKind::kCollapsed, "every surviving temporal gradient has zero alpha");
    for (double& a : alpha) a /= alpha_total;
    result.x = Tensor::adopt(result.x.shape(), combine(config.aggregator, survivors, alpha));
    // Shifted mean: exact when every survivor reports the same loss.
    double shift = 0.0;
    for (double l : losses) shift += l - losses.front();
    result.loss_trace.push_back(losses.front() + shift / static_cast<double>(losses.size()));
  }
  result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

ReconstructionResult dlg_attack(const GradObservation& obs, const ModelSpec& spec, const AttackConfig& config,
                                std::optional<Labels> labels) {
  AttackConfig single = config;
  single.T = 1;
  single.aggregator = AggregatorKind::mean();
  single.alpha.clear();
  return tgias_ro(std::span<const GradObservation>(&obs, 1), spec, single, std::move(labels));
}

}  // namespace gradleak
