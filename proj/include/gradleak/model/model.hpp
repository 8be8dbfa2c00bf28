#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "gradleak/ad/graph.hpp"
#include "gradleak/tensor.hpp"

namespace gradleak {

enum class LayerKind { kDense, kConv2d, kRelu, kSigmoid, kMaxPool2x2, kFlatten };

struct LayerDesc {
  LayerKind kind = LayerKind::kDense;
  std::size_t in = 0;      // dense: input features; conv2d: input channels
  std::size_t out = 0;     // dense: output features; conv2d: output channels
  std::size_t kernel = 0;  // conv2d only (square, stride 1, no padding)

  static LayerDesc dense(std::size_t in, std::size_t out) { return {LayerKind::kDense, in, out, 0}; }
  static LayerDesc conv2d(std::size_t in, std::size_t out, std::size_t k) { return {LayerKind::kConv2d, in, out, k}; }
  static LayerDesc relu() { return {LayerKind::kRelu}; }
  static LayerDesc sigmoid() { return {LayerKind::kSigmoid}; }
  static LayerDesc maxpool2x2() { return {LayerKind::kMaxPool2x2}; }
  static LayerDesc flatten() { return {LayerKind::kFlatten}; }

  bool has_params() const { return kind == LayerKind::kDense || kind == LayerKind::kConv2d; }
  std::string describe() const;
};

struct ParamInfo {
  std::string name;
  Shape shape;
  std::size_t layer;  // index into ModelSpec::layers
};

// Network architecture. Inputs are images of shape (C, H, W); a batch is
// (b, C, H, W) or (b, C*H*W).
class ModelSpec {
 public:
  ModelSpec(std::vector<LayerDesc> layers, Shape input_shape, std::size_t num_classes);

  // "mlp:784-64-10:sigmoid", "mlp:3x8x8-16-4:relu", "cnn:1x28x28:c8k5:10".
  static ModelSpec parse(std::string_view descriptor);
  static ModelSpec mlp(std::vector<std::size_t> widths, LayerKind activation, Shape input_shape = {});
  static ModelSpec cnn(Shape input_shape, std::size_t channels, std::size_t kernel, std::size_t num_classes);

  const std::vector<LayerDesc>& layers() const { return layers_; }
  const Shape& input_shape() const { return input_shape_; }
  std::size_t input_size() const { return shape_size(input_shape_); }
  std::size_t num_classes() const { return num_classes_; }
  const std::string& descriptor() const { return descriptor_; }

  // Parameter tensors in ParamSet order: weight then bias per layer.
  const std::vector<ParamInfo>& param_layout() const { return layout_; }
  std::size_t total_params() const;

  // Index of the last dense layer's weight within param_layout(); its bias
  // follows at +1. This is the fully connected head label recovery reads.
  std::size_t fc_weight_index() const;

  friend bool operator==(const ModelSpec& a, const ModelSpec& b) { return a.descriptor_ == b.descriptor_; }

 private:
  void validate_and_layout();

  std::vector<LayerDesc> layers_;
  Shape input_shape_;
  std::size_t num_classes_;
  std::string descriptor_;
  std::vector<ParamInfo> layout_;
};

// Hard integer labels or soft per-class scores (turned into targets via softmax).
class Labels {
 public:
  static Labels hard(std::vector<std::size_t> classes);
  static Labels soft(Tensor scores);

  bool is_hard() const { return std::holds_alternative<std::vector<std::size_t>>(value_); }
  const std::vector<std::size_t>& classes() const { return std::get<std::vector<std::size_t>>(value_); }
  const Tensor& scores() const { return std::get<Tensor>(value_); }
  std::size_t batch() const;

  // Throws unless every hard label is < num_classes and soft rows have N columns.
  void validate(std::size_t num_classes) const;

  friend bool operator==(const Labels&, const Labels&) = default;

 private:
  explicit Labels(std::variant<std::vector<std::size_t>, Tensor> v) : value_(std::move(v)) {}
  std::variant<std::vector<std::size_t>, Tensor> value_;
};

class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::vector<std::pair<std::string, Tensor>> layers);

  const std::vector<std::pair<std::string, Tensor>>& layers() const { return layers_; }
  std::size_t num_layers() const { return layers_.size(); }
  const Tensor& operator[](std::size_t i) const { return layers_[i].second; }
  Tensor& operator[](std::size_t i) { return layers_[i].second; }
  std::size_t total_dim() const { return total_dim_; }

  // Offset of layer i in the flattened vector.
  std::size_t offset(std::size_t i) const;

  std::vector<double> flatten() const;
  // Same layout as *this, values taken from `flat`.
  ParamSet unflatten(std::span<const double> flat) const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<std::pair<std::string, Tensor>> layers_;
  std::size_t total_dim_ = 0;
};

// Glorot-uniform weights, zero biases.
ParamSet init_params(const ModelSpec& spec, std::uint64_t seed);
ParamSet zero_params(const ModelSpec& spec);

// Logits (b x N).
Tensor predict(const ModelSpec& spec, const ParamSet& params, const Tensor& x);

// w - lr * g
ParamSet sgd_step(const ParamSet& params, std::span<const double> gradient, double lr);

// Batch size of x for this model; throws on a shape mismatch.
std::size_t batch_size_of(const ModelSpec& spec, const Tensor& x);

// One-hot (b x N) constant targets.
Tensor one_hot(const std::vector<std::size_t>& classes, std::size_t num_classes);

namespace ad {

// Builds the forward pass on `graph`; `params` are per-layer vars in
// ParamSet order. Returns logits (b x N).
Var build_logits(const ModelSpec& spec, std::span<const Var> params, Var x);

// Mean softmax cross-entropy against probability targets (b x N).
Var cross_entropy(Var logits, Var target_probs);

// Mean softmax cross-entropy for Labels (hard → one-hot, soft → softmax(scores)).
Var cross_entropy(Var logits, const Labels& labels);

}  // namespace ad
}  // namespace gradleak
