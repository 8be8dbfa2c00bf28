#pragma once

#include <cstdint>

#include "gradleak/attack/optimizer.hpp"
#include "gradleak/fl/observation.hpp"
#include "gradleak/model/model.hpp"

namespace gradleak {

// The last dense layer (N×M weight, N bias) at one snapshot, with its
// leaked gradient.
struct FcSlice {
  Tensor weight;
  Tensor bias;
  Tensor weight_grad;
  Tensor bias_grad;
  // Activation producing the FC input (kSigmoid or kRelu), or kDense for none.
  LayerKind input_activation = LayerKind::kDense;
};

FcSlice fc_slice(const ModelSpec& spec, const GradObservation& obs);

// How the optimized soft labels become a label multiset. kRowArgmax takes
// each row's argmax; kColumnMass rounds the per-class soft-label mass
// (column sums of softmax(ŷ)) to b labels by largest remainder.
enum class LabelDecoding { kColumnMass, kRowArgmax };

struct LabelRecovery {
  Labels labels;  // hard, sorted ascending
  std::vector<double> class_mass;  // column sums of softmax(ŷ)
  double loss = 0.0;
  std::size_t steps = 0;
  bool converged = false;
};

// Dummy optimization over (x̂_FC ∈ R^{b×M}, ŷ ∈ R^{b×N}), both N(0,1)
// initialized, treating the FC layer as a standalone linear +
// softmax-cross-entropy model and matching its weight and bias gradients.
// When the FC input comes from an activation, x̂_FC is passed through it.
// The multiset is read out of ŷ per `decoding`. Runs that end unconverged
// are retried from fresh draws up to `restarts` times in total; the lowest
// loss wins.
LabelRecovery recover_labels(const FcSlice& fc, std::size_t b, std::size_t steps, std::uint64_t seed,
                             LabelDecoding decoding = LabelDecoding::kColumnMass,
                             const OptimizerConfig& optimizer = OptimizerConfig::lbfgs(), std::size_t restarts = 1);

// Largest-remainder rounding of non-negative class masses to `total` labels
// (ties to the lower class), returned as a sorted multiset.
std::vector<std::size_t> round_class_mass(std::span<const double> mass, std::size_t total);

// |multiset intersection| / b.
double multiset_accuracy(std::vector<std::size_t> recovered, std::vector<std::size_t> truth);

}  // namespace gradleak
