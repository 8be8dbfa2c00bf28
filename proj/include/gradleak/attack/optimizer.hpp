#pragma once

#include <cstddef>
#include <functional>

#include "gradleak/ad/gradients.hpp"
#include "gradleak/tensor.hpp"

namespace gradleak {

enum class OptimizerKind { kGD, kLBFGS };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kLBFGS;
  double lr = 1.0;  // η for GD, initial trial step for LBFGS
  std::size_t history = 10;
  std::size_t max_line_search = 20;

  static OptimizerConfig gd(double eta) { return {OptimizerKind::kGD, eta, 10, 20}; }
  static OptimizerConfig lbfgs(double lr = 1.0) { return {OptimizerKind::kLBFGS, lr, 10, 20}; }
};

// Loss and gradient at x. May throw Error(kOverflow) for non-finite values.
using Objective = std::function<LossAndGradient(const Tensor&)>;

struct OptimizeResult {
  Tensor x;
  double loss = 0.0;  // at x
  std::size_t steps = 0;
  bool collapsed = false;  // diverged; x is the last finite iterate
  bool stalled = false;    // LBFGS line search found no acceptable point
};

// Non-finite loss or ||x|| > 10³·√n.
bool diverged(double loss, const Tensor& x);

// Runs `steps` iterations from x0. With `unit_box` every iterate is clamped
// to [0, 1]. The LBFGS history starts empty on every call.
OptimizeResult minimize(const Objective& f, Tensor x0, std::size_t steps, const OptimizerConfig& config,
                        bool unit_box);

}  // namespace gradleak
