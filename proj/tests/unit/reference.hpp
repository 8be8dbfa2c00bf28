#pragma once

// Straight-line evaluators used as oracles. They share no code with the
// graph engine: plain loops over std::vector, written for clarity.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

namespace gradleak::testing {

using Matrix = std::vector<std::vector<double>>;

inline double sigmoid_ref(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Dense layer: out[i][o] = Σ_k in[i][k] W[o][k] + bias[o]
inline Matrix dense_ref(const Matrix& in, const std::vector<double>& w, const std::vector<double>& bias,
                        std::size_t out_dim) {
  const std::size_t in_dim = in.front().size();
  Matrix out(in.size(), std::vector<double>(out_dim, 0.0));
  for (std::size_t i = 0; i < in.size(); ++i)
    for (std::size_t o = 0; o < out_dim; ++o) {
      double acc = bias[o];
      for (std::size_t k = 0; k < in_dim; ++k) acc += in[i][k] * w[o * in_dim + k];
      out[i][o] = acc;
    }
  return out;
}

inline double mean_cross_entropy_ref(const Matrix& logits, const std::vector<std::size_t>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    double peak = logits[i][0];
    for (double v : logits[i]) peak = std::max(peak, v);
    double acc = 0.0;
    for (double v : logits[i]) acc += std::exp(v - peak);
    total += peak + std::log(acc) - logits[i][labels[i]];
  }
  return total / static_cast<double>(logits.size());
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace gradleak::testing

namespace gradleak::testing {

// Hand-written backprop for a dense MLP with one activation kind between
// layers. Weights are (out x in) row-major. Returns the flat gradient in
// (W0, b0, W1, b1, ...) order for the mean cross-entropy loss.
struct MlpRef {
  std::vector<std::size_t> widths;
  bool sigmoid = true;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  double act(double v) const { return sigmoid ? sigmoid_ref(v) : (v > 0 ? v : 0.0); }
  double act_grad_from_output(double out, double pre) const {
    return sigmoid ? out * (1.0 - out) : (pre > 0 ? 1.0 : 0.0);
  }

  std::vector<double> param_gradient(const Matrix& x, const std::vector<std::size_t>& labels,
                                     double* loss_out = nullptr) const {
    const std::size_t layers = widths.size() - 1;
    std::vector<Matrix> pre(layers), post(layers + 1);
    post[0] = x;
    for (std::size_t l = 0; l < layers; ++l) {
      pre[l] = dense_ref(post[l], weights[l], biases[l], widths[l + 1]);
      post[l + 1] = pre[l];
      if (l + 1 < layers)
        for (auto& row : post[l + 1])
          for (double& v : row) v = act(v);
    }
    if (loss_out) *loss_out = mean_cross_entropy_ref(pre[layers - 1], labels);
    const double b = static_cast<double>(x.size());
    // delta at logits: (softmax - onehot) / b
    Matrix delta = pre[layers - 1];
    for (std::size_t i = 0; i < delta.size(); ++i) {
      double peak = delta[i][0];
      for (double v : delta[i]) peak = std::max(peak, v);
      double z = 0.0;
      for (double v : delta[i]) z += std::exp(v - peak);
      for (std::size_t c = 0; c < delta[i].size(); ++c)
        delta[i][c] = (std::exp(delta[i][c] - peak) / z - (c == labels[i] ? 1.0 : 0.0)) / b;
    }
    std::vector<std::vector<double>> gw(layers), gb(layers);
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = widths[l], out = widths[l + 1];
      gw[l].assign(out * in, 0.0);
      gb[l].assign(out, 0.0);
      for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t o = 0; o < out; ++o) {
          gb[l][o] += delta[i][o];
          for (std::size_t k = 0; k < in; ++k) gw[l][o * in + k] += delta[i][o] * post[l][i][k];
        }
      if (l == 0) break;
      Matrix next(x.size(), std::vector<double>(in, 0.0));
      for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t k = 0; k < in; ++k) {
          double acc = 0.0;
          for (std::size_t o = 0; o < out; ++o) acc += delta[i][o] * weights[l][o * in + k];
          next[i][k] = acc * act_grad_from_output(post[l][i][k], pre[l - 1][i][k]);
        }
      delta = std::move(next);
    }
    std::vector<double> flat;
    for (std::size_t l = 0; l < layers; ++l) {
      flat.insert(flat.end(), gw[l].begin(), gw[l].end());
      flat.insert(flat.end(), gb[l].begin(), gb[l].end());
    }
    return flat;
  }
};

}  // namespace gradleak::testing
