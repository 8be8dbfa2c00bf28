#include <algorithm>
#include <cmath>
#include <random>

#include "gradleak/error.hpp"
#include "gradleak/io/dataset.hpp"

namespace gradleak {
namespace {

struct Blob {
  double cy, cx, radius, amplitude;
};

constexpr int kBlobsPerClass = 3;

}  // namespace

Dataset synth_dataset(std::size_t n, const Shape& image_shape, std::size_t num_classes, std::uint64_t seed) {
  require(image_shape.size() == 3, ErrorKind::kShape, "image shape must be (C, H, W)");
  require(num_classes >= 1 && n >= num_classes, ErrorKind::kInvalidArgument,
          "need n >= num_classes (" + std::to_string(n) + " < " + std::to_string(num_classes) + ")");
  const std::size_t c = image_shape[0], h = image_shape[1], w = image_shape[2];
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Per class and channel: a few blob centres.
  std::vector<Blob> protos(num_classes * c * kBlobsPerClass);
  for (auto& b : protos) {
    b.cy = unit(rng) * static_cast<double>(h - 1);
    b.cx = unit(rng) * static_cast<double>(w - 1);
    b.radius = (0.1 + 0.15 * unit(rng)) * static_cast<double>(std::min(h, w));
    b.amplitude = 0.6 + 0.4 * unit(rng);
  }

  std::vector<double> pixels(n * c * h * w);
  std::vector<std::size_t> labels(n);
  const double jitter = 0.06 * static_cast<double>(std::min(h, w));
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i % num_classes;
    for (std::size_t ch = 0; ch < c; ++ch) {
      double* img = pixels.data() + ((i * c) + ch) * h * w;
      for (int k = 0; k < kBlobsPerClass; ++k) {
        Blob b = protos[(labels[i] * c + ch) * kBlobsPerClass + k];
        b.cy += jitter * normal(rng);
        b.cx += jitter * normal(rng);
        b.amplitude *= 1.0 + 0.1 * normal(rng);
        const double inv = 1.0 / (2.0 * b.radius * b.radius);
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) {
            const double dy = static_cast<double>(y) - b.cy, dx = static_cast<double>(x) - b.cx;
            img[y * w + x] += b.amplitude * std::exp(-(dy * dy + dx * dx) * inv);
          }
      }
      for (std::size_t p = 0; p < h * w; ++p) img[p] = std::clamp(img[p] + 0.05 * normal(rng), 0.0, 1.0);
    }
  }
  return {Tensor::adopt({n, c, h, w}, std::move(pixels)), std::move(labels), num_classes};
}

}  // namespace gradleak
