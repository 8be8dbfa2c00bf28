#include "gradleak/metrics/metrics.hpp"

#include <cmath>
#include <limits>

#include "gradleak/error.hpp"
#include "gradleak/simd/kernels.hpp"

namespace gradleak {
namespace {

constexpr std::size_t kWindow = 8;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

// Sums over every kWindow×kWindow window, (h−7)×(w−7) outputs.
std::vector<double> box_sums(const std::vector<double>& img, std::size_t h, std::size_t w) {
  const std::size_t ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += img[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

double ssim_channel(const double* a, const double* b, std::size_t h, std::size_t w) {
  const std::size_t n = h * w;
  std::vector<double> va(a, a + n), vb(b, b + n), aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto sa = box_sums(va, h, w), sb = box_sums(vb, h, w);
  const auto saa = box_sums(aa, h, w), sbb = box_sums(bb, h, w), sab = box_sums(ab, h, w);
  const double inv = 1.0 / static_cast<double>(kWindow * kWindow);
  double total = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double mu_a = sa[i] * inv, mu_b = sb[i] * inv;
    const double var_a = saa[i] * inv - mu_a * mu_a;
    const double var_b = sbb[i] * inv - mu_b * mu_b;
    const double cov = sab[i] * inv - mu_a * mu_b;
    total += ((2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2)) /
             ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
  }
  return total / static_cast<double>(sa.size());
}

}  // namespace

double mse(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), ErrorKind::kShape,
          "mse: " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  return simd::squared_distance(a.data(), b.data()) / static_cast<double>(a.size());
}

double psnr(double mse_value, double max_value) {
  require(mse_value >= 0.0, ErrorKind::kInvalidArgument, "mse must be non-negative");
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / mse_value);
}

double psnr_capped(double mse_value, double max_value) {
  const double v = psnr(mse_value, max_value);
  return std::isinf(v) ? kPsnrCapDb : v;
}

double ssim(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), ErrorKind::kShape,
          "ssim: " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  require(a.rank() == 2 || a.rank() == 3, ErrorKind::kShape, "ssim expects (H, W) or (C, H, W) images");
  const std::size_t c = a.rank() == 3 ? a.dim(0) : 1;
  const std::size_t h = a.shape()[a.rank() - 2], w = a.shape()[a.rank() - 1];
  require(h >= kWindow && w >= kWindow, ErrorKind::kShape,
          "image " + shape_to_string(a.shape()) + " is smaller than the 8x8 SSIM window");
  double total = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    total += ssim_channel(a.data().data() + ch * h * w, b.data().data() + ch * h * w, h, w);
  }
  return total / static_cast<double>(c);
}

MetricReport match_batch(const std::vector<Tensor>& recon, const std::vector<Tensor>& truth) {
  require(recon.size() == truth.size(), ErrorKind::kShape, "reconstruction and truth batch sizes differ");
  const std::size_t b = truth.size();
  std::vector<double> cost(b * b);
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t t = 0; t < b; ++t) cost[r * b + t] = mse(recon[r], truth[t]);

  MetricReport report;
  report.permutation.assign(b, 0);
  std::vector<char> used_r(b, 0), used_t(b, 0);
  for (std::size_t step = 0; step < b; ++step) {
    std::size_t best_r = 0, best_t = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < b; ++r) {
      if (used_r[r]) continue;
      for (std::size_t t = 0; t < b; ++t) {
        if (used_t[t]) continue;
        if (cost[r * b + t] < best) {
          best = cost[r * b + t];
          best_r = r;
          best_t = t;
        }
      }
    }
    used_r[best_r] = used_t[best_t] = 1;
    report.permutation[best_t] = best_r;
  }

  std::size_t pixels = 0;
  double squared = 0.0;
  for (std::size_t t = 0; t < b; ++t) {
    const Tensor& r = recon[report.permutation[t]];
    const double m = cost[report.permutation[t] * b + t];
    report.mse.push_back(m);
    report.psnr.push_back(psnr_capped(m));
    report.ssim.push_back(ssim(r, truth[t]));
    squared += m * static_cast<double>(truth[t].size());
    pixels += truth[t].size();
    report.mean_psnr += report.psnr.back() / static_cast<double>(b);
    report.mean_ssim += report.ssim.back() / static_cast<double>(b);
  }
  report.mean_mse = pixels ? squared / static_cast<double>(pixels) : 0.0;
  return report;
}

std::vector<Tensor> split_batch(const Tensor& batch, const Shape& image_shape) {
  const std::size_t per = shape_size(image_shape);
  require(per > 0 && batch.size() % per == 0, ErrorKind::kShape,
          "batch of " + std::to_string(batch.size()) + " values is not a multiple of " + shape_to_string(image_shape));
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < batch.size() / per; ++i) {
    out.push_back(Tensor::adopt(image_shape, std::vector<double>(batch.data().begin() + i * per,
                                                                  batch.data().begin() + (i + 1) * per)));
  }
  return out;
}

}  // namespace gradleak
