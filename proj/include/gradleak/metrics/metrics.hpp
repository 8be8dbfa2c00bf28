#pragma once

#include <cstddef>
#include <vector>

#include "gradleak/tensor.hpp"

namespace gradleak {

// Written to CSVs in place of +inf for a perfect reconstruction.
inline constexpr double kPsnrCapDb = 99.0;

double mse(const Tensor& a, const Tensor& b);

// 10·log10(max²/mse); +inf when mse == 0.
double psnr(double mse_value, double max_value = 1.0);
double psnr_capped(double mse_value, double max_value = 1.0);

// Mean SSIM over all 8×8 windows (stride 1, uniform weights) of each channel,
// averaged over channels. Images are (C, H, W) or (H, W) with values in [0, 1].
double ssim(const Tensor& a, const Tensor& b);

struct MetricReport {
  // Per truth image, in truth order.
  std::vector<double> mse;
  std::vector<double> psnr;  // capped
  std::vector<double> ssim;
  // permutation[i] = index of the reconstruction paired with truth i.
  std::vector<std::size_t> permutation;

  double mean_mse = 0.0;   // over all pixels
  double mean_psnr = 0.0;  // over images
  double mean_ssim = 0.0;  // over images
};

// Greedy pairing: repeatedly take the globally smallest-MSE unmatched
// (reconstruction, truth) pair.
MetricReport match_batch(const std::vector<Tensor>& recon, const std::vector<Tensor>& truth);

// Splits a (b, C, H, W) batch into b images of shape (C, H, W).
std::vector<Tensor> split_batch(const Tensor& batch, const Shape& image_shape);

}  // namespace gradleak
