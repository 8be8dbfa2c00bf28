#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "gradleak/error.hpp"
#include "gradleak/metrics/metrics.hpp"
#include "unit/reference.hpp"

using namespace gradleak;

namespace {

Tensor image(Shape s, std::uint64_t seed) {
  return Tensor::from_data(s, testing::random_vector(shape_size(s), seed, 0.0, 1.0));
}

// Window-by-window SSIM with explicit loops; single channel (H, W).
double ssim_reference(const Tensor& a, const Tensor& b) {
  const std::size_t h = a.dim(0), w = a.dim(1);
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t y = 0; y + 8 <= h; ++y)
    for (std::size_t x = 0; x + 8 <= w; ++x) {
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
          ma += a[(y + i) * w + x + j];
          mb += b[(y + i) * w + x + j];
        }
      ma /= 64;
      mb /= 64;
      double va = 0, vb = 0, cv = 0;
      for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
          const double da = a[(y + i) * w + x + j] - ma, db = b[(y + i) * w + x + j] - mb;
          va += da * da;
          vb += db * db;
          cv += da * db;
        }
      va /= 64;
      vb /= 64;
      cv /= 64;
      const double c1 = 1e-4, c2 = 9e-4;
      total += (2 * ma * mb + c1) * (2 * cv + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  return total / static_cast<double>(windows);
}

}  // namespace

TEST_CASE("mse examples") {
  const Tensor a = image({4, 4}, 1);
  CHECK(mse(a, a) == 0.0);
  CHECK(mse(Tensor::from_data({2}, {0, 1}), Tensor::from_data({2}, {1, 1})) == 0.5);
  const Tensor b = image({4, 4}, 2);
  double acc = 0;
  for (std::size_t i = 0; i < 16; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  CHECK(mse(a, b) == doctest::Approx(acc / 16).epsilon(1e-14));
  CHECK_THROWS_AS(mse(a, Tensor({2, 8})), Error);
}

TEST_CASE("psnr examples and monotonicity") {
  CHECK(psnr(0.01) == doctest::Approx(20.0).epsilon(1e-14));
  CHECK(psnr(1.0) == 0.0);
  CHECK(std::isinf(psnr(0.0)));
  CHECK(psnr_capped(0.0) == 99.0);
  double prev = psnr(1e-6);
  for (double m = 2e-6; m < 1.0; m *= 1.7) {
    const double p = psnr(m);
    CHECK(p < prev);
    prev = p;
  }
  CHECK_THROWS_AS(psnr(-1.0), Error);
}

TEST_CASE("ssim examples") {
  const Tensor a = image({16, 16}, 3);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-14));

  const double c1 = 0.2, c2 = 0.7;
  const double expected = (2 * c1 * c2 + 1e-4) / (c1 * c1 + c2 * c2 + 1e-4);
  CHECK(ssim(Tensor({12, 12}, c1), Tensor({12, 12}, c2)) == doctest::Approx(expected).epsilon(1e-12));

  const Tensor b = image({16, 16}, 4);
  CHECK(std::abs(ssim(a, b) - ssim_reference(a, b)) <= 1e-10);
  CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-12);
  CHECK_THROWS_AS(ssim(Tensor({7, 9}), Tensor({7, 9})), Error);
}

TEST_CASE("ssim averages channels") {
  const Tensor rgb1 = image({3, 10, 10}, 5), rgb2 = image({3, 10, 10}, 6);
  double acc = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    auto slice = [&](const Tensor& t) {
      return Tensor::from_data({10, 10}, std::vector<double>(t.data().begin() + c * 100, t.data().begin() + (c + 1) * 100));
    };
    acc += ssim_reference(slice(rgb1), slice(rgb2));
  }
  CHECK(ssim(rgb1, rgb2) == doctest::Approx(acc / 3).epsilon(1e-10));
}

TEST_CASE("match_batch pairs a permuted reconstruction exactly") {
  std::vector<Tensor> truth = {image({1, 8, 8}, 10), image({1, 8, 8}, 11), image({1, 8, 8}, 12)};
  std::vector<Tensor> recon = {truth[2], truth[0], truth[1]};
  const auto r = match_batch(recon, truth);
  CHECK(r.permutation == std::vector<std::size_t>{1, 2, 0});
  for (double m : r.mse) CHECK(m == 0.0);
  CHECK(r.mean_psnr == 99.0);
  CHECK(r.mean_ssim == doctest::Approx(1.0));

  const auto single = match_batch({recon[0]}, {truth[0]});
  CHECK(single.permutation == std::vector<std::size_t>{0});
}

TEST_CASE("greedy matching versus brute force") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> noise(0.0, 0.05);
  int agree = 0, total = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = 2 + trial % 3;
    std::vector<Tensor> truth, recon;
    for (std::size_t i = 0; i < b; ++i) truth.push_back(image({1, 8, 8}, 1000 + trial * 10 + i));
    std::vector<std::size_t> perm(b);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    // Noisy, sometimes heavily so, so that greedy can be fooled.
    const double scale = trial % 4 == 0 ? 8.0 : 1.0;
    for (std::size_t i = 0; i < b; ++i) {
      Tensor t = truth[perm[i]];
      for (double& v : t.data()) v = std::clamp(v + scale * noise(rng), 0.0, 1.0);
      recon.push_back(t);
    }
    const auto report = match_batch(recon, truth);

    std::vector<std::size_t> p(b);
    std::iota(p.begin(), p.end(), 0);
    double best = 1e300;
    do {
      double acc = 0;
      for (std::size_t t = 0; t < b; ++t) acc += mse(recon[p[t]], truth[t]);
      best = std::min(best, acc / static_cast<double>(b));
    } while (std::next_permutation(p.begin(), p.end()));

    ++total;
    if (std::abs(report.mean_mse - best) <= 1e-15) {
      ++agree;
    } else {
      CHECK(report.mean_mse < 1.05 * best);
    }
  }
  CHECK(agree >= 0.95 * total);
}

TEST_CASE("b=3 constructed case matches the optimal assignment") {
  std::vector<Tensor> truth = {Tensor({1, 8, 8}, 0.1), Tensor({1, 8, 8}, 0.5), Tensor({1, 8, 8}, 0.9)};
  std::vector<Tensor> recon = {Tensor({1, 8, 8}, 0.52), Tensor({1, 8, 8}, 0.85), Tensor({1, 8, 8}, 0.15)};
  const auto r = match_batch(recon, truth);
  CHECK(r.permutation == std::vector<std::size_t>{2, 0, 1});
}

TEST_CASE("match_batch metrics are invariant to reconstruction order") {
  std::vector<Tensor> truth, recon;
  for (std::size_t i = 0; i < 4; ++i) {
    truth.push_back(image({1, 8, 8}, 50 + i));
    Tensor r = truth.back();
    r[i] += 0.3;
    recon.push_back(r);
  }
  const auto a = match_batch(recon, truth);
  std::reverse(recon.begin(), recon.end());
  const auto b = match_batch(recon, truth);
  CHECK(a.mse == b.mse);
  CHECK(a.mean_psnr == b.mean_psnr);
  CHECK(a.mean_ssim == b.mean_ssim);
}
