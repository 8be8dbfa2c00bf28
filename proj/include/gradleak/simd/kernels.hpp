#pragma once

// Inner-loop arithmetic used by the tensor graph, robust aggregation and the
// metrics. Every kernel has a portable scalar reference; vectorized variants
// are picked once at startup from what the CPU reports.
//
// Set GRADLEAK_SIMD=scalar in the environment to force the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace gradleak::simd {

struct KernelTable {
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(const double* a, double c, double* out, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the build has no AVX2 translation unit or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

// The table used by the library. Chosen on first call.
const KernelTable& active();

// Overrides the selection ("scalar", "avx2", "auto"). Returns false if the
// requested table is unavailable; the selection is left unchanged then.
bool select(std::string_view name);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double sum(std::span<const double> a) { return active().sum(a.data(), a.size()); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

}  // namespace gradleak::simd
