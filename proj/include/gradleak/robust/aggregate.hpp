#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gradleak {

using Vector = std::vector<double>;

// How T candidate vectors are combined into one.
struct AggregatorKind {
  enum class Type { kMean, kMedian, kTrimmedMean, kKrum };

  Type type = Type::kMedian;
  double trim_beta = 0.2;                // TrimmedMean: drop ⌊βT⌋ from each end
  std::optional<std::size_t> krum_f;     // Krum: tolerated outliers; default ⌊(T−1)/3⌋

  static AggregatorKind mean() { return {Type::kMean, 0.2, std::nullopt}; }
  static AggregatorKind median() { return {Type::kMedian, 0.2, std::nullopt}; }
  static AggregatorKind trimmed_mean(double beta = 0.2) { return {Type::kTrimmedMean, beta, std::nullopt}; }
  static AggregatorKind krum(std::optional<std::size_t> f = std::nullopt) { return {Type::kKrum, 0.2, f}; }

  // "mean", "median", "trimmed_mean", "trimmed_mean(0.3)", "krum", "krum(2)"
  static AggregatorKind parse(std::string_view text);
  std::string name() const;

  friend bool operator==(const AggregatorKind&, const AggregatorKind&) = default;
};

// Mean = arithmetic (or α-weighted) mean; Median = per-coordinate median,
// even counts average the middle pair; TrimmedMean = per-coordinate mean after
// dropping ⌊βT⌋ smallest and largest; Krum = the input minimizing the summed
// squared distance to its T−f−2 nearest others, lowest index on ties.
//
// `weights` applies to Mean only and must be non-negative and sum to 1.
Vector aggregate(const AggregatorKind& kind, std::span<const Vector> vectors,
                 std::span<const double> weights = {});

// Index of the vector Krum selects.
std::size_t krum_select(std::span<const Vector> vectors, std::size_t f);

struct DeviationBound {
  double kappa_hat = 0.0;  // max_t ||v_t − mean(good)||₂
  double bound = 0.0;      // sqrt((T−m)·n)·κ̂
};

// `good` holds the T−m well-behaved vectors out of T.
DeviationBound deviation_bound(std::span<const Vector> good, std::size_t total);

Vector mean_of(std::span<const Vector> vectors);
double l2_distance(std::span<const double> a, std::span<const double> b);

}  // namespace gradleak
