#include "gradleak/robust/aggregate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gradleak/error.hpp"
#include "gradleak/simd/kernels.hpp"

namespace gradleak {
namespace {

std::size_t check_inputs(std::span<const Vector> vectors) {
  require(!vectors.empty(), ErrorKind::kInvalidArgument, "aggregate needs at least one vector");
  const std::size_t n = vectors.front().size();
  for (const auto& v : vectors) {
    require(v.size() == n, ErrorKind::kShape, "aggregate: vectors differ in dimension");
  }
  return n;
}

// Reference-shifted mean: exact when all inputs agree.
Vector weighted_mean(std::span<const Vector> vectors, std::span<const double> weights) {
  const std::size_t n = vectors.front().size();
  Vector out = vectors.front();
  Vector diff(n);
  for (std::size_t t = 1; t < vectors.size(); ++t) {
    simd::active().sub(vectors[t].data(), vectors.front().data(), diff.data(), n);
    simd::axpy(weights[t], diff, out);
  }
  return out;
}

Vector coordinate_median(std::span<const Vector> vectors) {
  const std::size_t n = vectors.front().size(), count = vectors.size();
  Vector out(n), column(count);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < count; ++t) column[t] = vectors[t][i];
    std::sort(column.begin(), column.end());
    out[i] = count % 2 ? column[count / 2] : 0.5 * (column[count / 2 - 1] + column[count / 2]);
  }
  return out;
}

Vector coordinate_trimmed_mean(std::span<const Vector> vectors, double beta) {
  require(beta >= 0.0 && beta < 0.5, ErrorKind::kInvalidArgument, "trimmed mean needs 0 <= beta < 0.5");
  const std::size_t n = vectors.front().size(), count = vectors.size();
  const auto trim = static_cast<std::size_t>(std::floor(beta * static_cast<double>(count)));
  require(2 * trim < count, ErrorKind::kInvalidArgument, "trimmed mean would drop every vector");
  Vector out(n), column(count);
  const double kept = static_cast<double>(count - 2 * trim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < count; ++t) column[t] = vectors[t][i];
    std::sort(column.begin(), column.end());
    const double base = column[trim];
    double acc = 0.0;
    for (std::size_t t = trim + 1; t < count - trim; ++t) acc += column[t] - base;
    out[i] = base + acc / kept;
  }
  return out;
}

}  // namespace

AggregatorKind AggregatorKind::parse(std::string_view text) {
  std::string_view head = text, arg;
  if (const auto open = text.find('('); open != std::string_view::npos) {
    require(text.back() == ')', ErrorKind::kConfig, "bad aggregator '" + std::string(text) + "'");
    head = text.substr(0, open);
    arg = text.substr(open + 1, text.size() - open - 2);
  }
  if (head == "mean" && arg.empty()) return mean();
  if (head == "median" && arg.empty()) return median();
  if (head == "trimmed_mean" || head == "trimmedmean") {
    if (arg.empty()) return trimmed_mean();
    double beta = 0.0;
    std::istringstream in{std::string(arg)};
    require(static_cast<bool>(in >> beta) && in.eof(), ErrorKind::kConfig, "bad trimmed_mean beta '" + std::string(arg) + "'");
    return trimmed_mean(beta);
  }
  if (head == "krum") {
    if (arg.empty()) return krum();
    std::size_t f = 0;
    const auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), f);
    require(ec == std::errc() && p == arg.data() + arg.size(), ErrorKind::kConfig, "bad krum f '" + std::string(arg) + "'");
    return krum(f);
  }
  fail(ErrorKind::kConfig, "unknown aggregator '" + std::string(text) + "'");
}

std::string AggregatorKind::name() const {
  switch (type) {
    case Type::kMean: return "mean";
    case Type::kMedian: return "median";
    case Type::kTrimmedMean: {
      std::ostringstream out;
      out << "trimmed_mean(" << trim_beta << ")";
      return out.str();
    }
    case Type::kKrum: return krum_f ? "krum(" + std::to_string(*krum_f) + ")" : "krum";
  }
  return "?";
}

std::size_t krum_select(std::span<const Vector> vectors, std::size_t f) {
  const std::size_t count = vectors.size();
  require(count >= f + 3, ErrorKind::kInvalidArgument,
          "krum with f=" + std::to_string(f) + " needs at least " + std::to_string(f + 3) + " vectors, got " +
              std::to_string(count));
  check_inputs(vectors);
  std::vector<double> dist(count * count, 0.0);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = i + 1; j < count; ++j)
      dist[i * count + j] = dist[j * count + i] = simd::squared_distance(vectors[i], vectors[j]);
  const std::size_t neighbours = count - f - 2;
  std::size_t best = 0;
  double best_score = 0.0;
  std::vector<double> row;
  for (std::size_t i = 0; i < count; ++i) {
    row.clear();
    for (std::size_t j = 0; j < count; ++j)
      if (j != i) row.push_back(dist[i * count + j]);
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(neighbours), row.end());
    const double score = std::accumulate(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(neighbours), 0.0);
    if (i == 0 || score < best_score) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

Vector aggregate(const AggregatorKind& kind, std::span<const Vector> vectors, std::span<const double> weights) {
  check_inputs(vectors);
  switch (kind.type) {
    case AggregatorKind::Type::kMean: {
      std::vector<double> uniform;
      if (weights.empty()) {
        uniform.assign(vectors.size(), 1.0 / static_cast<double>(vectors.size()));
        weights = uniform;
      }
      require(weights.size() == vectors.size(), ErrorKind::kInvalidArgument, "one weight per vector required");
      double total = 0.0;
      for (double w : weights) {
        require(w >= 0.0, ErrorKind::kInvalidArgument, "mean weights must be non-negative");
        total += w;
      }
      require(std::abs(total - 1.0) < 1e-9, ErrorKind::kInvalidArgument, "mean weights must sum to 1");
      return weighted_mean(vectors, weights);
    }
    case AggregatorKind::Type::kMedian:
      return coordinate_median(vectors);
    case AggregatorKind::Type::kTrimmedMean:
      return coordinate_trimmed_mean(vectors, kind.trim_beta);
    case AggregatorKind::Type::kKrum: {
      const std::size_t f = kind.krum_f.value_or((vectors.size() - 1) / 3);
      return vectors[krum_select(vectors, f)];
    }
  }
  fail(ErrorKind::kInvalidArgument, "unknown aggregator");
}

Vector mean_of(std::span<const Vector> vectors) {
  check_inputs(vectors);
  Vector out(vectors.front().size(), 0.0);
  for (const auto& v : vectors) simd::axpy(1.0, v, out);
  for (double& x : out) x /= static_cast<double>(vectors.size());
  return out;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::kShape, "l2_distance: size mismatch");
  return std::sqrt(simd::squared_distance(a, b));
}

DeviationBound deviation_bound(std::span<const Vector> good, std::size_t total) {
  require(!good.empty(), ErrorKind::kInvalidArgument, "deviation_bound needs at least one good vector");
  require(good.size() <= total, ErrorKind::kInvalidArgument, "more good vectors than the total count");
  const Vector center = mean_of(good);
  double kappa = 0.0;
  for (const auto& v : good) kappa = std::max(kappa, l2_distance(v, center));
  const double n = static_cast<double>(center.size());
  return {kappa, std::sqrt(static_cast<double>(good.size()) * n) * kappa};
}

}  // namespace gradleak
