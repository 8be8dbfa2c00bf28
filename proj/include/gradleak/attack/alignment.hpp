#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gradleak/attack/optimizer.hpp"
#include "gradleak/fl/observation.hpp"
#include "gradleak/model/model.hpp"

namespace gradleak {

struct AlignmentConfig {
  double cos_threshold = 0.5;
  std::size_t batch_size = 1;
  std::size_t label_steps = 100;
  std::size_t label_restarts = 5;
  std::uint64_t seed = 0;
};

using Clusters = std::vector<std::vector<std::size_t>>;

// Groups observations by recovered label multiset, then splits each group
// into connected components of the graph cos(g_i, g_j) ≥ threshold.
// Zero-norm gradients become singletons. Clusters are ordered by their
// smallest member; members ascend.
Clusters align_gradients(std::span<const GradObservation> observations, const ModelSpec& spec,
                         const AlignmentConfig& config);

// Clustering stage 2 alone, for observations already known to share labels.
Clusters cosine_components(std::span<const GradObservation> observations, std::span<const std::size_t> members,
                           double cos_threshold);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

namespace evaluation {
// Fraction of observations whose cluster is exactly the set sharing its
// (client, batch_tag).
double alignment_accuracy(const Clusters& clusters, std::span<const GradObservation> observations);
}  // namespace evaluation

}  // namespace gradleak
