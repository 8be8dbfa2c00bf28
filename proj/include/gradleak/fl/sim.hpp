#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gradleak/fl/observation.hpp"
#include "gradleak/io/dataset.hpp"
#include "gradleak/model/model.hpp"

namespace gradleak {

enum class DefenseOrder { kSparsifyThenNoise, kNoiseThenSparsify };

struct FederationConfig {
  std::size_t num_clients = 1;          // K
  double client_fraction = 1.0;         // in (0, 1]
  std::size_t rounds = 1;               // T_0
  std::size_t batch_size = 1;           // b
  double lr = 0.1;
  std::vector<double> client_weights;   // λ_k; empty means all 1
  double dp_sigma = 0.0;
  double sparsify_p = 0.0;              // in [0, 1)
  DefenseOrder defense_order = DefenseOrder::kSparsifyThenNoise;
  std::uint64_t seed = 0;

  void validate() const;
  double lambda(std::size_t client) const;
};

// Σ (λ_k / K) g_k with K = gradients.size().
std::vector<double> aggregate_updates(std::span<const std::vector<double>> gradients, std::span<const double> lambda);

// max(1, round(fraction·K)) distinct sorted ids, keyed on (seed, round).
std::vector<std::size_t> sample_clients(std::size_t num_clients, double fraction, std::size_t round,
                                        std::uint64_t seed);

// g + N(0, σ²) per coordinate.
std::vector<double> apply_dp_noise(std::span<const double> g, double sigma, std::uint64_t seed);

// Zeroes the floor(p·dim) smallest-magnitude coordinates; ties go to the lower index.
std::vector<double> sparsify(std::span<const double> g, double p);

// Fixed batch partition of a client's n samples: a seeded shuffle cut into
// floor(n / b) batches. The remainder is never used.
std::vector<std::vector<std::size_t>> client_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                     std::size_t client);

struct FedResult {
  ParamSet final_params;
  std::vector<GradObservation> log;
};

// FedSGD: each round samples clients; each sampled client computes the
// gradient of its next batch (cycling through its partition), applies the
// defenses, and uploads. The server applies the λ-weighted mean.
FedResult run_fedsgd(const FederationConfig& fed, const ModelSpec& spec, const std::vector<Dataset>& clients,
                     std::optional<ParamSet> initial = std::nullopt);

namespace evaluation {

struct GroundTruth {
  Tensor images;
  Labels labels;
};

// The batch a client used for an observation, recomputed from the
// deterministic partition.
GroundTruth batch_for(const FederationConfig& fed, const std::vector<Dataset>& clients, const GradObservation& obs);

}  // namespace evaluation
}  // namespace gradleak
