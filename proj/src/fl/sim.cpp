#include "gradleak/fl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gradleak/ad/gradients.hpp"
#include "gradleak/error.hpp"
#include "gradleak/rng.hpp"

namespace gradleak {

GradObservation::GradObservation(std::uint32_t round, std::uint32_t client,
                                 std::shared_ptr<const std::vector<double>> weights, std::vector<double> gradient,
                                 std::uint32_t batch_tag)
    : round_(round), client_(client), weights_(std::move(weights)), gradient_(std::move(gradient)),
      batch_tag_(batch_tag) {
  require(weights_ != nullptr && weights_->size() == gradient_.size(), ErrorKind::kShape,
          "observation weights and gradient differ in dimension");
}

std::uint32_t evaluation::batch_tag(const GradObservation& obs) { return obs.batch_tag_; }

void FederationConfig::validate() const {
  require(num_clients >= 1, ErrorKind::kConfig, "K must be at least 1");
  require(client_fraction > 0.0 && client_fraction <= 1.0, ErrorKind::kConfig, "client_fraction must be in (0, 1]");
  require(batch_size >= 1, ErrorKind::kConfig, "batch size must be at least 1");
  require(std::isfinite(lr), ErrorKind::kConfig, "lr must be finite");
  require(dp_sigma >= 0.0, ErrorKind::kConfig, "dp_sigma must be >= 0");
  require(sparsify_p >= 0.0 && sparsify_p < 1.0, ErrorKind::kConfig, "sparsify_p must be in [0, 1)");
  if (!client_weights.empty()) {
    require(client_weights.size() == num_clients, ErrorKind::kConfig,
            "need one client weight per client (" + std::to_string(num_clients) + ")");
    double total = 0.0;
    for (double l : client_weights) {
      require(l >= 0.0, ErrorKind::kConfig, "client weights must be >= 0");
      total += l;
    }
    require(std::abs(total - static_cast<double>(num_clients)) <= 1e-9 * static_cast<double>(num_clients),
            ErrorKind::kConfig, "client weights must sum to K");
  }
}

double FederationConfig::lambda(std::size_t client) const {
  return client_weights.empty() ? 1.0 : client_weights.at(client);
}

std::vector<double> aggregate_updates(std::span<const std::vector<double>> gradients, std::span<const double> lambda) {
  require(!gradients.empty(), ErrorKind::kInvalidArgument, "no gradients to aggregate");
  require(lambda.size() == gradients.size(), ErrorKind::kShape, "need one weight per gradient");
  const std::size_t dim = gradients.front().size();
  const double k = static_cast<double>(gradients.size());
  std::vector<double> out(dim, 0.0);
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    require(gradients[i].size() == dim, ErrorKind::kShape, "gradients differ in dimension");
    const double c = lambda[i] / k;
    for (std::size_t j = 0; j < dim; ++j) out[j] += c * gradients[i][j];
  }
  return out;
}

std::vector<std::size_t> sample_clients(std::size_t num_clients, double fraction, std::size_t round,
                                        std::uint64_t seed) {
  require(fraction > 0.0 && fraction <= 1.0, ErrorKind::kInvalidArgument, "fraction must be in (0, 1]");
  require(num_clients >= 1, ErrorKind::kInvalidArgument, "need at least one client");
  const auto s = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(num_clients))), 1, num_clients);
  std::vector<std::size_t> ids(num_clients);
  std::iota(ids.begin(), ids.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, {0x5a3d, round}));
  for (std::size_t i = 0; i < s; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, num_clients - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(s);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<double> apply_dp_noise(std::span<const double> g, double sigma, std::uint64_t seed) {
  require(sigma >= 0.0, ErrorKind::kInvalidArgument, "sigma must be >= 0");
  std::vector<double> out(g.begin(), g.end());
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : out) v += noise(rng);
  return out;
}

std::vector<double> sparsify(std::span<const double> g, double p) {
  require(p >= 0.0 && p < 1.0, ErrorKind::kInvalidArgument, "sparsify fraction must be in [0, 1)");
  std::vector<double> out(g.begin(), g.end());
  const auto masked = static_cast<std::size_t>(std::floor(p * static_cast<double>(g.size()) + 1e-9));
  if (masked == 0) return out;
  std::vector<std::size_t> order(g.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(g[a]) < std::abs(g[b]); });
  for (std::size_t i = 0; i < masked; ++i) out[order[i]] = 0.0;
  return out;
}

std::vector<std::vector<std::size_t>> client_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                     std::size_t client) {
  require(n > 0, ErrorKind::kData, "client " + std::to_string(client) + " has an empty dataset");
  require(n >= batch_size, ErrorKind::kData,
          "client " + std::to_string(client) + " has " + std::to_string(n) + " samples, fewer than batch size " +
              std::to_string(batch_size));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, {0xba7c, client}));
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start + batch_size <= n; start += batch_size) {
    out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                     idx.begin() + static_cast<std::ptrdiff_t>(start + batch_size));
  }
  return out;
}

FedResult run_fedsgd(const FederationConfig& fed, const ModelSpec& spec, const std::vector<Dataset>& clients,
                     std::optional<ParamSet> initial) {
  fed.validate();
  require(clients.size() == fed.num_clients, ErrorKind::kConfig,
          "expected " + std::to_string(fed.num_clients) + " client datasets, got " + std::to_string(clients.size()));
  std::vector<std::vector<std::vector<std::size_t>>> partitions;
  for (std::size_t k = 0; k < clients.size(); ++k) {
    partitions.push_back(client_batches(clients[k].size(), fed.batch_size, fed.seed, k));
  }

  FedResult result{initial ? std::move(*initial) : init_params(spec, fed.seed), {}};
  require(result.final_params.total_dim() == spec.total_params(), ErrorKind::kShape,
          "initial parameters do not match the model");
  std::vector<std::size_t> participations(clients.size(), 0);

  for (std::size_t t = 0; t < fed.rounds; ++t) {
    const auto ids = sample_clients(fed.num_clients, fed.client_fraction, t, fed.seed);
    auto snapshot = std::make_shared<const std::vector<double>>(result.final_params.flatten());
    std::vector<std::vector<double>> uploads;
    std::vector<double> lambdas;
    for (std::size_t k : ids) {
      const auto& batches = partitions[k];
      const std::size_t tag = participations[k]++ % batches.size();
      const auto& batch = batches[tag];
      auto g = grad_params(spec, result.final_params, clients[k].batch_images(batch), clients[k].batch_labels(batch));
      const std::uint64_t noise_seed = derive_seed(fed.seed, {0xd9, t, k});
      if (fed.defense_order == DefenseOrder::kSparsifyThenNoise) {
        g = apply_dp_noise(sparsify(g, fed.sparsify_p), fed.dp_sigma, noise_seed);
      } else {
        g = sparsify(apply_dp_noise(g, fed.dp_sigma, noise_seed), fed.sparsify_p);
      }
      result.log.emplace_back(static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(k), snapshot, g,
                              static_cast<std::uint32_t>(tag));
      uploads.push_back(std::move(g));
      lambdas.push_back(fed.lambda(k));
    }
    result.final_params = sgd_step(result.final_params, aggregate_updates(uploads, lambdas), fed.lr);
  }
  return result;
}

evaluation::GroundTruth evaluation::batch_for(const FederationConfig& fed, const std::vector<Dataset>& clients,
                                              const GradObservation& obs) {
  require(obs.client() < clients.size(), ErrorKind::kInvalidArgument, "observation client out of range");
  const auto& data = clients[obs.client()];
  const auto batches = client_batches(data.size(), fed.batch_size, fed.seed, obs.client());
  const auto tag = batch_tag(obs);
  require(tag < batches.size(), ErrorKind::kInvalidArgument, "batch tag out of range");
  return {data.batch_images(batches[tag]), data.batch_labels(batches[tag])};
}

}  // namespace gradleak
