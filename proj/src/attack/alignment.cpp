#include "gradleak/attack/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gradleak/attack/label_recovery.hpp"
#include "gradleak/error.hpp"
#include "gradleak/fl/sim.hpp"
#include "gradleak/rng.hpp"
#include "gradleak/simd/kernels.hpp"

namespace gradleak {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::kShape, "cosine of vectors with different dimensions");
  const double na = std::sqrt(simd::dot(a, a)), nb = std::sqrt(simd::dot(b, b));
  require(na > 0.0 && nb > 0.0, ErrorKind::kInvalidArgument, "cosine of a zero vector");
  return simd::dot(a, b) / (na * nb);
}

Clusters cosine_components(std::span<const GradObservation> observations, std::span<const std::size_t> members,
                           double cos_threshold) {
  std::vector<std::size_t> live;
  Clusters out;
  for (std::size_t i : members) {
    const auto& g = observations[i].gradient();
    if (simd::dot(g, g) == 0.0) {
      out.push_back({i});
    } else {
      live.push_back(i);
    }
  }
  std::vector<std::size_t> parent(live.size());
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (std::size_t a = 0; a < live.size(); ++a)
    for (std::size_t b = a + 1; b < live.size(); ++b) {
      if (cosine_similarity(observations[live[a]].gradient(), observations[live[b]].gradient()) >= cos_threshold) {
        parent[find(b)] = find(a);
      }
    }
  std::map<std::size_t, std::vector<std::size_t>> comps;
  for (std::size_t a = 0; a < live.size(); ++a) comps[find(a)].push_back(live[a]);
  for (auto& [root, c] : comps) out.push_back(std::move(c));
  for (auto& c : out) std::sort(c.begin(), c.end());
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.front() < y.front(); });
  return out;
}

Clusters align_gradients(std::span<const GradObservation> observations, const ModelSpec& spec,
                         const AlignmentConfig& config) {
  if (observations.empty()) return {};
  const std::size_t p = observations.front().dim();
  for (const auto& o : observations)
    require(o.dim() == p, ErrorKind::kShape, "observations differ in parameter dimension");

  std::map<std::vector<std::size_t>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto rec = recover_labels(fc_slice(spec, observations[i]), config.batch_size, config.label_steps,
                                    derive_seed(config.seed, {0x1abe1, i}), LabelDecoding::kColumnMass,
                                    OptimizerConfig::lbfgs(), config.label_restarts);
    groups[rec.labels.classes()].push_back(i);
  }
  Clusters out;
  for (const auto& [labels, members] : groups) {
    auto comps = cosine_components(observations, members, config.cos_threshold);
    out.insert(out.end(), std::make_move_iterator(comps.begin()), std::make_move_iterator(comps.end()));
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.front() < y.front(); });
  return out;
}

double evaluation::alignment_accuracy(const Clusters& clusters, std::span<const GradObservation> observations) {
  require(!observations.empty(), ErrorKind::kInvalidArgument, "no observations");
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::size_t>> truth;
  for (std::size_t i = 0; i < observations.size(); ++i)
    truth[{observations[i].client(), batch_tag(observations[i])}].push_back(i);
  std::size_t correct = 0;
  for (const auto& c : clusters) {
    for (std::size_t i : c) {
      require(i < observations.size(), ErrorKind::kInvalidArgument, "cluster member out of range");
      if (truth.at({observations[i].client(), batch_tag(observations[i])}) == c) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(observations.size());
}

}  // namespace gradleak
