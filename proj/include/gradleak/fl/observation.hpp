#pragma once

#include <cstdint>
#include <memory>
#include <vector>

namespace gradleak {

class GradObservation;

namespace evaluation {
// Ground-truth batch identity (the client's local batch index). For scoring
// only; attack code never reads it.
std::uint32_t batch_tag(const GradObservation& obs);
}  // namespace evaluation

// One record of what the server sees: round t, client k, the broadcast
// weights w_t and the uploaded gradient g_t.
class GradObservation {
 public:
  GradObservation(std::uint32_t round, std::uint32_t client, std::shared_ptr<const std::vector<double>> weights,
                  std::vector<double> gradient, std::uint32_t batch_tag);

  std::uint32_t round() const { return round_; }
  std::uint32_t client() const { return client_; }
  const std::vector<double>& weights() const { return *weights_; }
  const std::vector<double>& gradient() const { return gradient_; }
  std::size_t dim() const { return gradient_.size(); }

 private:
  friend std::uint32_t evaluation::batch_tag(const GradObservation& obs);

  std::uint32_t round_;
  std::uint32_t client_;
  std::shared_ptr<const std::vector<double>> weights_;  // shared by all clients of a round
  std::vector<double> gradient_;
  std::uint32_t batch_tag_;
};

}  // namespace gradleak
