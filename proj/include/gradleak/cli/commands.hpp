#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gradleak/cli/config.hpp"
#include "gradleak/error.hpp"
#include "gradleak/io/csv.hpp"
#include "gradleak/io/dataset.hpp"

namespace gradleak::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitBound = 3;

// kConfig and kInvalidArgument are usage errors; everything else is a data error.
int exit_code(ErrorKind kind);

// MNIST when configured (or, for auto, when both files exist); otherwise the
// synthetic set shaped like the model input. Synthetic defaults to 64 images
// per client when data.samples is 0.
Dataset load_data(const ExperimentConfig& config);
std::string dataset_name(const ExperimentConfig& config);

struct SimulateSummary {
  std::size_t records = 0;
  double initial_loss = 0.0;  // mean training loss over all client data
  double final_loss = 0.0;
};

SimulateSummary cmd_simulate(const ExperimentConfig& config, const std::filesystem::path& log_path);

struct AttackRequest {
  std::filesystem::path log;
  std::optional<AttackMethod> method;  // overrides attack.method
  std::filesystem::path out_dir;
  std::optional<std::uint32_t> batch_tag;  // evaluation mode: pick (client, tag) directly
  std::uint32_t client = 0;
  std::optional<std::size_t> workers;
};

struct AttackOutcome {
  MetricsRow row;
  std::vector<std::size_t> cluster;  // observation indices attacked
  std::vector<std::size_t> cluster_sizes;
};

// Writes recon/, truth/ and pairs/ images under out_dir and appends the CSV
// row to output.csv (default out_dir/metrics.csv).
AttackOutcome cmd_attack(const ExperimentConfig& config, const AttackRequest& request);

struct LabSummary {
  std::size_t theorem1_pass = 0;
  std::size_t theorem1_total = 0;
  std::size_t claim1_pass = 0;
  std::size_t theorem2_pass = 0;
  std::size_t theorem2_total = 0;

  bool all_pass() const {
    return theorem1_pass == theorem1_total && claim1_pass == theorem1_total && theorem2_pass == theorem2_total;
  }
};

// Sweeps "default" (100 families per cell, 50 non-convex seeds) or "quick".
LabSummary cmd_lab(const std::string& sweep, const std::filesystem::path& out_dir, std::uint64_t seed);

struct EvalRow {
  std::string batch;
  std::string truth;
  std::string recon;
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

// Images pair by filename; the batch of `name_k.pgm` is `name`. Within a
// batch reconstructions are re-paired by match_batch. Rows are in truth order.
std::vector<EvalRow> cmd_eval(const std::filesystem::path& recon_dir, const std::filesystem::path& truth_dir,
                              const std::filesystem::path& out_csv);

}  // namespace gradleak::cli
