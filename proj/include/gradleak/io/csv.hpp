#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gradleak {

struct MetricsRow {
  std::string run_id;
  std::string method;
  std::string dataset;
  std::string model;
  std::size_t batch_size = 0;
  std::size_t T = 0;
  std::string aggregator;
  double dp_sigma = 0.0;
  double sparsify_p = 0.0;
  std::uint64_t seed = 0;
  double mse = 0.0;
  double psnr_db = 0.0;  // +inf is written as the 99 dB cap
  double ssim = 0.0;
  double wall_time_s = 0.0;
};

const std::string& metrics_csv_header();

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows, bool header = true);
// Appends, writing the header first when the file is new or empty.
void append_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

// Splits one CSV line on commas; fields may be double-quoted.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace gradleak
