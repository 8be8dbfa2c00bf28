#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "gradleak/attack/attack.hpp"
#include "gradleak/fl/sim.hpp"

namespace gradleak::cli {

enum class AttackMethod { kDlg, kCosine, kTgias };

AttackMethod parse_method(std::string_view text);
std::string_view to_string(AttackMethod method);

enum class DataSource { kAuto, kMnist, kSynth };

struct DataSection {
  DataSource source = DataSource::kAuto;  // auto: MNIST when both files exist, else synthetic
  std::filesystem::path images;
  std::filesystem::path labels;
  std::size_t samples = 0;  // 0 keeps every loaded image; synthetic needs a count
  std::uint64_t seed = 0;   // synthetic generator seed
};

struct OutputSection {
  std::filesystem::path dir;
  std::filesystem::path log;
  std::filesystem::path csv;
};

struct ExperimentConfig {
  FederationConfig federation;
  std::string model = "mlp:1x28x28-64-10:sigmoid";
  AttackMethod method = AttackMethod::kTgias;
  AttackConfig attack;
  double cos_threshold = 0.5;
  DataSection data;
  OutputSection output;
  std::filesystem::path base_dir;  // directory of the config file
};

// Sections [federation], [model], [attack], [data], [output] of `key = value`
// lines. Lists are comma separated; `#` and `;` start comment lines. Unknown
// sections or keys throw ErrorKind::kConfig. Relative paths resolve against
// base_dir.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace gradleak::cli
