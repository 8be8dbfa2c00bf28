#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gradleak/fl/observation.hpp"

namespace gradleak {

struct GradientLog {
  std::string descriptor;  // model descriptor, e.g. "mlp:784-64-10:sigmoid"
  std::size_t p = 0;
  std::vector<GradObservation> observations;
};

// "TGLOG1", descriptor line, p (u32), count (u32), then per record
// round, client, batch_tag (u32) and w, g as p little-endian f32 each.
void write_log(const std::filesystem::path& path, const std::string& descriptor,
               std::span<const GradObservation> observations);
GradientLog read_log(const std::filesystem::path& path);

}  // namespace gradleak
