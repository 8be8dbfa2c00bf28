#pragma once

#include <filesystem>

#include "gradleak/tensor.hpp"

namespace gradleak {

// (1, H, W) or (H, W) → binary PGM; (3, H, W) → binary PPM. Pixels are
// round(clamp(v, 0, 1)·255).
void write_image(const std::filesystem::path& path, const Tensor& image);

// Reads P5/P6 (maxval ≤ 255) into (C, H, W) values in [0, 1].
Tensor read_image(const std::filesystem::path& path);

}  // namespace gradleak
