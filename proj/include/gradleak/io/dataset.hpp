#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gradleak/model/model.hpp"
#include "gradleak/tensor.hpp"

namespace gradleak {

// n images of shape (C, H, W) stored as one (n, C, H, W) tensor in [0, 1].
struct Dataset {
  Tensor images;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  Shape image_shape() const;

  // Throws unless pixel and label ranges hold.
  void validate() const;

  Tensor batch_images(std::span<const std::size_t> indices) const;
  Labels batch_labels(std::span<const std::size_t> indices) const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

// Big-endian IDX files (magic 0x00000803 for images, 0x00000801 for labels).
Dataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

// Class-conditional Gaussian blobs clipped to [0, 1]; label i = i mod num_classes.
Dataset synth_dataset(std::size_t n, const Shape& image_shape, std::size_t num_classes, std::uint64_t seed);

// Contiguous equal shares for K clients; the first n mod K clients get one extra.
std::vector<Dataset> split_clients(const Dataset& data, std::size_t num_clients);

}  // namespace gradleak
