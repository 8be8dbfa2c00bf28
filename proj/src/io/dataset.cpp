#include <algorithm>

#include "gradleak/error.hpp"
#include "gradleak/io/dataset.hpp"

namespace gradleak {

Shape Dataset::image_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }

void Dataset::validate() const {
  require(images.rank() == 4, ErrorKind::kData, "dataset images must be (n, C, H, W)");
  require(images.dim(0) == labels.size(), ErrorKind::kData,
          std::to_string(images.dim(0)) + " images but " + std::to_string(labels.size()) + " labels");
  for (double v : images.data())
    require(v >= 0.0 && v <= 1.0, ErrorKind::kData, "pixel value outside [0, 1]");
  for (std::size_t y : labels)
    require(y < num_classes, ErrorKind::kData,
            "label " + std::to_string(y) + " >= num_classes " + std::to_string(num_classes));
}

Tensor Dataset::batch_images(std::span<const std::size_t> indices) const {
  const Shape img = image_shape();
  const std::size_t per = shape_size(img);
  std::vector<double> out;
  out.reserve(indices.size() * per);
  for (std::size_t i : indices) {
    require(i < size(), ErrorKind::kInvalidArgument, "sample index " + std::to_string(i) + " out of range");
    const auto src = images.data().subspan(i * per, per);
    out.insert(out.end(), src.begin(), src.end());
  }
  Shape s{indices.size()};
  s.insert(s.end(), img.begin(), img.end());
  return Tensor::adopt(s, std::move(out));
}

Labels Dataset::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> out;
  for (std::size_t i : indices) {
    require(i < size(), ErrorKind::kInvalidArgument, "sample index " + std::to_string(i) + " out of range");
    out.push_back(labels[i]);
  }
  return Labels::hard(std::move(out));
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  return {batch_images(indices), batch_labels(indices).classes(), num_classes};
}

std::vector<Dataset> split_clients(const Dataset& data, std::size_t num_clients) {
  require(num_clients >= 1, ErrorKind::kInvalidArgument, "need at least one client");
  require(data.size() >= num_clients, ErrorKind::kData,
          std::to_string(data.size()) + " samples cannot cover " + std::to_string(num_clients) + " clients");
  std::vector<Dataset> out;
  const std::size_t base = data.size() / num_clients, extra = data.size() % num_clients;
  std::size_t start = 0;
  for (std::size_t k = 0; k < num_clients; ++k) {
    const std::size_t count = base + (k < extra ? 1 : 0);
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = start + i;
    out.push_back(data.subset(idx));
    start += count;
  }
  return out;
}

}  // namespace gradleak
