#include <fstream>
#include <iterator>

#include "gradleak/error.hpp"
#include "gradleak/io/dataset.hpp"

namespace gradleak {
namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at, const std::filesystem::path& path) {
  require(b.size() >= at + 4, ErrorKind::kData, path.string() + ": truncated header");
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto img = slurp(images_path);
  const auto lab = slurp(labels_path);

  require(be32(img, 0, images_path) == 0x00000803, ErrorKind::kData, images_path.string() + ": bad magic");
  require(be32(lab, 0, labels_path) == 0x00000801, ErrorKind::kData, labels_path.string() + ": bad magic");
  const std::size_t n = be32(img, 4, images_path);
  const std::size_t rows = be32(img, 8, images_path);
  const std::size_t cols = be32(img, 12, images_path);
  const std::size_t nl = be32(lab, 4, labels_path);
  require(n == nl, ErrorKind::kData,
          "count mismatch: " + std::to_string(n) + " images vs " + std::to_string(nl) + " labels");
  require(n > 0 && rows > 0 && cols > 0, ErrorKind::kData, images_path.string() + ": empty image set");
  require(img.size() >= 16 + n * rows * cols, ErrorKind::kData, images_path.string() + ": truncated pixel data");
  require(lab.size() >= 8 + n, ErrorKind::kData, labels_path.string() + ": truncated label data");

  std::vector<double> pixels(n * rows * cols);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = img[16 + i] / 255.0;
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = lab[8 + i];

  Dataset d{Tensor::adopt({n, 1, rows, cols}, std::move(pixels)), std::move(labels), 10};
  d.validate();
  return d;
}

}  // namespace gradleak
