#include "gradleak/io/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "gradleak/error.hpp"

namespace gradleak {
namespace {

std::size_t read_header_int(const std::vector<unsigned char>& b, std::size_t& pos, const std::string& where) {
  for (;;) {
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    if (pos < b.size() && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  require(pos < b.size() && std::isdigit(b[pos]), ErrorKind::kData, where + ": malformed header");
  std::size_t v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos++] - '0');
    require(v < (1u << 24), ErrorKind::kData, where + ": header value too large");
  }
  return v;
}

}  // namespace

void write_image(const std::filesystem::path& path, const Tensor& image) {
  require(image.rank() == 2 || image.rank() == 3, ErrorKind::kShape, "image must be (H, W) or (C, H, W)");
  const std::size_t c = image.rank() == 3 ? image.dim(0) : 1;
  require(c == 1 || c == 3, ErrorKind::kShape, "image must have 1 or 3 channels, got " + std::to_string(c));
  const std::size_t h = image.shape()[image.rank() - 2], w = image.shape()[image.rank() - 1];

  std::vector<char> pixels(c * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = std::clamp(image[(ch * h + y) * w + x], 0.0, 1.0);
        pixels[(y * w + x) * c + ch] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
      }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  out << (c == 1 ? "P5" : "P6") << '\n' << w << ' ' << h << '\n' << 255 << '\n';
  out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  require(out.good(), ErrorKind::kIo, "write failed: " + path.string());
}

Tensor read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot open " + path.string());
  const std::vector<unsigned char> b{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::string where = path.string();
  require(b.size() >= 2 && b[0] == 'P' && (b[1] == '5' || b[1] == '6'), ErrorKind::kData,
          where + ": not a binary PGM/PPM");
  const std::size_t c = b[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  const std::size_t w = read_header_int(b, pos, where);
  const std::size_t h = read_header_int(b, pos, where);
  const std::size_t maxval = read_header_int(b, pos, where);
  require(w > 0 && h > 0, ErrorKind::kData, where + ": empty image");
  require(maxval > 0 && maxval <= 255, ErrorKind::kData, where + ": unsupported maxval");
  require(pos < b.size() && std::isspace(b[pos]), ErrorKind::kData, where + ": malformed header");
  ++pos;
  require(b.size() - pos >= c * h * w, ErrorKind::kData, where + ": truncated pixel data");

  std::vector<double> data(c * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch)
        data[(ch * h + y) * w + x] = b[pos + (y * w + x) * c + ch] / static_cast<double>(maxval);
  return Tensor::adopt({c, h, w}, std::move(data));
}

}  // namespace gradleak
