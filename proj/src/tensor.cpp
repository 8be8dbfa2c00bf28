#include "gradleak/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "gradleak/error.hpp"

namespace gradleak {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ')';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
  for (std::size_t extent : shape_) require(extent > 0, ErrorKind::kShape, "tensor extents must be positive");
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool) : shape_(std::move(shape)), data_(std::move(data)) {
  require(shape_size(shape_) == data_.size(), ErrorKind::kShape,
          "shape " + shape_to_string(shape_) + " does not hold " + std::to_string(data_.size()) + " elements");
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  Tensor t(std::move(shape), std::move(data), true);
  require(t.all_finite(), ErrorKind::kInvalidArgument, "tensor data contains non-finite values");
  return t;
}

Tensor Tensor::adopt(Shape shape, std::vector<double> data) { return Tensor(std::move(shape), std::move(data), true); }

double Tensor::item() const {
  require(data_.size() == 1, ErrorKind::kShape, "item() on tensor of shape " + shape_to_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const& { return Tensor(std::move(shape), data_, true); }

Tensor Tensor::reshaped(Shape shape) && { return Tensor(std::move(shape), std::move(data_), true); }

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace gradleak
