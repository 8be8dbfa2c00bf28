#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace gradleak {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major array of doubles. The value carrier for images, gradients
// and parameters alike.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);

  // Validates that the element count matches and every entry is finite.
  static Tensor from_data(Shape shape, std::vector<double> data);
  // Same as from_data but skips the finiteness scan; internal use.
  static Tensor adopt(Shape shape, std::vector<double> data);
  static Tensor scalar(double value) { return Tensor({1}, value); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& vector() const noexcept { return data_; }
  std::vector<double> take() && { return std::move(data_); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t row, std::size_t col) { return data_[row * shape_.back() + col]; }
  double at(std::size_t row, std::size_t col) const { return data_[row * shape_.back() + col]; }

  double item() const;

  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Tensor(Shape shape, std::vector<double> data, bool);

  Shape shape_;
  std::vector<double> data_;
};

}  // namespace gradleak
