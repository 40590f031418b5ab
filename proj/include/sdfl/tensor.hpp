#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sdfl {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

/// Dense row-major array. Time-major layouts are (length, channels): row n
/// holds the channel values of sample n.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_size(shape_)) {
      throw std::invalid_argument("Tensor: " + std::to_string(values_.size()) +
                                  " values do not fill shape " +
                                  shape_string(shape_));
    }
  }

  /// (N, 1) column from a sample buffer.
  static Tensor column(std::span<const T> samples) {
    return Tensor({samples.size(), 1}, std::vector<T>(samples.begin(), samples.end()));
  }

  static Tensor scalar(T v) { return Tensor({1}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  /// Leading (time) dimension.
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  /// Product of trailing dimensions; 1 for rank-1 tensors.
  std::size_t cols() const { return rows() == 0 ? 0 : size() / rows(); }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  std::vector<T>& storage() { return values_; }
  const std::vector<T>& storage() const { return values_; }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  T& at(std::size_t n, std::size_t c) { return values_[n * cols() + c]; }
  const T& at(std::size_t n, std::size_t c) const { return values_[n * cols() + c]; }

  T item() const {
    if (size() != 1) throw std::logic_error("Tensor::item on non-scalar " + shape_string(shape_));
    return values_[0];
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(values_.begin(), values_.end()));
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> values_;
};

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<RowMatrix<T>> as_matrix(T* data, std::size_t rows, std::size_t cols) {
  return Eigen::Map<RowMatrix<T>>(data, static_cast<Eigen::Index>(rows),
                                  static_cast<Eigen::Index>(cols));
}

template <typename T>
Eigen::Map<const RowMatrix<T>> as_matrix(const T* data, std::size_t rows, std::size_t cols) {
  return Eigen::Map<const RowMatrix<T>>(data, static_cast<Eigen::Index>(rows),
                                        static_cast<Eigen::Index>(cols));
}

}  // namespace sdfl
