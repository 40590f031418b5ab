#pragma once

#include "sdfl/rng.hpp"
#include "sdfl/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace sdfl {

/// (fan_in, fan_out) for a weight shape: (taps, C_in, C_out) kernels count
/// every tap, (C_in, C_out) matrices are plain dense layers.
inline std::pair<std::size_t, std::size_t> fans(const Shape& shape) {
  switch (shape.size()) {
    case 2:
      return {shape[0], shape[1]};
    case 3:
      return {shape[0] * shape[1], shape[0] * shape[2]};
    default:
      throw std::invalid_argument("fans: expected a rank-2 or rank-3 weight shape, got " +
                                  shape_string(shape));
  }
}

/// Glorot-Bengio normalized (uniform) initialization:
/// U[-sqrt(6 / (fan_in + fan_out)), +sqrt(6 / (fan_in + fan_out))].
template <typename T>
Tensor<T> xavier_init(const Shape& shape, Rng& rng) {
  const auto [fan_in, fan_out] = fans(shape);
  if (fan_in == 0 || fan_out == 0) {
    throw std::invalid_argument("xavier_init: zero fan for shape " + shape_string(shape));
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace sdfl
