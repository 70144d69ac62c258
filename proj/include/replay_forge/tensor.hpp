#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <numeric>
#include <vector>

#include "replay_forge/error.hpp"

namespace rforge {

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

inline std::size_t shape_elems(const std::vector<std::uint32_t>& shape) {
  std::size_t n = 1;
  for (std::uint32_t d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

/// Dense n-dimensional tensor, C-order (last axis fastest), Eigen storage.
template <typename Scalar>
struct Tensor {
  std::vector<std::uint32_t> shape;
  ArrayX<Scalar> data;

  Tensor() = default;
  Tensor(std::vector<std::uint32_t> s, ArrayX<Scalar> d) : shape(std::move(s)), data(std::move(d)) {}

  static Tensor zeros(std::vector<std::uint32_t> s) {
    auto n = static_cast<Eigen::Index>(shape_elems(s));
    return Tensor(std::move(s), ArrayX<Scalar>::Zero(n));
  }

  std::size_t size() const { return static_cast<std::size_t>(data.size()); }

  bool shape_matches() const { return shape_elems(shape) == size(); }
};

using TensorF = Tensor<float>;
using TensorU8 = Tensor<std::uint8_t>;

}  // namespace rforge
