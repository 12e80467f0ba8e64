#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace pixelseq {

// Dense row-major tensor of 64-bit floats. This is the sole numeric carrier;
// shape is plain metadata. Feature maps are stored features x height x width.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);

  static Tensor scalar(double v);
  static Tensor full(std::vector<int> s, double v);

  int rank() const { return static_cast<int>(shape.size()); }
  int extent(int axis) const { return shape[static_cast<std::size_t>(axis)]; }
  int numel() const { return static_cast<int>(data.size()); }

  double& operator[](int i) { return data[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return data[static_cast<std::size_t>(i)]; }

  // Rank-specific accessors for the common layouts.
  double& at(int i, int j) {
    assert(rank() == 2);
    return data[static_cast<std::size_t>(i * shape[1] + j)];
  }
  double& at(int i, int j, int k) {
    assert(rank() == 3);
    return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  double at(int i, int j, int k) const {
    assert(rank() == 3);
    return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  double& at(int i, int j, int k, int l) {
    assert(rank() == 4);
    return data[static_cast<std::size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }
  double at(int i, int j, int k, int l) const {
    assert(rank() == 4);
    return data[static_cast<std::size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  void fill(double v);
};

std::size_t numel_of(const std::vector<int>& shape);

}  // namespace pixelseq
