#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace bp {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major block of 64-bit reals.
struct Tensor {
  Shape shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> v);

  static Tensor zeros(Shape s);
  static Tensor scalar(double v) { return Tensor({}, {v}); }

  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }
  std::size_t size() const { return values.size(); }

  double& operator()(std::size_t r, std::size_t c) { return values[r * shape[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * shape[1] + c]; }

  bool operator==(const Tensor& other) const = default;
};

}  // namespace bp
