#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ccpt/errors.hpp"

namespace ccpt::nn {

using Shape = std::vector<int>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

std::string shape_string(const Shape& s);

// Dense row-major array of doubles. The leading dimension is the batch
// everywhere in this library.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), data(shape_size(shape), fill) {}
  Tensor(Shape s, std::vector<double> values);

  bool empty() const { return data.empty(); }
  std::size_t size() const { return data.size(); }
  int batch() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t row_size() const { return batch() == 0 ? 0 : data.size() / static_cast<std::size_t>(batch()); }
  // Shape without the batch dimension.
  Shape sample_shape() const { return Shape(shape.begin() + (shape.empty() ? 0 : 1), shape.end()); }

  double* row(int b) { return data.data() + static_cast<std::size_t>(b) * row_size(); }
  const double* row(int b) const { return data.data() + static_cast<std::size_t>(b) * row_size(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  Tensor zeros_like() const { return Tensor(shape); }

  bool all_finite() const;
  // Throws NumericError naming `what` when any element is NaN or Inf.
  void check_finite(const std::string& what) const;
};

// Batch-wise concatenation of flattened rows.
Tensor concat_rows(std::span<const Tensor* const> parts);
// Inverse of concat_rows; widths are per-sample flattened sizes.
std::vector<Tensor> split_rows(const Tensor& t, std::span<const Shape> sample_shapes);

// Rows [begin, begin+count) of `t` in a new tensor.
Tensor slice_batch(const Tensor& t, int begin, int count);
// Selected rows of `t`, in order.
Tensor gather_batch(const Tensor& t, std::span<const int> rows);

}  // namespace ccpt::nn
