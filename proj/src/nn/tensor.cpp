#include "ccpt/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ccpt/nn/softmax.hpp"

namespace ccpt::nn {

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (data.size() != shape_size(shape)) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_string(shape));
  }
}

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::check_finite(const std::string& what) const {
  if (!all_finite()) throw NumericError("non-finite values in " + what);
}

Tensor concat_rows(std::span<const Tensor* const> parts) {
  if (parts.empty()) return {};
  const int batch = parts.front()->batch();
  std::size_t width = 0;
  for (const Tensor* p : parts) {
    if (p->batch() != batch) throw ShapeError("concat_rows: batch mismatch");
    width += p->row_size();
  }
  Tensor out({batch, static_cast<int>(width)});
  for (int b = 0; b < batch; ++b) {
    double* dst = out.row(b);
    for (const Tensor* p : parts) {
      const double* src = p->row(b);
      dst = std::copy(src, src + p->row_size(), dst);
    }
  }
  return out;
}

std::vector<Tensor> split_rows(const Tensor& t, std::span<const Shape> sample_shapes) {
  const int batch = t.batch();
  std::vector<Tensor> out;
  std::size_t total = 0;
  for (const Shape& s : sample_shapes) {
    Shape full{batch};
    full.insert(full.end(), s.begin(), s.end());
    out.emplace_back(full);
    total += shape_size(s);
  }
  if (total != t.row_size()) throw ShapeError("split_rows: widths do not cover the row");
  for (int b = 0; b < batch; ++b) {
    const double* src = t.row(b);
    for (Tensor& part : out) {
      std::copy(src, src + part.row_size(), part.row(b));
      src += part.row_size();
    }
  }
  return out;
}

Tensor slice_batch(const Tensor& t, int begin, int count) {
  Shape s = t.shape;
  s[0] = count;
  Tensor out(s);
  std::copy(t.row(begin), t.row(begin) + static_cast<std::size_t>(count) * t.row_size(), out.data.begin());
  return out;
}

Tensor gather_batch(const Tensor& t, std::span<const int> rows) {
  Shape s = t.shape;
  s[0] = static_cast<int>(rows.size());
  Tensor out(s);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(t.row(rows[i]), t.row(rows[i]) + t.row_size(), out.row(static_cast<int>(i)));
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace ccpt::nn
