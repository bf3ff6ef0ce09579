#include "attnvgg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "attnvgg/error.hpp"

namespace attnvgg {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_volume(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 4) {
    throw ShapeError("tensor rank must be 1..4, got " + std::to_string(shape.size()));
  }
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive: " + shape_to_string(shape));
  }
}

}  // namespace

Tensor::Tensor() : shape_{1}, data_(1, 0.0) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_volume(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (data_.size() != shape_volume(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t cols = rows.size() ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) throw ShapeError("ragged matrix rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2 || i >= shape_[0] || j >= shape_[1]) {
    throw ShapeError("index out of range for " + shape_to_string(shape_));
  }
  return data_[i * shape_[1] + j];
}

double Tensor::at(std::size_t h, std::size_t w, std::size_t c) const {
  if (rank() != 3 || h >= shape_[0] || w >= shape_[1] || c >= shape_[2]) {
    throw ShapeError("index out of range for " + shape_to_string(shape_));
  }
  return data_[(h * shape_[1] + w) * shape_[2] + c];
}

double& Tensor::at(std::size_t h, std::size_t w, std::size_t c) {
  if (rank() != 3 || h >= shape_[0] || w >= shape_[1] || c >= shape_[2]) {
    throw ShapeError("index out of range for " + shape_to_string(shape_));
  }
  return data_[(h * shape_[1] + w) * shape_[2] + c];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_volume(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::accumulate(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw ShapeError("accumulate: " + shape_to_string(other.shape_) + " into " +
                     shape_to_string(shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseOp op) {
  auto apply = [op](double x, double y) {
    switch (op) {
      case ElementwiseOp::kAdd: return x + y;
      case ElementwiseOp::kSub: return x - y;
      case ElementwiseOp::kMul: return x * y;
    }
    return 0.0;
  };

  Tensor out(a.shape());
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(a[i], b[i]);
    return out;
  }

  // Only broadcast allowed: b equals a with the trailing extent set to 1.
  Shape expected = a.shape();
  expected.back() = 1;
  if (b.shape() != expected) {
    throw ShapeError("elementwise: cannot combine " + shape_to_string(a.shape()) + " with " +
                     shape_to_string(b.shape()));
  }
  const std::size_t channels = a.shape().back();
  for (std::size_t p = 0; p < b.size(); ++p) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t i = p * channels + c;
      out[i] = apply(a[i], b[p]);
    }
  }
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul expects rank-2 operands, got " + shape_to_string(a.shape()) +
                     " and " + shape_to_string(b.shape()));
  }
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  if (b.extent(0) != k) {
    throw ShapeError("matmul inner extents differ: " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* row = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = &b.data()[p * n];
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return out;
}

Tensor reduce(const Tensor& t, std::span<const std::size_t> axes, ReduceOp op) {
  const Shape& shape = t.shape();
  std::vector<bool> reduced(shape.size(), false);
  for (auto axis : axes) {
    if (axis >= shape.size()) {
      throw ShapeError("reduce: axis " + std::to_string(axis) + " invalid for " +
                       shape_to_string(shape));
    }
    reduced[axis] = true;
  }

  Shape out_shape;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (!reduced[i]) out_shape.push_back(shape[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);

  const double init = op == ReduceOp::kMax ? -std::numeric_limits<double>::infinity() : 0.0;
  Tensor out(out_shape, init);
  // Neumaier compensation terms for sums
  std::vector<double> comp(op == ReduceOp::kMax ? 0 : out.size(), 0.0);

  // Walk every source element, mapping it to its output slot.
  std::vector<std::size_t> index(shape.size(), 0);
  for (std::size_t flat = 0; flat < t.size(); ++flat) {
    std::size_t dst = 0;
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (!reduced[i]) dst = dst * shape[i] + index[i];
    }
    if (op == ReduceOp::kMax) {
      out[dst] = std::max(out[dst], t[flat]);
    } else {
      const double v = t[flat];
      const double sum = out[dst] + v;
      comp[dst] += std::abs(out[dst]) >= std::abs(v) ? (out[dst] - sum) + v : (v - sum) + out[dst];
      out[dst] = sum;
    }
    for (std::size_t i = shape.size(); i-- > 0;) {
      if (++index[i] < shape[i]) break;
      index[i] = 0;
    }
  }

  for (std::size_t i = 0; i < comp.size(); ++i) out[i] += comp[i];
  if (op == ReduceOp::kMean) {
    const double count = static_cast<double>(t.size() / out.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= count;
  }
  return out;
}

Tensor reduce_all(const Tensor& t, ReduceOp op) {
  std::vector<std::size_t> axes(t.rank());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  return reduce(t, axes, op);
}

namespace {

struct AxisSample {
  std::size_t lo;
  std::size_t hi;
  double frac;  // weight of hi
};

std::vector<AxisSample> axis_samples(std::size_t in, std::size_t out) {
  std::vector<AxisSample> samples(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  const double max_coord = static_cast<double>(in - 1);
  for (std::size_t j = 0; j < out; ++j) {
    double src = (static_cast<double>(j) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, max_coord);
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    samples[j] = {lo, hi, src - static_cast<double>(lo)};
  }
  return samples;
}

void require_image(const Tensor& t, const char* what) {
  if (t.rank() != 3) {
    throw ShapeError(std::string(what) + " expects an HxWxC tensor, got " +
                     shape_to_string(t.shape()));
  }
}

}  // namespace

Tensor bilinear_resize(const Tensor& t, std::size_t out_h, std::size_t out_w) {
  require_image(t, "bilinear_resize");
  if (out_h == 0 || out_w == 0) throw ShapeError("bilinear_resize: target extents must be >= 1");
  const std::size_t in_h = t.extent(0), in_w = t.extent(1), c = t.extent(2);
  const auto rows = axis_samples(in_h, out_h);
  const auto cols = axis_samples(in_w, out_w);

  Tensor out({out_h, out_w, c});
  for (std::size_t i = 0; i < out_h; ++i) {
    const auto& r = rows[i];
    for (std::size_t j = 0; j < out_w; ++j) {
      const auto& q = cols[j];
      const double* p00 = &t.data()[(r.lo * in_w + q.lo) * c];
      const double* p01 = &t.data()[(r.lo * in_w + q.hi) * c];
      const double* p10 = &t.data()[(r.hi * in_w + q.lo) * c];
      const double* p11 = &t.data()[(r.hi * in_w + q.hi) * c];
      double* dst = &out[(i * out_w + j) * c];
      // Nested lerps keep constant regions and integer sample points exact.
      for (std::size_t k = 0; k < c; ++k) {
        const double top = p00[k] + q.frac * (p01[k] - p00[k]);
        const double bottom = p10[k] + q.frac * (p11[k] - p10[k]);
        dst[k] = top + r.frac * (bottom - top);
      }
    }
  }
  return out;
}

Tensor bilinear_resize_adjoint(const Tensor& grad, std::size_t in_h, std::size_t in_w) {
  require_image(grad, "bilinear_resize_adjoint");
  if (in_h == 0 || in_w == 0) throw ShapeError("bilinear_resize_adjoint: extents must be >= 1");
  const std::size_t out_h = grad.extent(0), out_w = grad.extent(1), c = grad.extent(2);
  const auto rows = axis_samples(in_h, out_h);
  const auto cols = axis_samples(in_w, out_w);

  Tensor out({in_h, in_w, c});
  for (std::size_t i = 0; i < out_h; ++i) {
    const auto& r = rows[i];
    for (std::size_t j = 0; j < out_w; ++j) {
      const auto& q = cols[j];
      const double w00 = (1.0 - r.frac) * (1.0 - q.frac);
      const double w01 = (1.0 - r.frac) * q.frac;
      const double w10 = r.frac * (1.0 - q.frac);
      const double w11 = r.frac * q.frac;
      const double* src = &grad.data()[(i * out_w + j) * c];
      double* p00 = &out[(r.lo * in_w + q.lo) * c];
      double* p01 = &out[(r.lo * in_w + q.hi) * c];
      double* p10 = &out[(r.hi * in_w + q.lo) * c];
      double* p11 = &out[(r.hi * in_w + q.hi) * c];
      for (std::size_t k = 0; k < c; ++k) {
        p00[k] += w00 * src[k];
        p01[k] += w01 * src[k];
        p10[k] += w10 * src[k];
        p11[k] += w11 * src[k];
      }
    }
  }
  return out;
}

}  // namespace attnvgg
