#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace attnvgg {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_volume(const Shape& shape);

/// Dense row-major array of doubles with rank 1 to 4. Image tensors are laid
/// out as (height, width, channels).
class Tensor {
 public:
  /// A rank-1 tensor holding a single zero.
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor filled(Shape shape, double v) { return Tensor(std::move(shape), v); }
  /// Rank-1 tensor from a list of values.
  static Tensor vector(std::initializer_list<double> values);
  /// Rank-2 tensor from nested rows; rows must have equal length.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  double operator[](std::size_t flat) const { return data_[flat]; }
  double& operator[](std::size_t flat) { return data_[flat]; }

  /// Bounds-checked element access for rank-2/3 tensors.
  double at(std::size_t i, std::size_t j) const;
  double at(std::size_t h, std::size_t w, std::size_t c) const;
  double& at(std::size_t h, std::size_t w, std::size_t c);

  /// Same data under a new shape of equal volume.
  Tensor reshaped(Shape shape) const;

  void fill(double v);
  /// this += other; shapes must be identical.
  void accumulate(const Tensor& other);

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

enum class ElementwiseOp { kAdd, kSub, kMul };
enum class ReduceOp { kSum, kMean, kMax };

/// Pointwise op. `b` must have a's shape, or be a's shape with the trailing
/// axis reduced to extent 1 (per-pixel scaling over channels).
Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseOp op);
inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::kAdd); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::kSub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::kMul); }

Tensor scale(const Tensor& a, double factor);

Tensor matmul(const Tensor& a, const Tensor& b);

/// Reduces over the given axes, which are removed from the result. Reducing
/// every axis yields shape {1}.
Tensor reduce(const Tensor& t, std::span<const std::size_t> axes, ReduceOp op);
Tensor reduce_all(const Tensor& t, ReduceOp op);

/// Bilinear resampling of an H x W x C tensor with half-pixel centers: output
/// index j samples source coordinate (j + 0.5) * in / out - 0.5, clamped to
/// [0, in - 1].
Tensor bilinear_resize(const Tensor& t, std::size_t out_h, std::size_t out_w);

/// Transpose of bilinear_resize: maps a gradient on the out_h x out_w grid
/// back onto the in_h x in_w source grid.
Tensor bilinear_resize_adjoint(const Tensor& grad, std::size_t in_h, std::size_t in_w);

}  // namespace attnvgg
