#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace plume {

/// Raised when tensor shapes disagree; the message names the offending axis.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense (batch, channels, height, width) extent. Every axis is at least 1.
struct Shape {
  int batch = 1;
  int channels = 1;
  int height = 1;
  int width = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(batch) * channels * height * width;
  }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::string str() const {
    return "(" + std::to_string(batch) + "," + std::to_string(channels) + "," +
           std::to_string(height) + "," + std::to_string(width) + ")";
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline void check_shape_valid(const Shape& s) {
  if (s.batch < 1) throw ShapeError("batch axis must be >= 1, got " + s.str());
  if (s.channels < 1) throw ShapeError("channel axis must be >= 1, got " + s.str());
  if (s.height < 1) throw ShapeError("height axis must be >= 1, got " + s.str());
  if (s.width < 1) throw ShapeError("width axis must be >= 1, got " + s.str());
}

/// Throws a ShapeError naming the first axis on which `a` and `b` differ.
inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  auto fail = [&](const char* axis) {
    throw ShapeError(std::string(what) + ": " + axis + " mismatch " + a.str() + " vs " + b.str());
  };
  if (a.batch != b.batch) fail("batch");
  if (a.channels != b.channels) fail("channel");
  if (a.height != b.height) fail("height");
  if (a.width != b.width) fail("width");
}

/// Contiguous row-major rank-4 array, width fastest.
///
/// The library is instantiated for `float` (the storage type used by the CLI
/// and file formats) and `double` (used by gradient checks, where central
/// differences need the extra precision).
template <typename Real>
class BasicTensor {
 public:
  using value_type = Real;

  BasicTensor() : data_(1, Real(0)) {}

  explicit BasicTensor(Shape shape, Real fill = Real(0)) : shape_(shape) {
    check_shape_valid(shape_);
    data_.assign(shape_.numel(), fill);
  }

  BasicTensor(Shape shape, std::vector<Real> data) : shape_(shape), data_(std::move(data)) {
    check_shape_valid(shape_);
    if (data_.size() != shape_.numel())
      throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                       shape_.str());
  }

  static BasicTensor scalar(Real v) { return BasicTensor(Shape{1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  int batch() const { return shape_.batch; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  const std::vector<Real>& vec() const { return data_; }

  std::size_t index(int b, int c, int h, int w) const {
    return ((static_cast<std::size_t>(b) * shape_.channels + c) * shape_.height + h) *
               shape_.width +
           w;
  }
  Real& at(int b, int c, int h, int w) { return data_[index(b, c, h, w)]; }
  Real at(int b, int c, int h, int w) const { return data_[index(b, c, h, w)]; }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  /// One (b, c) spatial plane.
  std::span<Real> plane(int b, int c) {
    return std::span<Real>(data_).subspan(index(b, c, 0, 0), shape_.plane());
  }
  std::span<const Real> plane(int b, int c) const {
    return std::span<const Real>(data_).subspan(index(b, c, 0, 0), shape_.plane());
  }

  Real item() const {
    if (data_.size() != 1) throw ShapeError("item() requires a single-element tensor, got " + shape_.str());
    return data_[0];
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
  }

  template <typename Other>
  BasicTensor<Other> cast() const {
    std::vector<Other> out(data_.begin(), data_.end());
    return BasicTensor<Other>(shape_, std::move(out));
  }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

 private:
  Shape shape_{};
  std::vector<Real> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

}  // namespace plume
