#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "volc/error.hpp"

namespace volc {

using Shape = std::vector<std::size_t>;

// Buffers start on a 64-byte boundary. Vectorized reductions peel up to the
// first aligned element, so without this the summation order (and the last
// bits of the result) would depend on where malloc placed the buffer.
inline constexpr std::size_t kBufferAlignment = 64;

template <typename T>
struct AlignedAllocator {
  using value_type = T;

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kBufferAlignment}));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{kBufferAlignment}); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

std::string shape_to_string(const Shape& shape);

// Product of dims; throws kInvalidShape on an empty shape or a zero dim.
std::size_t checked_element_count(const Shape& shape);

// Dense row-major array. Element type is float for training and inference,
// double for gradient checks.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(checked_element_count(shape_), fill) {}

  BasicTensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)) {
    if (checked_element_count(shape_) != values.size()) {
      fail(ErrorCode::kInvalidShape,
           "shape " + shape_to_string(shape_) + " does not hold " +
               std::to_string(values.size()) + " elements");
    }
    data_.assign(values.begin(), values.end());
  }

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape), T{0}); }
  static BasicTensor ones(Shape shape) { return BasicTensor(std::move(shape), T{1}); }
  static BasicTensor full(Shape shape, T value) { return BasicTensor(std::move(shape), value); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::size_t offset(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size()) {
      fail(ErrorCode::kShape, "index rank " + std::to_string(index.size()) +
                                  " != tensor rank " + std::to_string(shape_.size()));
    }
    std::size_t flat = 0;
    for (std::size_t axis = 0; axis < index.size(); ++axis) {
      if (index[axis] >= shape_[axis]) {
        fail(ErrorCode::kShape, "index out of range on axis " + std::to_string(axis));
      }
      flat = flat * shape_[axis] + index[axis];
    }
    return flat;
  }

  T& at(std::initializer_list<std::size_t> index) {
    return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
  }
  const T& at(std::initializer_list<std::size_t> index) const {
    return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
  }

  void reshape(Shape shape) {
    if (checked_element_count(shape) != data_.size()) {
      fail(ErrorCode::kInvalidShape, "cannot reshape " + shape_to_string(shape_) +
                                         " to " + shape_to_string(shape));
    }
    shape_ = std::move(shape);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  AlignedVector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Throws kShape unless `actual` equals `expected`; `what` prefixes the message.
void require_shape(const Shape& actual, const Shape& expected, const std::string& what);

}  // namespace volc
