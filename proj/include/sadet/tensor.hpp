// Copyright 2026 The sadet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "sadet/error.hpp"

namespace sadet {

using Shape = std::vector<std::int64_t>;

enum class Precision : std::uint8_t { kF32 = 4, kF64 = 8 };

template <typename T>
constexpr Precision precision_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? Precision::kF32 : Precision::kF64;
}

std::string shape_to_string(const Shape& shape);

// Dense row-major array of float or double.
template <typename T>
class Tensor {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);

 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    if (shape_.empty()) throw InvalidArgument("tensor shape must have rank >= 1");
    std::int64_t n = 1;
    for (std::int64_t e : shape_) {
      if (e < 1) throw InvalidArgument("invalid tensor shape " + shape_to_string(shape_));
      n *= e;
    }
    strides_.assign(shape_.size(), 1);
    for (std::size_t i = shape_.size() - 1; i > 0; --i) strides_[i - 1] = strides_[i] * shape_[i];
    data_.assign(static_cast<std::size_t>(n), fill);
  }

  static Tensor alloc(Shape shape, T fill) { return Tensor(std::move(shape), fill); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::int64_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  template <typename... I>
  T& operator()(I... idx) noexcept {
    return data_[offset_of(idx...)];
  }
  template <typename... I>
  const T& operator()(I... idx) const noexcept {
    return data_[offset_of(idx...)];
  }

  // Bounds-checked access.
  T& at(std::span<const std::int64_t> idx) { return data_[checked_offset(idx)]; }
  const T& at(std::span<const std::int64_t> idx) const { return data_[checked_offset(idx)]; }

  // Contiguous block for index i along the leading axis.
  std::span<T> slab(std::int64_t i) {
    const auto n = static_cast<std::size_t>(strides_[0]);
    return std::span<T>(data_).subspan(static_cast<std::size_t>(i) * n, n);
  }
  std::span<const T> slab(std::int64_t i) const {
    const auto n = static_cast<std::size_t>(strides_[0]);
    return std::span<const T>(data_).subspan(static_cast<std::size_t>(i) * n, n);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  Tensor reshaped(Shape shape) const {
    Tensor out(std::move(shape));
    if (out.size() != size()) throw InvalidArgument("reshape changes element count");
    std::copy(data_.begin(), data_.end(), out.data_.begin());
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  template <typename... I>
  std::size_t offset_of(I... idx) const noexcept {
    const std::int64_t ids[] = {static_cast<std::int64_t>(idx)...};
    std::int64_t off = 0;
    for (std::size_t k = 0; k < sizeof...(I); ++k) off += ids[k] * strides_[k];
    return static_cast<std::size_t>(off);
  }

  std::size_t checked_offset(std::span<const std::int64_t> idx) const {
    if (idx.size() != shape_.size()) throw InvalidArgument("index rank mismatch");
    std::int64_t off = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] < 0 || idx[k] >= shape_[k]) throw InvalidArgument("index out of bounds");
      off += idx[k] * strides_[k];
    }
    return static_cast<std::size_t>(off);
  }

  Shape shape_;
  std::vector<std::int64_t> strides_;
  std::vector<T> data_;
};

enum class ElementwiseOp { kAdd, kSub, kMul };

template <typename T>
Tensor<T> elementwise(ElementwiseOp op, const Tensor<T>& a, const Tensor<T>& b);

// Multiply every element by a scalar.
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(ElementwiseOp::kAdd, a, b);
}
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(ElementwiseOp::kSub, a, b);
}

// a += b, shapes must agree.
template <typename T>
void accumulate(Tensor<T>& a, const Tensor<T>& b);

// acc + sum_i kernel_row[i] * feature[i], summed in ascending index order.
template <typename T>
T matvec_accumulate(std::span<const T> kernel_row, std::span<const T> feature, T acc);

// Binary dump: "SADT", version, precision tag, u32 rank, u32 extents, then
// little-endian values.
template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t);

// Reads one dumped tensor, converting precision if the stored tag differs
// from T. `source` names the stream in error messages.
template <typename T>
Tensor<T> read_tensor(std::istream& is, const std::string& source);

}  // namespace sadet
