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

#include "sadet/tensor.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "sadet/binio.hpp"

namespace sadet {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T> elementwise(ElementwiseOp op, const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) {
    throw InvalidArgument("shape mismatch " + shape_to_string(a.shape()) + " vs " +
                          shape_to_string(b.shape()));
  }
  Tensor<T> out(a.shape());
  const std::size_t n = a.size();
  switch (op) {
    case ElementwiseOp::kAdd:
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
      break;
    case ElementwiseOp::kSub:
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
      break;
    case ElementwiseOp::kMul:
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
      break;
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
  return out;
}

template <typename T>
void accumulate(Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) {
    throw InvalidArgument("shape mismatch " + shape_to_string(a.shape()) + " vs " +
                          shape_to_string(b.shape()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

template <typename T>
T matvec_accumulate(std::span<const T> kernel_row, std::span<const T> feature, T acc) {
  if (kernel_row.size() != feature.size()) {
    throw InvalidArgument("matvec_accumulate: length " + std::to_string(kernel_row.size()) +
                          " vs " + std::to_string(feature.size()));
  }
  for (std::size_t i = 0; i < feature.size(); ++i) acc += kernel_row[i] * feature[i];
  return acc;
}

namespace {
constexpr char kTensorMagic[5] = "SADT";
constexpr std::uint8_t kTensorVersion = 1;
}  // namespace

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t) {
  os.write(kTensorMagic, 4);
  binio::put<std::uint8_t>(os, kTensorVersion);
  binio::put<std::uint8_t>(os, static_cast<std::uint8_t>(precision_of<T>()));
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (std::int64_t e : t.shape()) binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(e));
  for (T v : t.values()) binio::put<T>(os, v);
}

template <typename T>
Tensor<T> read_tensor(std::istream& is, const std::string& source) {
  binio::expect_magic(is, source, kTensorMagic);
  auto offset = static_cast<std::uint64_t>(is.tellg());
  const auto version = binio::get<std::uint8_t>(is, source);
  if (version != kTensorVersion) {
    throw ParseError(source, offset, "unsupported tensor version " + std::to_string(version));
  }
  offset = static_cast<std::uint64_t>(is.tellg());
  const auto tag = binio::get<std::uint8_t>(is, source);
  if (tag != 4 && tag != 8) throw ParseError(source, offset, "bad precision tag " + std::to_string(tag));
  offset = static_cast<std::uint64_t>(is.tellg());
  const auto rank = binio::get<std::uint32_t>(is, source);
  if (rank == 0 || rank > 8) throw ParseError(source, offset, "bad rank " + std::to_string(rank));
  Shape shape(rank);
  std::uint64_t count = 1;
  for (auto& e : shape) {
    offset = static_cast<std::uint64_t>(is.tellg());
    e = binio::get<std::uint32_t>(is, source);
    if (e == 0) throw ParseError(source, offset, "zero extent");
    count *= static_cast<std::uint64_t>(e);
    if (count > (1ull << 32)) throw ParseError(source, offset, "tensor too large");
  }
  Tensor<T> t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = tag == 4 ? static_cast<T>(binio::get<float>(is, source))
                    : static_cast<T>(binio::get<double>(is, source));
  }
  return t;
}

#define SADET_INSTANTIATE(T)                                                      \
  template Tensor<T> elementwise(ElementwiseOp, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> scale(const Tensor<T>&, T);                                  \
  template void accumulate(Tensor<T>&, const Tensor<T>&);                          \
  template T matvec_accumulate(std::span<const T>, std::span<const T>, T);         \
  template void write_tensor(std::ostream&, const Tensor<T>&);                     \
  template Tensor<T> read_tensor(std::istream&, const std::string&);

SADET_INSTANTIATE(float)
SADET_INSTANTIATE(double)
#undef SADET_INSTANTIATE

}  // namespace sadet
