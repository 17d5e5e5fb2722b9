#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "revsnn/errors.hpp"

namespace revsnn {

using i64 = std::int64_t;
using u64 = std::uint64_t;

inline std::string shape_str(const std::vector<i64>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

/// Dense row-major N-dimensional array. The universal value type of the
/// engine; precision is fixed per run by the template parameter.
template <typename S>
class Tensor {
  static_assert(std::is_floating_point_v<S>, "Tensor requires a float scalar");

public:
  Tensor() = default;

  explicit Tensor(std::vector<i64> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(count(shape_)), S(0));
  }

  Tensor(std::vector<i64> shape, std::vector<S> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != static_cast<i64>(data_.size()))
      throw ShapeError("tensor", "element count " + std::to_string(data_.size()) +
                                     " does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(std::vector<i64> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<i64> shape, S value) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
  }

  static Tensor ones(std::vector<i64> shape) { return full(std::move(shape), S(1)); }

  bool defined() const { return !shape_.empty() || !data_.empty(); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  const std::vector<i64>& shape() const { return shape_; }
  i64 dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  i64 numel() const { return static_cast<i64>(data_.size()); }
  u64 bytes() const { return static_cast<u64>(data_.size()) * sizeof(S); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  S& operator[](i64 i) { return data_[static_cast<std::size_t>(i)]; }
  const S& operator[](i64 i) const { return data_[static_cast<std::size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  /// Same data, new shape (element counts must agree).
  Tensor reshaped(std::vector<i64> shape) const {
    if (count(shape) != numel())
      throw ShapeError("reshape", "cannot view " + shape_str(shape_) + " as " + shape_str(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  void fill(S v) {
    for (auto& x : data_) x = v;
  }

  static i64 count(const std::vector<i64>& shape) {
    i64 n = 1;
    for (i64 d : shape) {
      if (d <= 0) throw ShapeError("tensor", "non-positive extent in shape " + shape_str(shape));
      n *= d;
    }
    return n;
  }

private:
  std::vector<i64> shape_;
  std::vector<S> data_;
};

/// A multi-step value: one tensor per simulation time step (leading axis T).
template <typename S>
using Seq = std::vector<Tensor<S>>;

template <typename S>
Seq<S> seq_zeros_like(const Seq<S>& xs) {
  Seq<S> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(Tensor<S>::zeros(x.shape()));
  return out;
}

template <typename S>
u64 seq_bytes(const Seq<S>& xs) {
  u64 b = 0;
  for (const auto& x : xs) b += x.bytes();
  return b;
}

template <typename S>
void check_same_shape(const char* op, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.ndim() != b.ndim())
    throw ShapeError(op, "rank mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  for (int i = 0; i < a.ndim(); ++i)
    if (a.dim(i) != b.dim(i)) throw ShapeError(op, i, a.dim(i), b.dim(i));
}

}  // namespace revsnn
