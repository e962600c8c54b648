#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bandmix/common.hpp"

namespace bandmix {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += " x ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major array. Activations are laid out [channels x frames x bins].
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(std::initializer_list<std::size_t> shape, T fill = T{0})
      : Tensor(Shape(shape), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    require(data_.size() == shape_numel(shape_), "tensor data size ", data_.size(),
            " does not match shape ", shape_str(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  std::vector<T>& vec() noexcept { return data_; }
  const std::vector<T>& vec() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& operator()(std::size_t c, std::size_t t, std::size_t f) noexcept {
    return data_[(c * shape_[1] + t) * shape_[2] + f];
  }
  const T& operator()(std::size_t c, std::size_t t, std::size_t f) const noexcept {
    return data_[(c * shape_[1] + t) * shape_[2] + f];
  }
  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * shape_[1] + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * shape_[1] + c];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool finite() const { return all_finite(data_.begin(), data_.end()); }

  Tensor& operator+=(const Tensor& o) {
    require(o.shape_ == shape_, "shape mismatch in +=: ", shape_str(shape_), " vs ",
            shape_str(o.shape_));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// Concatenate [C x T x F] tensors along the channel axis.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 3 && b.rank() == 3 && a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2),
          "concat_channels: incompatible shapes ", shape_str(a.shape()), " and ",
          shape_str(b.shape()));
  Tensor<T> out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
  std::copy(a.vec().begin(), a.vec().end(), out.vec().begin());
  std::copy(b.vec().begin(), b.vec().end(), out.vec().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

/// Concatenate [C x T x F] tensors along the frequency (last) axis.
template <typename T>
Tensor<T> concat_bins(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0) && a.dim(1) == b.dim(1),
          "concat_bins: incompatible shapes ", shape_str(a.shape()), " and ",
          shape_str(b.shape()));
  const std::size_t fa = a.dim(2), fb = b.dim(2);
  Tensor<T> out({a.dim(0), a.dim(1), fa + fb});
  for (std::size_t r = 0; r < a.dim(0) * a.dim(1); ++r) {
    std::copy_n(a.data() + r * fa, fa, out.data() + r * (fa + fb));
    std::copy_n(b.data() + r * fb, fb, out.data() + r * (fa + fb) + fa);
  }
  return out;
}

/// Copy of x[:, :, begin:end].
template <typename T>
Tensor<T> slice_bins(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require(x.rank() == 3 && begin <= end && end <= x.dim(2), "slice_bins: range [", begin, ", ",
          end, ") outside ", shape_str(x.shape()));
  const std::size_t f = x.dim(2), w = end - begin;
  Tensor<T> out({x.dim(0), x.dim(1), w});
  for (std::size_t r = 0; r < x.dim(0) * x.dim(1); ++r) {
    std::copy_n(x.data() + r * f + begin, w, out.data() + r * w);
  }
  return out;
}

/// Copy of x[begin:end, :, :].
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require(x.rank() == 3 && begin <= end && end <= x.dim(0), "slice_channels: range [", begin,
          ", ", end, ") outside ", shape_str(x.shape()));
  const std::size_t plane = x.dim(1) * x.dim(2);
  Tensor<T> out({end - begin, x.dim(1), x.dim(2)});
  std::copy_n(x.data() + begin * plane, (end - begin) * plane, out.data());
  return out;
}

/// Named parameter arrays. Layers refer to their parameters by index, so a
/// gradient store is just another ParamSet with the same layout.
template <typename T>
class ParamSet {
 public:
  std::size_t add(std::string name, Shape shape) {
    for (const auto& n : names_) require(n != name, "duplicate parameter name: ", name);
    names_.push_back(std::move(name));
    values_.emplace_back(std::move(shape));
    return values_.size() - 1;
  }

  std::size_t size() const noexcept { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  Tensor<T>& operator[](std::size_t i) { return values_[i]; }
  const Tensor<T>& operator[](std::size_t i) const { return values_[i]; }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return i;
    throw InvalidArgument("unknown parameter: " + name);
  }

  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

  /// Same names and shapes, all zeros.
  ParamSet zeros_like() const {
    ParamSet out;
    out.names_ = names_;
    for (const auto& v : values_) out.values_.emplace_back(v.shape());
    return out;
  }

  void set_zero() {
    for (auto& v : values_) v.fill(T{0});
  }

  ParamSet& operator+=(const ParamSet& o) {
    require(o.size() == size(), "ParamSet layout mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  ParamSet& operator*=(T s) {
    for (auto& v : values_) v *= s;
    return *this;
  }

  bool finite() const {
    return std::all_of(values_.begin(), values_.end(), [](const auto& v) { return v.finite(); });
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (std::size_t i = 0; i < size(); ++i) {
      out.add(names_[i], values_[i].shape());
      out[i] = values_[i].template cast<U>();
    }
    return out;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
};

}  // namespace bandmix
