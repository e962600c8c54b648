#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bandmix/nn/conv.hpp"

namespace bandmix::nn {

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : slope * x[i];
  return y;
}

template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& x, const Tensor<T>& gy, T slope) {
  Tensor<T> gx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > T{0} ? gy[i] : slope * gy[i];
  return gx;
}

/// Per-example, per-channel normalisation over the (frames, bins) plane with
/// a learned scale and shift. Statistics never cross examples, so the output
/// of one example does not depend on what else is in the batch.
template <typename T>
class InstanceNorm {
 public:
  InstanceNorm() = default;
  InstanceNorm(ParamSet<T>& params, const std::string& name, std::size_t channels,
               T eps = T(1e-5))
      : channels_(channels), eps_(eps) {
    scale_ = params.add(name + ".scale", {channels});
    shift_ = params.add(name + ".shift", {channels});
  }

  void init(ParamSet<T>& p, Rng&) const {
    p[scale_].fill(T{1});
    p[shift_].fill(T{0});
  }

  Tensor<T> forward(const ParamSet<T>& p, const Tensor<T>& x) const {
    Tensor<T> y(x.shape());
    const std::size_t plane = x.dim(1) * x.dim(2);
    for (std::size_t c = 0; c < channels_; ++c) {
      const T* src = x.data() + c * plane;
      T* dst = y.data() + c * plane;
      const auto [mean, inv_std] = moments(src, plane);
      for (std::size_t i = 0; i < plane; ++i)
        dst[i] = p[scale_][c] * (src[i] - mean) * inv_std + p[shift_][c];
    }
    return y;
  }

  Tensor<T> backward(const ParamSet<T>& p, const Tensor<T>& x, const Tensor<T>& gy,
                     ParamSet<T>& g) const {
    Tensor<T> gx(x.shape());
    const std::size_t plane = x.dim(1) * x.dim(2);
    std::vector<T> xhat(plane);
    for (std::size_t c = 0; c < channels_; ++c) {
      const T* src = x.data() + c * plane;
      const T* gsrc = gy.data() + c * plane;
      const auto [mean, inv_std] = moments(src, plane);
      T sum_g{0}, sum_gx{0};
      for (std::size_t i = 0; i < plane; ++i) {
        xhat[i] = (src[i] - mean) * inv_std;
        sum_g += gsrc[i];
        sum_gx += gsrc[i] * xhat[i];
      }
      g[scale_][c] += sum_gx;
      g[shift_][c] += sum_g;
      const T n = static_cast<T>(plane);
      const T k = p[scale_][c] * inv_std;
      for (std::size_t i = 0; i < plane; ++i)
        gx.data()[c * plane + i] = k * (gsrc[i] - sum_g / n - xhat[i] * sum_gx / n);
    }
    return gx;
  }

 private:
  std::pair<T, T> moments(const T* x, std::size_t n) const {
    T mean{0};
    for (std::size_t i = 0; i < n; ++i) mean += x[i];
    mean /= static_cast<T>(n);
    T var{0};
    for (std::size_t i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<T>(n);
    return {mean, T{1} / std::sqrt(var + eps_)};
  }

  std::size_t channels_ = 0;
  T eps_ = T(1e-5);
  std::size_t scale_ = 0, shift_ = 0;
};

/// Affine map applied to every row: Y [N x out] = X [N x in] W^T + b.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t out)
      : in_(in), out_(out) {
    weight_ = params.add(name + ".weight", {out, in});
    bias_ = params.add(name + ".bias", {out});
  }

  std::size_t in_features() const noexcept { return in_; }
  std::size_t out_features() const noexcept { return out_; }
  std::size_t weight_index() const noexcept { return weight_; }
  std::size_t bias_index() const noexcept { return bias_; }

  void init(ParamSet<T>& p, Rng& rng) const {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
    fill_uniform(p[weight_], rng, bound);
    fill_uniform(p[bias_], rng, bound);
  }
  void init_zero(ParamSet<T>& p) const {
    p[weight_].fill(T{0});
    p[bias_].fill(T{0});
  }

  RowMat<T> forward(const ParamSet<T>& p, const RowMat<T>& x) const {
    RowMat<T> y = x * weight(p).transpose();
    y.rowwise() += bias(p);
    return y;
  }

  RowMat<T> backward(const ParamSet<T>& p, const RowMat<T>& x, const RowMat<T>& gy,
                     ParamSet<T>& g) const {
    MatMap<T>(g[weight_].data(), out_, in_).noalias() += gy.transpose() * x;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(g[bias_].data(), out_) +=
        gy.colwise().sum();
    return gy * weight(p);
  }

 private:
  ConstMatMap<T> weight(const ParamSet<T>& p) const {
    return ConstMatMap<T>(p[weight_].data(), out_, in_);
  }
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(const ParamSet<T>& p) const {
    return Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(p[bias_].data(), out_);
  }

  std::size_t in_ = 0, out_ = 0;
  std::size_t weight_ = 0, bias_ = 0;
};

/// Residual MLP on row vectors: y = x + L_out(tanh(L_k(... tanh(L_1(x))))).
/// Every layer keeps the input width. The output layer starts at zero, so a
/// freshly initialised MLP is the identity map.
template <typename T>
class ResidualMlp {
 public:
  ResidualMlp() = default;
  ResidualMlp(ParamSet<T>& params, const std::string& name, std::size_t width,
              std::size_t hidden_layers)
      : width_(width) {
    for (std::size_t i = 0; i < hidden_layers; ++i)
      hidden_.emplace_back(params, name + ".hidden" + std::to_string(i), width, width);
    out_ = Linear<T>(params, name + ".out", width, width);
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t hidden_layers() const noexcept { return hidden_.size(); }
  const Linear<T>& output_layer() const noexcept { return out_; }

  void init(ParamSet<T>& p, Rng& rng) const {
    for (const auto& l : hidden_) l.init(p, rng);
    out_.init_zero(p);
  }

  struct Cache {
    std::vector<RowMat<T>> acts;  // input to each layer
  };

  RowMat<T> forward(const ParamSet<T>& p, const RowMat<T>& x, Cache* cache = nullptr) const {
    RowMat<T> h = x;
    if (cache) cache->acts.clear();
    for (const auto& l : hidden_) {
      if (cache) cache->acts.push_back(h);
      h = l.forward(p, h).array().tanh().matrix();
    }
    if (cache) cache->acts.push_back(h);
    return x + out_.forward(p, h);
  }

  RowMat<T> backward(const ParamSet<T>& p, const Cache& cache, const RowMat<T>& gy,
                     ParamSet<T>& g) const {
    RowMat<T> gh = out_.backward(p, cache.acts.back(), gy, g);
    for (std::size_t i = hidden_.size(); i-- > 0;) {
      const RowMat<T>& act = cache.acts[i + 1];  // tanh output of layer i
      RowMat<T> gpre = gh.array() * (T{1} - act.array().square());
      gh = hidden_[i].backward(p, cache.acts[i], gpre, g);
    }
    return gy + gh;
  }

 private:
  std::size_t width_ = 0;
  std::vector<Linear<T>> hidden_;
  Linear<T> out_;
};

}  // namespace bandmix::nn
