#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>

#include "bandmix/nn/init.hpp"
#include "bandmix/tensor.hpp"

namespace bandmix::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

/// Sliding-window geometry over a [channels x H x W] grid (H = frames, W = bins).
struct ConvGeometry {
  std::size_t kh = 1, kw = 1;  // kernel
  std::size_t sh = 1, sw = 1;  // stride
  std::size_t ph = 0, pw = 0;  // zero padding

  std::size_t out_h(std::size_t h) const { return (h + 2 * ph - kh) / sh + 1; }
  std::size_t out_w(std::size_t w) const { return (w + 2 * pw - kw) / sw + 1; }
};

/// Unfolds x [C x H x W] into [C*kh*kw x Ho*Wo].
template <typename T>
RowMat<T> im2col(const Tensor<T>& x, const ConvGeometry& g, std::size_t ho, std::size_t wo) {
  const std::size_t c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  RowMat<T> cols = RowMat<T>::Zero(static_cast<Eigen::Index>(c_in * g.kh * g.kw),
                                   static_cast<Eigen::Index>(ho * wo));
  for (std::size_t c = 0; c < c_in; ++c)
    for (std::size_t ki = 0; ki < g.kh; ++ki)
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = cols.data() + ((c * g.kh + ki) * g.kw + kj) * ho * wo;
        for (std::size_t oh = 0; oh < ho; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.sh + ki) -
                                    static_cast<std::ptrdiff_t>(g.ph);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
          const T* src = x.data() + (c * h + static_cast<std::size_t>(ih)) * w;
          for (std::size_t ow = 0; ow < wo; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.sw + kj) -
                                      static_cast<std::ptrdiff_t>(g.pw);
            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(w)) row[oh * wo + ow] = src[iw];
          }
        }
      }
  return cols;
}

/// Adjoint of im2col: scatters-and-adds columns back into a [C x H x W] grid.
template <typename T>
Tensor<T> col2im(const RowMat<T>& cols, const ConvGeometry& g, std::size_t c_in, std::size_t h,
                 std::size_t w, std::size_t ho, std::size_t wo) {
  Tensor<T> x({c_in, h, w});
  for (std::size_t c = 0; c < c_in; ++c)
    for (std::size_t ki = 0; ki < g.kh; ++ki)
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = cols.data() + ((c * g.kh + ki) * g.kw + kj) * ho * wo;
        for (std::size_t oh = 0; oh < ho; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.sh + ki) -
                                    static_cast<std::ptrdiff_t>(g.ph);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
          T* dst = x.data() + (c * h + static_cast<std::size_t>(ih)) * w;
          for (std::size_t ow = 0; ow < wo; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.sw + kj) -
                                      static_cast<std::ptrdiff_t>(g.pw);
            if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(w)) dst[iw] += row[oh * wo + ow];
          }
        }
      }
  return x;
}

/// 2D convolution, weight [out x in x kh x kw], optional bias [out].
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
         ConvGeometry geom, bool bias = true)
      : in_(in), out_(out), geom_(geom), has_bias_(bias) {
    weight_ = params.add(name + ".weight", {out, in, geom.kh, geom.kw});
    if (bias) bias_ = params.add(name + ".bias", {out});
  }

  std::size_t in_channels() const noexcept { return in_; }
  std::size_t out_channels() const noexcept { return out_; }
  const ConvGeometry& geometry() const noexcept { return geom_; }
  std::size_t weight_index() const noexcept { return weight_; }
  bool has_bias() const noexcept { return has_bias_; }
  std::size_t bias_index() const {
    require(has_bias_, "convolution has no bias");
    return bias_;
  }

  void init(ParamSet<T>& p, Rng& rng) const {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * geom_.kh * geom_.kw));
    fill_uniform(p[weight_], rng, bound);
    if (has_bias_) fill_uniform(p[bias_], rng, bound);
  }

  Tensor<T> forward(const ParamSet<T>& p, const Tensor<T>& x) const {
    require(x.rank() == 3 && x.dim(0) == in_, "Conv2d expects ", in_, " input channels, got ",
            shape_str(x.shape()));
    const std::size_t ho = geom_.out_h(x.dim(1)), wo = geom_.out_w(x.dim(2));
    const RowMat<T> cols = im2col(x, geom_, ho, wo);
    Tensor<T> y({out_, ho, wo});
    MatMap<T> ym(y.data(), out_, ho * wo);
    ym.noalias() = weight_mat(p) * cols;
    add_bias(p, y);
    return y;
  }

  /// Returns dL/dx and accumulates parameter gradients into `g`.
  Tensor<T> backward(const ParamSet<T>& p, const Tensor<T>& x, const Tensor<T>& gy,
                     ParamSet<T>& g) const {
    const std::size_t ho = gy.dim(1), wo = gy.dim(2);
    const RowMat<T> cols = im2col(x, geom_, ho, wo);
    ConstMatMap<T> gym(gy.data(), out_, ho * wo);
    MatMap<T>(g[weight_].data(), out_, in_ * geom_.kh * geom_.kw).noalias() +=
        gym * cols.transpose();
    if (has_bias_)
      for (std::size_t o = 0; o < out_; ++o) g[bias_][o] += gym.row(o).sum();
    const RowMat<T> gcols = weight_mat(p).transpose() * gym;
    return col2im(gcols, geom_, in_, x.dim(1), x.dim(2), ho, wo);
  }

 private:
  ConstMatMap<T> weight_mat(const ParamSet<T>& p) const {
    return ConstMatMap<T>(p[weight_].data(), out_, in_ * geom_.kh * geom_.kw);
  }
  void add_bias(const ParamSet<T>& p, Tensor<T>& y) const {
    if (!has_bias_) return;
    const std::size_t plane = y.dim(1) * y.dim(2);
    for (std::size_t o = 0; o < out_; ++o) {
      const T b = p[bias_][o];
      T* row = y.data() + o * plane;
      for (std::size_t i = 0; i < plane; ++i) row[i] += b;
    }
  }

  std::size_t in_ = 0, out_ = 0;
  ConvGeometry geom_;
  bool has_bias_ = true;
  std::size_t weight_ = 0, bias_ = 0;
};

/// Transposed 2D convolution, weight [in x out x kh x kw], optional bias [out]. The
/// output size is passed explicitly so decoders can land exactly on the
/// matching encoder resolution.
template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
                  ConvGeometry geom, bool bias = true)
      : in_(in), out_(out), geom_(geom), has_bias_(bias) {
    weight_ = params.add(name + ".weight", {in, out, geom.kh, geom.kw});
    if (bias) bias_ = params.add(name + ".bias", {out});
  }

  std::size_t in_channels() const noexcept { return in_; }
  std::size_t out_channels() const noexcept { return out_; }

  void init(ParamSet<T>& p, Rng& rng) const {
    const double bound = 1.0 / std::sqrt(static_cast<double>(out_ * geom_.kh * geom_.kw));
    fill_uniform(p[weight_], rng, bound);
    if (has_bias_) fill_uniform(p[bias_], rng, bound);
  }

  Tensor<T> forward(const ParamSet<T>& p, const Tensor<T>& x, std::size_t out_h,
                    std::size_t out_w) const {
    require(x.rank() == 3 && x.dim(0) == in_, "ConvTranspose2d expects ", in_,
            " input channels, got ", shape_str(x.shape()));
    require(geom_.out_h(out_h) == x.dim(1) && geom_.out_w(out_w) == x.dim(2),
            "ConvTranspose2d: output size ", out_h, "x", out_w, " inconsistent with input ",
            shape_str(x.shape()));
    const std::size_t hw = x.dim(1) * x.dim(2);
    ConstMatMap<T> xm(x.data(), in_, hw);
    const RowMat<T> cols = weight_mat(p).transpose() * xm;
    Tensor<T> y = col2im(cols, geom_, out_, out_h, out_w, x.dim(1), x.dim(2));
    const std::size_t plane = out_h * out_w;
    for (std::size_t o = 0; has_bias_ && o < out_; ++o) {
      const T b = p[bias_][o];
      for (std::size_t i = 0; i < plane; ++i) y[o * plane + i] += b;
    }
    return y;
  }

  Tensor<T> backward(const ParamSet<T>& p, const Tensor<T>& x, const Tensor<T>& gy,
                     ParamSet<T>& g) const {
    const std::size_t hi = x.dim(1), wi = x.dim(2), plane = gy.dim(1) * gy.dim(2);
    const RowMat<T> gcols = im2col(gy, geom_, hi, wi);
    ConstMatMap<T> xm(x.data(), in_, hi * wi);
    MatMap<T>(g[weight_].data(), in_, out_ * geom_.kh * geom_.kw).noalias() +=
        xm * gcols.transpose();
    for (std::size_t o = 0; has_bias_ && o < out_; ++o) {
      T s{0};
      for (std::size_t i = 0; i < plane; ++i) s += gy[o * plane + i];
      g[bias_][o] += s;
    }
    Tensor<T> gx({in_, hi, wi});
    MatMap<T>(gx.data(), in_, hi * wi).noalias() = weight_mat(p) * gcols;
    return gx;
  }

 private:
  ConstMatMap<T> weight_mat(const ParamSet<T>& p) const {
    return ConstMatMap<T>(p[weight_].data(), in_, out_ * geom_.kh * geom_.kw);
  }

  std::size_t in_ = 0, out_ = 0;
  ConvGeometry geom_;
  bool has_bias_ = true;
  std::size_t weight_ = 0, bias_ = 0;
};

}  // namespace bandmix::nn
