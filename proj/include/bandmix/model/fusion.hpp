#pragma once

#include <string>

#include "bandmix/bands.hpp"
#include "bandmix/mask.hpp"
#include "bandmix/model/config.hpp"
#include "bandmix/nn/conv.hpp"
#include "bandmix/nn/layers.hpp"

namespace bandmix {

/// Merges the full-band mask embedding H [M x T x F] with the sub-band ones
/// H1 [M x T x F1] and H2 [M x T x F2] (M = mask channels):
///
///   Ha = H[:, :, :F1+F2]          Hb = H[:, :, F1+F2:]
///   S  = [ [H1 | H2] ; Ha ]       channels 2M, bins F1+F2
///   S1 = conv1x1(S)               channels M
///   full = [S1 | Hb]              channels M, bins F
///   real = conv1x1_r(full), imag = conv1x1_i(full)   channels C
///
/// ('|' concatenates bins, ';' concatenates channels). Every kernel is 1x1,
/// so bins >= F1+F2 of the output only ever see Hb.
template <typename T>
class InteractiveFusion {
 public:
  InteractiveFusion() = default;
  InteractiveFusion(ParamSet<T>& params, const std::string& name, const ModelConfig& cfg,
                    const BandLayout& layout)
      : layout_(layout), mask_ch_(cfg.mask_channels()) {
    const nn::ConvGeometry k1{};
    merge_ = nn::Conv2d<T>(params, name + ".merge", 2 * mask_ch_, mask_ch_, k1);
    real_ = nn::Conv2d<T>(params, name + ".real", mask_ch_, cfg.audio_channels, k1);
    imag_ = nn::Conv2d<T>(params, name + ".imag", mask_ch_, cfg.audio_channels, k1);
  }

  const nn::Conv2d<T>& merge_conv() const noexcept { return merge_; }
  const nn::Conv2d<T>& real_conv() const noexcept { return real_; }
  const nn::Conv2d<T>& imag_conv() const noexcept { return imag_; }

  void init(ParamSet<T>& p, nn::Rng& rng) const {
    merge_.init(p, rng);
    real_.init(p, rng);
    imag_.init(p, rng);
  }

  struct Cache {
    Tensor<T> merged_in;  // S
    Tensor<T> full;       // [S1 | Hb]
  };

  MaskPair<T> forward(const ParamSet<T>& p, const Tensor<T>& h, const Tensor<T>& h1,
                      const Tensor<T>& h2, Cache& cache) const {
    const std::size_t sub = layout_.sub_bins();
    require(h.rank() == 3 && h.dim(0) == mask_ch_ && h.dim(2) == layout_.total_bins,
            "interactive_fuse: full-band embedding ", shape_str(h.shape()), " expected ",
            mask_ch_, " channels and ", layout_.total_bins, " bins");
    require(h1.dim(2) == layout_.f1_bins() && h2.dim(2) == layout_.f2_bins() &&
                h1.dim(2) + h2.dim(2) == sub,
            "interactive_fuse: sub-band widths ", h1.dim(2), "+", h2.dim(2),
            " do not match layout F1+F2=", sub);
    require(h1.dim(0) == mask_ch_ && h2.dim(0) == mask_ch_ && h1.dim(1) == h.dim(1) &&
                h2.dim(1) == h.dim(1),
            "interactive_fuse: embedding shapes disagree");
    cache.merged_in = concat_channels(concat_bins(h1, h2), slice_bins(h, 0, sub));
    const Tensor<T> s1 = merge_.forward(p, cache.merged_in);
    cache.full = concat_bins(s1, slice_bins(h, sub, h.dim(2)));
    return {real_.forward(p, cache.full), imag_.forward(p, cache.full)};
  }

  struct InputGrads {
    Tensor<T> h, h1, h2;
  };

  InputGrads backward(const ParamSet<T>& p, const Cache& cache, const MaskPair<T>& gy,
                      ParamSet<T>& g) const {
    const std::size_t sub = layout_.sub_bins();
    Tensor<T> gfull = real_.backward(p, cache.full, gy.real, g);
    gfull += imag_.backward(p, cache.full, gy.imag, g);
    const Tensor<T> gs1 = slice_bins(gfull, 0, sub);
    const Tensor<T> ghb = slice_bins(gfull, sub, gfull.dim(2));
    const Tensor<T> gs = merge_.backward(p, cache.merged_in, gs1, g);
    const Tensor<T> gsub = slice_channels(gs, 0, mask_ch_);
    InputGrads out;
    out.h1 = slice_bins(gsub, 0, layout_.cut1);
    out.h2 = slice_bins(gsub, layout_.cut1, sub);
    out.h = concat_bins(slice_channels(gs, mask_ch_, 2 * mask_ch_), ghb);
    return out;
  }

 private:
  BandLayout layout_;
  std::size_t mask_ch_ = 0;
  nn::Conv2d<T> merge_, real_, imag_;
};

/// Frequency-axis MLPs that adjust the real and imaginary mask parts. Each
/// (channel, frame) row of F bins goes through its part's MLP; there is no
/// mixing across frames or channels.
template <typename T>
class Beamformer {
 public:
  Beamformer() = default;
  Beamformer(ParamSet<T>& params, const std::string& name, std::size_t bins,
             std::size_t hidden_layers)
      : real_(params, name + ".real", bins, hidden_layers),
        imag_(params, name + ".imag", bins, hidden_layers) {}

  const nn::ResidualMlp<T>& real_mlp() const noexcept { return real_; }
  const nn::ResidualMlp<T>& imag_mlp() const noexcept { return imag_; }

  void init(ParamSet<T>& p, nn::Rng& rng) const {
    real_.init(p, rng);
    imag_.init(p, rng);
  }

  struct Cache {
    typename nn::ResidualMlp<T>::Cache real, imag;
  };

  MaskPair<T> forward(const ParamSet<T>& p, const MaskPair<T>& m, Cache& cache) const {
    return {apply(p, real_, m.real, &cache.real), apply(p, imag_, m.imag, &cache.imag)};
  }

  MaskPair<T> backward(const ParamSet<T>& p, const Cache& cache, const MaskPair<T>& gy,
                       ParamSet<T>& g) const {
    return {back(p, real_, cache.real, gy.real, g), back(p, imag_, cache.imag, gy.imag, g)};
  }

 private:
  static Tensor<T> apply(const ParamSet<T>& p, const nn::ResidualMlp<T>& mlp, const Tensor<T>& x,
                         typename nn::ResidualMlp<T>::Cache* cache) {
    require(x.rank() == 3 && x.dim(2) == mlp.width(), "beamformer expects ", mlp.width(),
            " bins, got ", shape_str(x.shape()));
    const auto rows = static_cast<Eigen::Index>(x.dim(0) * x.dim(1));
    const nn::RowMat<T> y =
        mlp.forward(p, nn::ConstMatMap<T>(x.data(), rows, static_cast<Eigen::Index>(x.dim(2))), cache);
    Tensor<T> out(x.shape());
    std::copy_n(y.data(), out.size(), out.data());
    return out;
  }

  static Tensor<T> back(const ParamSet<T>& p, const nn::ResidualMlp<T>& mlp,
                        const typename nn::ResidualMlp<T>::Cache& cache, const Tensor<T>& gy,
                        ParamSet<T>& g) {
    const auto rows = static_cast<Eigen::Index>(gy.dim(0) * gy.dim(1));
    const nn::RowMat<T> gx = mlp.backward(
        p, cache, nn::ConstMatMap<T>(gy.data(), rows, static_cast<Eigen::Index>(gy.dim(2))), g);
    Tensor<T> out(gy.shape());
    std::copy_n(gx.data(), out.size(), out.data());
    return out;
  }

  nn::ResidualMlp<T> real_, imag_;
};

}  // namespace bandmix
