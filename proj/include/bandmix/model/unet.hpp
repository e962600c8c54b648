#pragma once

#include <string>
#include <vector>

#include "bandmix/model/config.hpp"
#include "bandmix/model/dprnn.hpp"
#include "bandmix/nn/conv.hpp"
#include "bandmix/nn/layers.hpp"

namespace bandmix {

/// Smallest band width a U-Net of `depth` stages accepts.
inline std::size_t min_branch_bins(std::size_t depth) { return std::size_t{1} << depth; }

/// Bin count after each frequency-halving encoder stage: widths[0] is the
/// input width, widths[depth] the bottleneck width.
inline std::vector<std::size_t> stage_widths(std::size_t bins, std::size_t depth) {
  std::vector<std::size_t> w{bins};
  for (std::size_t i = 0; i < depth; ++i) w.push_back((w.back() + 1) / 2);
  return w;
}

/// One U-Net branch: stride-2-in-frequency conv encoder, DPRNN bottleneck,
/// transposed-conv decoder with skip concatenation at every scale.
/// Input [2C x T x Fb] (real parts stacked over imaginary parts), output
/// [mask_channels x T x Fb].
template <typename T>
class UNetBranch {
 public:
  UNetBranch() = default;
  UNetBranch(ParamSet<T>& params, const std::string& name, const ModelConfig& cfg,
             std::size_t bins)
      : name_(name), bins_(bins), slope_(static_cast<T>(cfg.leaky_slope)) {
    require(bins >= min_branch_bins(cfg.encoder_depth), "branch '", name, "' has ", bins,
            " bins; a depth-", cfg.encoder_depth, " encoder needs at least ",
            min_branch_bins(cfg.encoder_depth), " or the frequency axis collapses");
    const auto plan = cfg.channel_plan();
    const nn::ConvGeometry geom{3, 3, 1, 2, 1, 1};
    std::size_t in = 2 * cfg.audio_channels;
    for (std::size_t i = 0; i < plan.size(); ++i) {
      const std::string stage = name + ".enc" + std::to_string(i);
      // no conv bias where instance norm follows: the norm would cancel it
      encoders_.push_back({nn::Conv2d<T>(params, stage + ".conv", in, plan[i], geom, false),
                           nn::InstanceNorm<T>(params, stage + ".norm", plan[i])});
      in = plan[i];
    }
    for (std::size_t b = 0; b < cfg.dprnn_blocks; ++b)
      dprnn_.emplace_back(params, name + ".dprnn" + std::to_string(b), plan.back(),
                          cfg.rnn_hidden());
    for (std::size_t i = plan.size(); i-- > 0;) {
      const std::string stage = name + ".dec" + std::to_string(i);
      const std::size_t out = i == 0 ? cfg.mask_channels() : plan[i - 1];
      Decoder d{nn::ConvTranspose2d<T>(params, stage + ".deconv", 2 * plan[i], out, geom, i == 0),
                {}, i > 0};
      if (d.has_norm) d.norm = nn::InstanceNorm<T>(params, stage + ".norm", out);
      decoders_.push_back(std::move(d));
    }
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t bins() const noexcept { return bins_; }
  const std::vector<DprnnBlock<T>>& dprnn_blocks() const noexcept { return dprnn_; }

  void init(ParamSet<T>& p, nn::Rng& rng) const {
    for (const auto& e : encoders_) {
      e.conv.init(p, rng);
      e.norm.init(p, rng);
    }
    for (const auto& b : dprnn_) b.init(p, rng);
    for (const auto& d : decoders_) {
      d.deconv.init(p, rng);
      if (d.has_norm) d.norm.init(p, rng);
    }
  }

  struct Cache {
    std::vector<Tensor<T>> enc_in, enc_conv, enc_norm;
    std::vector<typename DprnnBlock<T>::Cache> dprnn;
    std::vector<Tensor<T>> dprnn_in;
    std::vector<Tensor<T>> dec_in, dec_conv, dec_norm;
  };

  Tensor<T> forward(const ParamSet<T>& p, const Tensor<T>& x, Cache& cache) const {
    require(x.rank() == 3 && x.dim(2) == bins_, "branch '", name_, "' expects ", bins_,
            " bins, got ", shape_str(x.shape()));
    cache = Cache{};
    Tensor<T> h = x;
    for (std::size_t i = 0; i < encoders_.size(); ++i) {
      cache.enc_in.push_back(h);
      cache.enc_conv.push_back(encoders_[i].conv.forward(p, h));
      cache.enc_norm.push_back(encoders_[i].norm.forward(p, cache.enc_conv.back()));
      h = nn::leaky_relu(cache.enc_norm.back(), slope_);
      check(h, "enc" + std::to_string(i));
    }
    cache.dprnn.resize(dprnn_.size());
    for (std::size_t b = 0; b < dprnn_.size(); ++b) {
      cache.dprnn_in.push_back(h);
      h = dprnn_[b].forward(p, h, cache.dprnn[b]);
      check(h, "dprnn" + std::to_string(b));
    }
    for (std::size_t k = 0; k < decoders_.size(); ++k) {
      const std::size_t i = decoders_.size() - 1 - k;  // matching encoder stage
      const Tensor<T>& skip = i + 1 < encoders_.size() ? cache.enc_in[i + 1] : h_after_encoder(cache);
      cache.dec_in.push_back(concat_channels(h, skip));
      const auto& target = cache.enc_in[i];
      cache.dec_conv.push_back(
          decoders_[k].deconv.forward(p, cache.dec_in.back(), target.dim(1), target.dim(2)));
      if (i > 0) {
        cache.dec_norm.push_back(decoders_[k].norm.forward(p, cache.dec_conv.back()));
        h = nn::leaky_relu(cache.dec_norm.back(), slope_);
      } else {
        cache.dec_norm.emplace_back();
        h = cache.dec_conv.back();
      }
      check(h, "dec" + std::to_string(i));
    }
    return h;
  }

  Tensor<T> backward(const ParamSet<T>& p, const Cache& cache, const Tensor<T>& gy,
                     ParamSet<T>& g) const {
    const std::size_t depth = encoders_.size();
    std::vector<Tensor<T>> skip_grad(depth);  // gradient into each encoder output
    Tensor<T> gh = gy;
    for (std::size_t k = decoders_.size(); k-- > 0;) {
      const std::size_t i = depth - 1 - k;
      Tensor<T> gconv = gh;
      if (i > 0) {
        gconv = nn::leaky_relu_backward(cache.dec_norm[k], gh, slope_);
        gconv = decoders_[k].norm.backward(p, cache.dec_conv[k], gconv, g);
      }
      const Tensor<T> gin = decoders_[k].deconv.backward(p, cache.dec_in[k], gconv, g);
      const std::size_t prev_ch = cache.dec_in[k].dim(0) / 2;
      skip_grad[i] = slice_channels(gin, prev_ch, gin.dim(0));
      gh = slice_channels(gin, 0, prev_ch);
    }
    for (std::size_t b = dprnn_.size(); b-- > 0;) gh = dprnn_[b].backward(p, cache.dprnn[b], gh, g);
    for (std::size_t i = depth; i-- > 0;) {
      gh += skip_grad[i];
      Tensor<T> gn = nn::leaky_relu_backward(cache.enc_norm[i], gh, slope_);
      Tensor<T> gc = encoders_[i].norm.backward(p, cache.enc_conv[i], gn, g);
      gh = encoders_[i].conv.backward(p, cache.enc_in[i], gc, g);
    }
    return gh;
  }

 private:
  struct Encoder {
    nn::Conv2d<T> conv;
    nn::InstanceNorm<T> norm;
  };
  struct Decoder {
    nn::ConvTranspose2d<T> deconv;
    nn::InstanceNorm<T> norm;
    bool has_norm = false;  // the mask output stage is linear
  };

  // Output of the deepest encoder stage (input to the first DPRNN block).
  static const Tensor<T>& h_after_encoder(const Cache& cache) { return cache.dprnn_in.front(); }

  void check(const Tensor<T>& h, const std::string& layer) const {
    require<NonFiniteError>(h.finite(), "non-finite activations in branch '", name_,
                            "' at layer ", layer);
  }

  std::string name_;
  std::size_t bins_ = 0;
  T slope_ = T(0.01);
  std::vector<Encoder> encoders_;
  std::vector<DprnnBlock<T>> dprnn_;
  std::vector<Decoder> decoders_;  // deepest first
};

}  // namespace bandmix
