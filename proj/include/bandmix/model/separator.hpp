#pragma once

#include <cstdint>
#include <string>

#include "bandmix/bands.hpp"
#include "bandmix/chunking.hpp"
#include "bandmix/mask.hpp"
#include "bandmix/model/config.hpp"
#include "bandmix/model/fusion.hpp"
#include "bandmix/model/unet.hpp"
#include "bandmix/stft.hpp"

namespace bandmix {

/// Parameters are stored as 32-bit floats on disk, whatever T is in memory.
inline constexpr std::size_t kBytesPerStoredParam = 4;

/// Separator for one track: three U-Net+DPRNN branches (full band, sub-band
/// 1, sub-band 2), the interactive fusion block, and the beamformer MLPs.
/// A built model is immutable during inference, so concurrent forward()
/// calls are safe.
template <typename T>
class SeparatorModel {
 public:
  SeparatorModel(ModelConfig cfg, BandLayout layout, StftConfig stft_cfg, std::uint64_t seed)
      : SeparatorModel(std::move(cfg), layout, std::move(stft_cfg), seed, true) {}

  /// Same architecture, parameters left at zero (for loading checkpoints).
  static SeparatorModel uninitialized(ModelConfig cfg, BandLayout layout, StftConfig stft_cfg,
                                      std::uint64_t seed = 0) {
    return SeparatorModel(std::move(cfg), layout, std::move(stft_cfg), seed, false);
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  const BandLayout& layout() const noexcept { return layout_; }
  const StftConfig& stft_config() const noexcept { return stft_; }
  std::uint64_t seed() const noexcept { return seed_; }

  ParamSet<T>& params() noexcept { return params_; }
  const ParamSet<T>& params() const noexcept { return params_; }
  std::size_t parameter_count() const { return params_.numel(); }
  std::size_t parameter_bytes() const { return parameter_count() * kBytesPerStoredParam; }
  double parameter_megabytes() const {
    return static_cast<double>(parameter_bytes()) / (1024.0 * 1024.0);
  }

  const UNetBranch<T>& full_branch() const noexcept { return full_; }
  const UNetBranch<T>& low_branch() const noexcept { return low_; }
  const UNetBranch<T>& high_branch() const noexcept { return high_; }
  const InteractiveFusion<T>& fusion() const noexcept { return fuse_; }
  const Beamformer<T>& beamformer() const noexcept { return beam_; }

  struct Cache {
    ComplexSpectrogram mixture;
    typename UNetBranch<T>::Cache full, low, high;
    typename InteractiveFusion<T>::Cache fuse;
    typename Beamformer<T>::Cache beam;
  };

  struct Output {
    ComplexSpectrogram estimate;
    MaskPair<T> mask;
  };

  /// Mixture spectrogram in, masked estimate out.
  Output forward(const ComplexSpectrogram& mix, Cache* cache = nullptr) const {
    require(mix.config() == stft_, "forward: spectrogram STFT config differs from the model's");
    require(mix.bins() == layout_.total_bins, "forward: spectrogram has ", mix.bins(),
            " bins, model expects ", layout_.total_bins);
    require(mix.channels() == cfg_.audio_channels, "forward: model expects ",
            cfg_.audio_channels, " channels, got ", mix.channels());
    Cache local;
    Cache& c = cache ? *cache : local;
    c.mixture = mix;
    const SubBands sub = band_split(mix, layout_);
    const Tensor<T> h = full_.forward(params_, stack_real_imag<T>(spectrogram_tensor(mix)), c.full);
    const Tensor<T> h1 = low_.forward(params_, stack_real_imag<T>(sub.low), c.low);
    const Tensor<T> h2 = high_.forward(params_, stack_real_imag<T>(sub.high), c.high);
    MaskPair<T> mask = beam_.forward(params_, fuse_.forward(params_, h, h1, h2, c.fuse), c.beam);
    ComplexSpectrogram est = apply_complex_mask(mix, mask);
    return {std::move(est), std::move(mask)};
  }

  /// Accumulates dL/dparams into `grads` given dL/d(estimate) as a complex
  /// spectrogram (dL/dRe + i dL/dIm). Input-feature gradients are dropped.
  void backward(const Cache& c, const ComplexSpectrogram& grad_estimate, ParamSet<T>& grads) const {
    const MaskPair<T> gmask = apply_complex_mask_backward<T>(c.mixture, grad_estimate);
    const MaskPair<T> gfused = beam_.backward(params_, c.beam, gmask, grads);
    const auto gin = fuse_.backward(params_, c.fuse, gfused, grads);
    full_.backward(params_, c.full, gin.h, grads);
    low_.backward(params_, c.low, gin.h1, grads);
    high_.backward(params_, c.high, gin.h2, grads);
  }

  template <typename U>
  SeparatorModel<U> cast() const {
    auto out = SeparatorModel<U>::uninitialized(cfg_, layout_, stft_, seed_);
    out.params() = params_.template cast<U>();
    return out;
  }

 private:
  SeparatorModel(ModelConfig cfg, BandLayout layout, StftConfig stft_cfg, std::uint64_t seed,
                 bool initialize)
      : cfg_(std::move(cfg)), layout_(layout), stft_(std::move(stft_cfg)), seed_(seed) {
    cfg_.validate();
    stft_.validate();
    layout_.validate();
    require(layout_.total_bins == stft_.bins(), "band layout has ", layout_.total_bins,
            " bins but the STFT produces ", stft_.bins());
    full_ = UNetBranch<T>(params_, "full", cfg_, layout_.total_bins);
    low_ = UNetBranch<T>(params_, "sub1", cfg_, layout_.f1_bins());
    high_ = UNetBranch<T>(params_, "sub2", cfg_, layout_.f2_bins());
    fuse_ = InteractiveFusion<T>(params_, "fuse", cfg_, layout_);
    beam_ = Beamformer<T>(params_, "beam", layout_.total_bins, cfg_.mlp_hidden_layers);
    if (initialize) {
      nn::Rng rng(seed_);
      full_.init(params_, rng);
      low_.init(params_, rng);
      high_.init(params_, rng);
      fuse_.init(params_, rng);
      beam_.init(params_, rng);
    }
  }

  ModelConfig cfg_;
  BandLayout layout_;
  StftConfig stft_;
  std::uint64_t seed_ = 0;
  ParamSet<T> params_;
  UNetBranch<T> full_, low_, high_;
  InteractiveFusion<T> fuse_;
  Beamformer<T> beam_;
};

template <typename T = float>
SeparatorModel<T> build_model(const ModelConfig& cfg, const BandLayout& layout,
                              const StftConfig& stft_cfg, std::uint64_t seed) {
  return SeparatorModel<T>(cfg, layout, stft_cfg, seed);
}

struct SeparateOptions {
  double chunk_seconds = 4.0;
  double overlap = 0.5;

  friend bool operator==(const SeparateOptions&, const SeparateOptions&) = default;
};

/// Mixture waveform in, stem estimate out (same length): chunked STFT ->
/// forward -> iSTFT with cross-faded chunk boundaries.
template <typename T>
AudioSegment separate(const SeparatorModel<T>& model, const AudioSegment& mixture,
                      const SeparateOptions& opts = {}) {
  require(mixture.sample_rate() == model.config().sample_rate, "separate: mixture is ",
          mixture.sample_rate(), " Hz, model expects ", model.config().sample_rate, " Hz");
  require(mixture.channels() == model.config().audio_channels, "separate: model expects ",
          model.config().audio_channels, " channels, got ", mixture.channels());
  return chunk_and_stitch(mixture, opts.chunk_seconds, opts.overlap,
                          [&](const AudioSegment& chunk) {
                            const auto spec = stft(chunk, model.stft_config());
                            return istft(model.forward(spec).estimate, chunk.length());
                          });
}

}  // namespace bandmix
