#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "bandmix/audio.hpp"
#include "bandmix/model/separator.hpp"
#include "bandmix/nn/init.hpp"
#include "bandmix/objective.hpp"
#include "bandmix/tensor.hpp"

namespace bandmix::testing {

struct GradCheckStats {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst = 0;
  std::string worst_name;
  std::size_t worst_element = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps round-off in gradients
/// that are numerically zero from reading as a large relative error.
inline double grad_rel_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences for every `stride`-th element of every parameter.
/// `loss(i)` must evaluate the scalar loss after parameter tensor i changed.
template <typename Loss>
GradCheckStats finite_difference_check(ParamSet<double>& params, const ParamSet<double>& grads,
                                       Loss&& loss, double step, double tol, double floor,
                                       std::size_t stride = 1) {
  GradCheckStats s;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i];
    for (std::size_t e = (i * 7) % stride; e < t.size(); e += stride) {
      const double keep = t[e];
      t[e] = keep + step;
      const double up = loss(i);
      t[e] = keep - step;
      const double down = loss(i);
      t[e] = keep;
      const double numeric = (up - down) / (2 * step);
      const double analytic = grads[i][e];
      const double err = grad_rel_error(analytic, numeric, floor);
      ++s.checked;
      if (!(err <= tol)) ++s.failed;
      if (!(err <= s.worst)) {
        s.worst = err;
        s.worst_name = params.name(i);
        s.worst_element = e;
        s.worst_analytic = analytic;
        s.worst_numeric = numeric;
      }
    }
  }
  return s;
}

/// Moves every parameter off its initial value so zero-initialised layers
/// (the beamformer output layers) also see nonzero gradients.
template <typename T>
void jitter_parameters(ParamSet<T>& p, std::uint64_t seed, double amount) {
  nn::Rng rng(seed);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (auto& v : p[i].vec()) v += static_cast<T>(rng.uniform(-amount, amount));
}

/// End-to-end problem on the tiny configuration: two channels, 16 frames,
/// 64 bins (n_fft 126), sub-bands [0,16) and [16,40). The scalar loss is the
/// full training objective of the waveform estimate against a reference.
/// Loss evaluations after a single parameter change only recompute the
/// stages downstream of that parameter.
class TinyGradProblem {
 public:
  static constexpr std::size_t kLength = 500;

  enum class Loss { kDemix, kSquared };

  explicit TinyGradProblem(Loss loss = Loss::kDemix, std::uint64_t seed = 7)
      : loss_kind_(loss),
        model_(make_config(), BandLayout{16, 40, 64}, StftConfig{126, 32, "hann", true}, seed) {
    jitter_parameters(model_.params(), seed + 1, 0.1);
    nn::Rng rng(seed + 2);
    mix_ = AudioSegment(2, kLength, 16000);
    ref_ = AudioSegment(2, kLength, 16000);
    for (auto& v : mix_.samples()) v = rng.uniform(-0.5, 0.5);
    for (auto& v : ref_.samples()) v = rng.uniform(-0.3, 0.3);
    spec_ = stft(mix_, model_.stft_config());
    const auto sub = band_split(spec_, model_.layout());
    x_full_ = stack_real_imag<double>(spectrogram_tensor(spec_));
    x_low_ = stack_real_imag<double>(sub.low);
    x_high_ = stack_real_imag<double>(sub.high);
    refresh();
  }

  static ModelConfig make_config() {
    ModelConfig cfg = tiny_model_config();
    cfg.sample_rate = 16000;
    return cfg;
  }

  SeparatorModel<double>& model() { return model_; }
  std::size_t frames() const { return spec_.frames(); }
  std::size_t bins() const { return spec_.bins(); }

  /// Recomputes the cached stage outputs from the current parameters.
  void refresh() {
    const auto& p = model_.params();
    typename UNetBranch<double>::Cache c;
    h_ = model_.full_branch().forward(p, x_full_, c);
    h1_ = model_.low_branch().forward(p, x_low_, c);
    h2_ = model_.high_branch().forward(p, x_high_, c);
    typename InteractiveFusion<double>::Cache fc;
    fused_ = model_.fusion().forward(p, h_, h1_, h2_, fc);
  }

  double full_loss() { return loss_of(istft(model_.forward(spec_).estimate, kLength)); }

  ParamSet<double> analytic_gradient() {
    typename SeparatorModel<double>::Cache cache;
    const auto out = model_.forward(spec_, &cache);
    const AudioSegment est = istft(out.estimate, kLength);
    const AudioSegment g = loss_grad(est);
    ParamSet<double> grads = model_.params().zeros_like();
    model_.backward(cache, istft_backward(g, out.estimate), grads);
    return grads;
  }

  /// Loss after parameter tensor `i` changed, reusing unaffected stages.
  double loss_after_change(std::size_t i) {
    const auto& p = model_.params();
    const std::string& name = p.name(i);
    MaskPair<double> fused;
    if (name.starts_with("beam.")) {
      fused = fused_;
    } else {
      Tensor<double> h = h_, h1 = h1_, h2 = h2_;
      typename UNetBranch<double>::Cache c;
      if (name.starts_with("full.")) h = model_.full_branch().forward(p, x_full_, c);
      if (name.starts_with("sub1.")) h1 = model_.low_branch().forward(p, x_low_, c);
      if (name.starts_with("sub2.")) h2 = model_.high_branch().forward(p, x_high_, c);
      typename InteractiveFusion<double>::Cache fc;
      fused = model_.fusion().forward(p, h, h1, h2, fc);
    }
    typename Beamformer<double>::Cache bc;
    const auto mask = model_.beamformer().forward(p, fused, bc);
    return loss_of(istft(apply_complex_mask(spec_, mask), kLength));
  }

 private:
  double loss_of(const AudioSegment& est) const {
    if (loss_kind_ == Loss::kDemix) return demix_loss(est, ref_, model_.stft_config()).total;
    double s = 0;
    for (std::size_t i = 0; i < est.samples().size(); ++i) {
      const double d = est.samples()[i] - ref_.samples()[i];
      s += 0.5 * d * d;
    }
    return s / static_cast<double>(est.samples().size());
  }

  AudioSegment loss_grad(const AudioSegment& est) const {
    if (loss_kind_ == Loss::kDemix) return demix_loss_grad(est, ref_, model_.stft_config());
    AudioSegment g(est.channels(), est.length(), est.sample_rate());
    const double n = static_cast<double>(est.samples().size());
    for (std::size_t i = 0; i < est.samples().size(); ++i)
      g.samples()[i] = (est.samples()[i] - ref_.samples()[i]) / n;
    return g;
  }

  Loss loss_kind_;
  SeparatorModel<double> model_;
  AudioSegment mix_, ref_;
  ComplexSpectrogram spec_;
  Tensor<double> x_full_, x_low_, x_high_;
  Tensor<double> h_, h1_, h2_;
  MaskPair<double> fused_;
};

}  // namespace bandmix::testing
