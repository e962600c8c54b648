#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "bandmix/audio.hpp"
#include "bandmix/common.hpp"

namespace bandmix {

using cplx = std::complex<double>;

struct StftConfig {
  std::size_t n_fft = 2048;
  std::size_t hop = 600;
  std::string window = "hann";
  bool center = true;

  std::size_t bins() const noexcept { return n_fft / 2 + 1; }

  void validate() const {
    require(n_fft >= 2 && n_fft % 2 == 0, "n_fft must be even and >= 2, got ", n_fft);
    require(hop > 0 && hop <= n_fft, "hop must be in (0, n_fft], got ", hop);
    require(window == "hann", "unsupported window '", window, "' (only hann)");
  }

  /// Frame count produced for a signal of `length` samples.
  std::size_t frames_for(std::size_t length) const {
    if (center) return length / hop + 1;
    require(length >= n_fft, "signal shorter than one frame without center padding");
    return (length - n_fft) / hop + 1;
  }

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

/// Periodic Hann window of length n.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
  return w;
}

/// Complex spectrogram [channels x frames x bins].
class ComplexSpectrogram {
 public:
  ComplexSpectrogram() = default;
  ComplexSpectrogram(std::size_t channels, std::size_t frames, StftConfig cfg, int sample_rate)
      : channels_(channels), frames_(frames), cfg_(std::move(cfg)), sample_rate_(sample_rate),
        values_(channels * frames * cfg_.bins()) {}

  std::size_t channels() const noexcept { return channels_; }
  std::size_t frames() const noexcept { return frames_; }
  std::size_t bins() const noexcept { return cfg_.bins(); }
  const StftConfig& config() const noexcept { return cfg_; }
  int sample_rate() const noexcept { return sample_rate_; }

  cplx& operator()(std::size_t c, std::size_t t, std::size_t f) noexcept {
    return values_[(c * frames_ + t) * bins() + f];
  }
  const cplx& operator()(std::size_t c, std::size_t t, std::size_t f) const noexcept {
    return values_[(c * frames_ + t) * bins() + f];
  }
  std::vector<cplx>& values() noexcept { return values_; }
  const std::vector<cplx>& values() const noexcept { return values_; }

  bool finite() const {
    for (const auto& v : values_)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }
  bool same_shape(const ComplexSpectrogram& o) const {
    return channels_ == o.channels_ && frames_ == o.frames_ && bins() == o.bins();
  }

 private:
  std::size_t channels_ = 0;
  std::size_t frames_ = 0;
  StftConfig cfg_;
  int sample_rate_ = 44100;
  std::vector<cplx> values_;
};

namespace detail {

/// Unnormalized real FFT of one size. Plans are created once and shared;
/// execution uses FFTW's new-array interface, which is thread-safe.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    std::vector<double> r(n);
    std::vector<cplx> c(n / 2 + 1);
    const int flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::lock_guard lock(planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), r.data(),
                                    reinterpret_cast<fftw_complex*>(c.data()), flags);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(c.data()),
                                    r.data(), flags);
    require<Error>(forward_ && inverse_, "FFTW plan creation failed for n=", n);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  std::size_t size() const noexcept { return n_; }

  void forward(double* in, cplx* out) const {
    fftw_execute_dft_r2c(forward_, in, reinterpret_cast<fftw_complex*>(out));
  }
  /// Hermitian inverse without the 1/n factor. Clobbers `in`.
  void inverse(cplx* in, double* out) const {
    fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(in), out);
  }

  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

 private:
  std::size_t n_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

inline std::shared_ptr<const RealFft> real_fft(std::size_t n) {
  // The mutex must outlive the cache, whose plans lock it on destruction.
  std::mutex& mutex = RealFft::planner_mutex();
  static std::map<std::size_t, std::shared_ptr<const RealFft>> cache;
  {
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
  }
  auto plan = std::make_shared<const RealFft>(n);
  std::lock_guard lock(mutex);
  return cache.emplace(n, std::move(plan)).first->second;
}

inline std::size_t pad_left(const StftConfig& cfg) { return cfg.center ? cfg.n_fft / 2 : 0; }

/// Sum over frames of the squared window at every position of the padded signal.
inline std::vector<double> window_square_sum(const StftConfig& cfg, std::size_t frames) {
  const auto w = hann_window(cfg.n_fft);
  std::vector<double> acc((frames - 1) * cfg.hop + cfg.n_fft, 0.0);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t n = 0; n < cfg.n_fft; ++n) acc[t * cfg.hop + n] += w[n] * w[n];
  return acc;
}

constexpr double kMinWindowSum = 1e-11;

}  // namespace detail

/// Short-time Fourier transform with a periodic Hann window. With center
/// padding the signal is zero-padded by n_fft/2 on both sides so frame t is
/// centred on sample t*hop.
inline ComplexSpectrogram stft(const AudioSegment& audio, const StftConfig& cfg) {
  cfg.validate();
  require(audio.length() > 0, "stft: empty audio");
  require<NonFiniteError>(audio.finite(), "stft: audio contains non-finite samples");
  const std::size_t n_fft = cfg.n_fft, frames = cfg.frames_for(audio.length());
  const std::size_t pad = detail::pad_left(cfg);
  const auto w = hann_window(n_fft);
  const auto fft = detail::real_fft(n_fft);

  ComplexSpectrogram out(audio.channels(), frames, cfg, audio.sample_rate());
  std::vector<double> frame(n_fft);
  for (std::size_t c = 0; c < audio.channels(); ++c) {
    const auto x = audio.channel(c);
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t start = t * cfg.hop;
      for (std::size_t n = 0; n < n_fft; ++n) {
        const std::size_t p = start + n;
        frame[n] = (p >= pad && p - pad < x.size()) ? x[p - pad] * w[n] : 0.0;
      }
      fft->forward(frame.data(), &out(c, t, 0));
    }
  }
  return out;
}

/// Vector-Jacobian product of stft(). `grad` holds dL/dRe + i dL/dIm per bin;
/// the result is dL/dx for a signal of `length` samples.
inline AudioSegment stft_backward(const ComplexSpectrogram& grad, std::size_t length) {
  const auto& cfg = grad.config();
  const std::size_t n_fft = cfg.n_fft, bins = cfg.bins(), pad = detail::pad_left(cfg);
  require(cfg.frames_for(length) == grad.frames(), "stft_backward: frame count mismatch");
  const auto w = hann_window(n_fft);
  const auto fft = detail::real_fft(n_fft);

  AudioSegment out(grad.channels(), length, grad.sample_rate());
  std::vector<cplx> spec(bins);
  std::vector<double> frame(n_fft);
  for (std::size_t c = 0; c < grad.channels(); ++c) {
    auto x = out.channel(c);
    for (std::size_t t = 0; t < grad.frames(); ++t) {
      // c2r doubles the interior bins, so halve them to get sum_k Re(G_k e^{i theta}).
      for (std::size_t k = 0; k < bins; ++k) {
        const bool edge = k == 0 || k == bins - 1;
        spec[k] = edge ? grad(c, t, k) : 0.5 * grad(c, t, k);
      }
      fft->inverse(spec.data(), frame.data());
      const std::size_t start = t * cfg.hop;
      for (std::size_t n = 0; n < n_fft; ++n) {
        const std::size_t p = start + n;
        if (p >= pad && p - pad < length) x[p - pad] += frame[n] * w[n];
      }
    }
  }
  return out;
}

/// Largest target_length istft() accepts for a spectrogram with `frames` frames.
inline std::size_t istft_max_length(const StftConfig& cfg, std::size_t frames) {
  return (frames - 1) * cfg.hop + cfg.n_fft - detail::pad_left(cfg);
}

/// Least-squares inverse STFT: windowed overlap-add divided by the summed
/// squared window. Exact for any hop as long as the window sum stays positive.
inline AudioSegment istft(const ComplexSpectrogram& spec, std::size_t target_length) {
  const auto& cfg = spec.config();
  cfg.validate();
  require(spec.frames() >= 1, "istft: spectrogram has no frames");
  require<NonFiniteError>(spec.finite(), "istft: spectrogram contains non-finite values");
  require(target_length <= istft_max_length(cfg, spec.frames()), "istft: target length ",
          target_length, " exceeds the ", istft_max_length(cfg, spec.frames()),
          " samples spanned by ", spec.frames(), " frames");
  const std::size_t n_fft = cfg.n_fft, bins = cfg.bins(), pad = detail::pad_left(cfg);
  const auto w = hann_window(n_fft);
  const auto wss = detail::window_square_sum(cfg, spec.frames());
  for (std::size_t i = 0; i < target_length; ++i)
    require(wss[i + pad] > detail::kMinWindowSum, "istft: zero window sum at sample ", i,
            " (hop too large for n_fft)");
  const auto fft = detail::real_fft(n_fft);

  AudioSegment out(spec.channels(), target_length, spec.sample_rate());
  std::vector<cplx> buf(bins);
  std::vector<double> frame(n_fft);
  const double scale = 1.0 / static_cast<double>(n_fft);
  for (std::size_t c = 0; c < spec.channels(); ++c) {
    auto y = out.channel(c);
    for (std::size_t t = 0; t < spec.frames(); ++t) {
      std::copy_n(&spec(c, t, 0), bins, buf.begin());
      fft->inverse(buf.data(), frame.data());
      const std::size_t start = t * cfg.hop;
      for (std::size_t n = 0; n < n_fft; ++n) {
        const std::size_t p = start + n;
        if (p >= pad && p - pad < target_length) y[p - pad] += frame[n] * scale * w[n];
      }
    }
    for (std::size_t i = 0; i < target_length; ++i) y[i] /= wss[i + pad];
  }
  return out;
}

/// Vector-Jacobian product of istft(). Returns dL/dRe + i dL/dIm for every
/// bin of a spectrogram shaped like `like`.
inline ComplexSpectrogram istft_backward(const AudioSegment& grad,
                                         const ComplexSpectrogram& like) {
  const auto& cfg = like.config();
  const std::size_t n_fft = cfg.n_fft, bins = cfg.bins(), pad = detail::pad_left(cfg);
  const auto w = hann_window(n_fft);
  const auto wss = detail::window_square_sum(cfg, like.frames());
  const auto fft = detail::real_fft(n_fft);
  const double scale = 1.0 / static_cast<double>(n_fft);

  ComplexSpectrogram out(like.channels(), like.frames(), cfg, like.sample_rate());
  std::vector<double> frame(n_fft);
  for (std::size_t c = 0; c < like.channels(); ++c) {
    const auto g = grad.channel(c);
    for (std::size_t t = 0; t < like.frames(); ++t) {
      const std::size_t start = t * cfg.hop;
      for (std::size_t n = 0; n < n_fft; ++n) {
        const std::size_t p = start + n;
        frame[n] = (p >= pad && p - pad < g.size()) ? g[p - pad] / wss[p] * w[n] * scale : 0.0;
      }
      cplx* dst = &out(c, t, 0);
      fft->forward(frame.data(), dst);
      // c2r reads only the real part of DC and Nyquist and counts interior bins twice.
      for (std::size_t k = 1; k + 1 < bins; ++k) dst[k] *= 2.0;
      dst[0] = dst[0].real();
      dst[bins - 1] = dst[bins - 1].real();
    }
  }
  return out;
}

}  // namespace bandmix
