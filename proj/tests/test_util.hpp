#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "bandmix/audio.hpp"
#include "bandmix/nn/init.hpp"
#include "bandmix/objective.hpp"
#include "bandmix/stft.hpp"

namespace bandmix::testing {

inline AudioSegment random_audio(std::size_t channels, std::size_t length, int rate,
                                 std::uint64_t seed, double amp = 0.5) {
  nn::Rng rng(seed);
  AudioSegment a(channels, length, rate);
  for (auto& v : a.samples()) v = rng.uniform(-amp, amp);
  return a;
}

/// Naive O(N^2) windowed DFT of one frame, independent of FFTW and of the
/// library's framing code.
inline std::vector<std::complex<double>> direct_frame_dft(const AudioSegment& a, std::size_t c,
                                                          std::size_t t, const StftConfig& cfg) {
  const std::size_t n_fft = cfg.n_fft;
  const long pad = cfg.center ? static_cast<long>(n_fft / 2) : 0;
  std::vector<std::complex<double>> out(n_fft / 2 + 1);
  for (std::size_t k = 0; k <= n_fft / 2; ++k) {
    std::complex<double> acc = 0;
    for (std::size_t n = 0; n < n_fft; ++n) {
      const long idx = static_cast<long>(t * cfg.hop + n) - pad;
      if (idx < 0 || idx >= static_cast<long>(a.length())) continue;
      const double w = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * n / n_fft);
      const double ang = -2 * std::numbers::pi * double(k) * double(n) / double(n_fft);
      acc += a(c, static_cast<std::size_t>(idx)) * w * std::polar(1.0, ang);
    }
    out[k] = acc;
  }
  return out;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// All four terms from plain loops and the naive DFT.
inline LossBreakdown scalar_loop_loss(const AudioSegment& e, const AudioSegment& r,
                                     const StftConfig& cfg) {
  LossBreakdown out;
  std::size_t n = 0;
  for (std::size_t c = 0; c < e.channels(); ++c)
    for (std::size_t i = 0; i < e.length(); ++i, ++n) out.time_term += std::abs(e(c, i) - r(c, i));
  out.time_term /= static_cast<double>(n);
  std::size_t m = 0;
  const std::size_t frames = e.length() / cfg.hop + 1;
  for (std::size_t c = 0; c < e.channels(); ++c)
    for (std::size_t t = 0; t < frames; ++t) {
      const auto ye = direct_frame_dft(e, c, t, cfg);
      const auto yr = direct_frame_dft(r, c, t, cfg);
      for (std::size_t k = 0; k < ye.size(); ++k, ++m) {
        out.mag_term += std::abs(std::abs(ye[k]) - std::abs(yr[k]));
        out.real_term += std::abs(ye[k].real() - yr[k].real());
        out.imag_term += std::abs(ye[k].imag() - yr[k].imag());
      }
    }
  out.mag_term /= static_cast<double>(m);
  out.real_term /= static_cast<double>(m);
  out.imag_term /= static_cast<double>(m);
  out.total = out.time_term + out.mag_term + out.real_term + out.imag_term;
  return out;
}

}  // namespace bandmix::testing
