#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "bandmix/stft.hpp"
#include "bandmix/tensor.hpp"

namespace bandmix {

enum class Track { kVocals, kDrums, kBass, kOther };

inline constexpr std::array<Track, 4> kAllTracks = {Track::kVocals, Track::kDrums, Track::kBass,
                                                    Track::kOther};

inline std::string_view track_name(Track t) {
  switch (t) {
    case Track::kVocals: return "vocals";
    case Track::kDrums: return "drums";
    case Track::kBass: return "bass";
    case Track::kOther: return "other";
  }
  return "?";
}

inline Track parse_track(std::string_view s) {
  for (Track t : kAllTracks)
    if (track_name(t) == s) return t;
  throw InvalidArgument("unknown track '" + std::string(s) +
                        "' (expected vocals, drums, bass or other)");
}

/// Two adjacent sub-bands in Hz: [0, band1_end) and [band2_start, band2_end).
struct BandConfig {
  Track track = Track::kVocals;
  double band1_start = 0;
  double band1_end = 0;
  double band2_start = 0;
  double band2_end = 0;

  void validate(int sample_rate) const {
    require(band1_start == 0, "band 1 must start at 0 Hz, got ", band1_start);
    require(band1_end == band2_start, "band 2 must start where band 1 ends (", band1_end,
            " Hz vs ", band2_start, " Hz)");
    require(band1_end > 0 && band2_end > band2_start, "bands must be non-empty");
    require(band2_end < sample_rate / 2.0, "band 2 end ", band2_end,
            " Hz must lie below Nyquist (", sample_rate / 2.0, " Hz)");
  }

  friend bool operator==(const BandConfig&, const BandConfig&) = default;
};

/// Sub-band table for 44.1 kHz music, one row per track.
inline BandConfig default_band_config(Track t) {
  switch (t) {
    case Track::kVocals: return {t, 0, 4000, 4000, 10000};
    case Track::kDrums: return {t, 0, 6000, 6000, 10000};
    case Track::kBass: return {t, 0, 1000, 1000, 6000};
    case Track::kOther: return {t, 0, 7000, 7000, 11000};
  }
  throw InvalidArgument("unknown track");
}

/// Bin boundaries of the two sub-bands. Bins [0, cut1) form sub-band 1,
/// [cut1, cut2) sub-band 2, and [cut2, total_bins) are only seen by the
/// full-band branch.
struct BandLayout {
  std::size_t cut1 = 0;
  std::size_t cut2 = 0;
  std::size_t total_bins = 0;

  std::size_t f1_bins() const noexcept { return cut1; }
  std::size_t f2_bins() const noexcept { return cut2 - cut1; }
  std::size_t sub_bins() const noexcept { return cut2; }
  std::size_t residual_bins() const noexcept { return total_bins - cut2; }

  void validate() const {
    require(0 < cut1 && cut1 < cut2 && cut2 < total_bins, "invalid band layout: cut1=", cut1,
            " cut2=", cut2, " total=", total_bins, " (need 0 < cut1 < cut2 < total)");
  }

  friend bool operator==(const BandLayout&, const BandLayout&) = default;
};

/// Nearest STFT bin for a frequency; boundaries go to the upper band.
inline std::size_t hz_to_bin(double freq, const StftConfig& cfg, int sample_rate) {
  require(sample_rate > 0, "sample rate must be positive");
  require(freq >= 0 && freq <= sample_rate / 2.0, "frequency ", freq,
          " Hz outside [0, Nyquist=", sample_rate / 2.0, "]");
  const double bin = std::round(freq * static_cast<double>(cfg.n_fft) / sample_rate);
  return std::min(static_cast<std::size_t>(bin), cfg.bins() - 1);
}

inline BandLayout make_band_layout(const BandConfig& band, const StftConfig& cfg,
                                   int sample_rate) {
  band.validate(sample_rate);
  BandLayout layout{hz_to_bin(band.band1_end, cfg, sample_rate),
                    hz_to_bin(band.band2_end, cfg, sample_rate), cfg.bins()};
  layout.validate();
  return layout;
}

struct SubBands {
  Tensor<cplx> low;   // [C x T x F1]
  Tensor<cplx> high;  // [C x T x F2]
};

inline Tensor<cplx> spectrogram_tensor(const ComplexSpectrogram& spec) {
  return Tensor<cplx>({spec.channels(), spec.frames(), spec.bins()}, spec.values());
}

inline SubBands band_split(const ComplexSpectrogram& spec, const BandLayout& layout) {
  layout.validate();
  require(spec.bins() == layout.total_bins, "band_split: spectrogram has ", spec.bins(),
          " bins, layout expects ", layout.total_bins);
  const auto full = spectrogram_tensor(spec);
  return {slice_bins(full, 0, layout.cut1), slice_bins(full, layout.cut1, layout.cut2)};
}

/// Stacks real parts then imaginary parts: [C x T x F] complex -> [2C x T x F] real.
template <typename T>
Tensor<T> stack_real_imag(const Tensor<cplx>& x) {
  const std::size_t n = x.size();
  Tensor<T> out({2 * x.dim(0), x.dim(1), x.dim(2)});
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<T>(x[i].real());
    out[n + i] = static_cast<T>(x[i].imag());
  }
  return out;
}

}  // namespace bandmix
