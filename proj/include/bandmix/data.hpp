#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "bandmix/audio.hpp"
#include "bandmix/bands.hpp"
#include "bandmix/nn/init.hpp"
#include "bandmix/stft.hpp"

namespace bandmix {

namespace fs = std::filesystem;

/// One song: the four stems (indexed by Track) and the mixture.
struct StemSong {
  std::string id;
  std::array<AudioSegment, 4> stems;
  AudioSegment mixture;

  const AudioSegment& stem(Track t) const { return stems[static_cast<std::size_t>(t)]; }
  AudioSegment& stem(Track t) { return stems[static_cast<std::size_t>(t)]; }
};

struct StemDataset {
  std::vector<StemSong> songs;       // sorted by id
  std::vector<std::string> messages;  // per-song rejections and warnings

  bool empty() const noexcept { return songs.empty(); }
  std::size_t size() const noexcept { return songs.size(); }
};

/// Sample-wise sum of the stems, added in the fixed order vocals, drums, bass, other.
inline AudioSegment sum_stems(const std::array<AudioSegment, 4>& stems) {
  AudioSegment mix = stems[0];
  for (std::size_t k = 1; k < stems.size(); ++k)
    for (std::size_t i = 0; i < mix.samples().size(); ++i) mix.samples()[i] += stems[k].samples()[i];
  return mix;
}

inline std::string stem_filename(Track t) { return std::string(track_name(t)) + ".wav"; }

/// Reads `root/<song>/{vocals,drums,bass,other}.wav` (plus an optional
/// mixture.wav). Inconsistent songs are skipped with a message; the rest
/// load in lexicographic order of song id.
inline StemDataset load_stem_dataset(const fs::path& root) {
  require(fs::is_directory(root), "dataset root does not exist or is not a directory: ",
          root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());

  StemDataset ds;
  if (dirs.empty()) ds.messages.push_back("warning: no song folders under " + root.string());
  for (const auto& dir : dirs) {
    const std::string id = dir.filename().string();
    try {
      StemSong song;
      song.id = id;
      for (Track t : kAllTracks) {
        const fs::path p = dir / stem_filename(t);
        require<FormatError>(fs::exists(p), "missing stem ", stem_filename(t));
        song.stem(t) = read_wav(p);
      }
      const auto& ref = song.stems[0];
      for (Track t : kAllTracks) {
        const auto& s = song.stem(t);
        require<FormatError>(s.sample_rate() == ref.sample_rate(), "sample rate mismatch in ",
                             stem_filename(t), " (", s.sample_rate(), " vs ", ref.sample_rate(),
                             " Hz)");
        require<FormatError>(s.channels() == ref.channels(), "channel count mismatch in ",
                             stem_filename(t));
        require<FormatError>(s.length() == ref.length(), "length mismatch in ",
                             stem_filename(t), " (", s.length(), " vs ", ref.length(),
                             " samples)");
      }
      const fs::path mix = dir / "mixture.wav";
      if (fs::exists(mix)) {
        song.mixture = read_wav(mix);
        require<FormatError>(song.mixture.same_layout(ref), "mixture.wav layout differs from stems");
      } else {
        song.mixture = sum_stems(song.stems);
      }
      ds.songs.push_back(std::move(song));
    } catch (const Error& e) {
      ds.messages.push_back("rejected song '" + id + "': " + e.what());
    }
  }
  return ds;
}

inline void write_stem_dataset(const StemDataset& ds, const fs::path& root) {
  for (const auto& song : ds.songs) {
    fs::create_directories(root / song.id);
    for (Track t : kAllTracks) write_wav(root / song.id / stem_filename(t), song.stem(t));
    write_wav(root / song.id / "mixture.wav", song.mixture);
  }
}

struct FixtureOptions {
  std::uint64_t seed = 0;
  std::size_t songs = 4;
  double duration_s = 10.0;
  int sample_rate = 16000;
  std::size_t channels = 2;
  /// Symmetric stereo leakage applied to the mixture: L' = L + a R, R' = R + a L.
  double crosstalk = 0.0;
};

namespace detail {

/// Keeps only the FFT bins inside [lo, hi) Hz.
inline std::vector<double> band_limit(const std::vector<double>& x, int sample_rate, double lo,
                                      double hi) {
  const std::size_t n = x.size() % 2 == 0 ? x.size() : x.size() + 1;
  std::vector<double> buf(n, 0.0);
  std::copy(x.begin(), x.end(), buf.begin());
  std::vector<cplx> spec(n / 2 + 1);
  const auto fft = real_fft(n);
  fft->forward(buf.data(), spec.data());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n);
    if (f < lo || f >= hi) spec[k] = 0;
  }
  fft->inverse(spec.data(), buf.data());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = buf[i] / static_cast<double>(n);
  return out;
}

inline double note_envelope(double t, double attack, double decay) {
  return t < attack ? t / attack : std::exp(-(t - attack) / decay);
}

}  // namespace detail

/// Deterministic four-stem songs with distinct spectral signatures:
///  bass   - low sine notes (fundamental 40-110 Hz, two partials)
///  drums  - noise bursts band-limited to the upper part of the spectrum
///  vocals - vibrato tone with harmonics, 200-400 Hz fundamental
///  other  - sustained mid-range chords
/// Each stem is panned at random; the mixture optionally has cross-talk.
inline StemDataset make_synthetic_fixture(const FixtureOptions& opt) {
  require(opt.duration_s >= 1.0, "fixture duration must be at least 1 s, got ", opt.duration_s);
  require(opt.sample_rate >= 8000, "fixture sample rate must be at least 8000 Hz");
  require(opt.channels >= 1, "fixture needs at least one channel");
  const double pi = std::numbers::pi;
  const int sr = opt.sample_rate;
  const double nyq = sr / 2.0;
  const auto len = static_cast<std::size_t>(std::llround(opt.duration_s * sr));
  nn::Rng rng(opt.seed);

  StemDataset ds;
  for (std::size_t s = 0; s < opt.songs; ++s) {
    StemSong song;
    char id[32];
    std::snprintf(id, sizeof id, "song%03zu", s);
    song.id = id;
    std::array<std::vector<double>, 4> mono;
    for (auto& m : mono) m.assign(len, 0.0);

    // bass: one note per half second
    const double note_len = 0.5;
    for (double start = 0; start < opt.duration_s; start += note_len) {
      const double f0 = rng.uniform(40, 110);
      const double amp = rng.uniform(0.25, 0.4);
      for (std::size_t n = static_cast<std::size_t>(start * sr); n < len && n < static_cast<std::size_t>((start + note_len) * sr); ++n) {
        const double t = n / static_cast<double>(sr) - start;
        const double env = detail::note_envelope(t, 0.01, 0.4);
        mono[2][n] += amp * env * (std::sin(2 * pi * f0 * t) + 0.4 * std::sin(4 * pi * f0 * t));
      }
    }

    // drums: decaying noise bursts on a jittered grid
    {
      std::vector<double> noise(len);
      for (auto& v : noise) v = rng.uniform(-1, 1);
      noise = detail::band_limit(noise, sr, 0.55 * nyq, 0.9 * nyq);
      const double beat = rng.uniform(0.2, 0.3);
      for (double start = rng.uniform(0, beat); start < opt.duration_s; start += beat) {
        const double amp = rng.uniform(0.5, 1.0);
        for (std::size_t n = static_cast<std::size_t>(start * sr); n < len && n < static_cast<std::size_t>((start + beat) * sr); ++n) {
          const double t = n / static_cast<double>(sr) - start;
          mono[1][n] += amp * detail::note_envelope(t, 0.002, 0.04) * noise[n];
        }
      }
    }

    // vocals: phrases of vibrato tones with decaying harmonics
    for (double start = 0; start < opt.duration_s; start += 1.0) {
      const double f0 = rng.uniform(200, 400);
      const double amp = rng.uniform(0.1, 0.2);
      const double rate = rng.uniform(4, 6);
      double phase = 0;
      for (std::size_t n = static_cast<std::size_t>(start * sr); n < len && n < static_cast<std::size_t>((start + 1.0) * sr); ++n) {
        const double t = n / static_cast<double>(sr) - start;
        const double f = f0 * (1 + 0.02 * std::sin(2 * pi * rate * t));
        phase += 2 * pi * f / sr;
        const double env = detail::note_envelope(t, 0.05, 0.6);
        double v = 0;
        for (int h = 1; h <= 4; ++h)
          if (h * f0 < 0.45 * nyq) v += std::sin(h * phase) / h;
        mono[0][n] += amp * env * v;
      }
    }

    // other: two-note chords, sustained
    for (double start = 0; start < opt.duration_s; start += 2.0) {
      const double f1 = rng.uniform(500, 900), f2 = f1 * 1.25;
      const double amp = rng.uniform(0.08, 0.15);
      for (std::size_t n = static_cast<std::size_t>(start * sr); n < len && n < static_cast<std::size_t>((start + 2.0) * sr); ++n) {
        const double t = n / static_cast<double>(sr) - start;
        const double env = detail::note_envelope(t, 0.1, 1.5);
        mono[3][n] += amp * env * (std::sin(2 * pi * f1 * t) + std::sin(2 * pi * f2 * t));
      }
    }

    for (Track t : kAllTracks) {
      const auto k = static_cast<std::size_t>(t);
      const double pan = rng.uniform(0.2, 0.8);
      AudioSegment stem(opt.channels, len, sr);
      for (std::size_t c = 0; c < opt.channels; ++c) {
        const double g = opt.channels == 1 ? 1.0 : (c % 2 == 0 ? std::sqrt(1 - pan) : std::sqrt(pan));
        for (std::size_t n = 0; n < len; ++n) stem(c, n) = g * mono[k][n];
      }
      song.stems[k] = std::move(stem);
    }
    song.mixture = sum_stems(song.stems);
    if (opt.crosstalk != 0 && opt.channels >= 2) {
      const AudioSegment dry = song.mixture;
      for (std::size_t n = 0; n < len; ++n) {
        song.mixture(0, n) = dry(0, n) + opt.crosstalk * dry(1, n);
        song.mixture(1, n) = dry(1, n) + opt.crosstalk * dry(0, n);
      }
    }
    ds.songs.push_back(std::move(song));
  }
  return ds;
}

/// Pearson correlation between the first two channels.
inline double channel_correlation(const AudioSegment& a) {
  require(a.channels() >= 2, "channel_correlation needs two channels");
  const auto l = a.channel(0), r = a.channel(1);
  double ml = 0, mr = 0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    ml += l[i];
    mr += r[i];
  }
  ml /= static_cast<double>(l.size());
  mr /= static_cast<double>(r.size());
  double slr = 0, sll = 0, srr = 0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    slr += (l[i] - ml) * (r[i] - mr);
    sll += (l[i] - ml) * (l[i] - ml);
    srr += (r[i] - mr) * (r[i] - mr);
  }
  return slr / std::sqrt(sll * srr);
}

}  // namespace bandmix
