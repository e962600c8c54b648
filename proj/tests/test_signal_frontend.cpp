#include <gtest/gtest.h>

#include <filesystem>
#include <numbers>

#include "bandmix/audio.hpp"
#include "bandmix/bands.hpp"
#include "bandmix/chunking.hpp"
#include "bandmix/mask.hpp"
#include "bandmix/stft.hpp"
#include "test_util.hpp"

namespace bm = bandmix;
using bm::testing::random_audio;

TEST(Stft, ShapeForFourSecondsStereo) {
  const auto a = random_audio(2, 176400, 44100, 1);
  const auto spec = bm::stft(a, bm::StftConfig{});
  EXPECT_EQ(spec.channels(), 2u);
  EXPECT_EQ(spec.frames(), 295u);  // floor(176400 / 600) + 1
  EXPECT_EQ(spec.bins(), 1025u);   // 2048 / 2 + 1

  // spot-check interior and edge frames against the naive DFT
  for (std::size_t t : {0u, 1u, 147u, 294u}) {
    const auto ref = bm::testing::direct_frame_dft(a, 1, t, spec.config());
    for (std::size_t k = 0; k < ref.size(); k += 37)
      EXPECT_NEAR(std::abs(spec(1, t, k) - ref[k]), 0.0, 1e-9) << "t=" << t << " k=" << k;
  }
}

TEST(Stft, MatchesDirectDftEverywhereOnSmallInput) {
  bm::StftConfig cfg{64, 20, "hann", true};
  const auto a = random_audio(2, 301, 8000, 2);
  const auto spec = bm::stft(a, cfg);
  ASSERT_EQ(spec.frames(), 301u / 20 + 1);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t t = 0; t < spec.frames(); ++t) {
      const auto ref = bm::testing::direct_frame_dft(a, c, t, cfg);
      for (std::size_t k = 0; k < ref.size(); ++k)
        ASSERT_NEAR(std::abs(spec(c, t, k) - ref[k]), 0.0, 1e-11);
    }
}

TEST(Stft, ZeroInputGivesZeroSpectrogram) {
  bm::AudioSegment a(2, 5000, 44100);
  const auto spec = bm::stft(a, bm::StftConfig{});
  for (const auto& v : spec.values()) EXPECT_EQ(v, bm::cplx(0, 0));
}

TEST(Stft, BinCentredSineConcentratesInItsBin) {
  const int sr = 44100;
  const std::size_t k = 93;
  bm::StftConfig cfg;
  const double freq = k * static_cast<double>(sr) / cfg.n_fft;
  bm::AudioSegment a(1, 44100, sr);
  for (std::size_t n = 0; n < a.length(); ++n)
    a(0, n) = std::sin(2 * std::numbers::pi * freq * n / sr);
  const auto spec = bm::stft(a, cfg);
  for (std::size_t t = 5; t < spec.frames() - 5; ++t) {
    // Hann main lobe spans k-1..k+1; the peak magnitude is n_fft/4 for a unit sine.
    EXPECT_NEAR(std::abs(spec(0, t, k)), cfg.n_fft / 4.0, 1e-6);
    EXPECT_NEAR(std::abs(spec(0, t, k - 1)), cfg.n_fft / 8.0, 1e-6);
    for (std::size_t f = 0; f < spec.bins(); ++f)
      if (f + 1 < k || f > k + 1) {
        ASSERT_LT(std::abs(spec(0, t, f)), 1e-7);
      }
  }
}

TEST(Stft, RejectsEmptyAndNonFinite) {
  bm::AudioSegment empty(2, 0, 44100);
  EXPECT_THROW(bm::stft(empty, bm::StftConfig{}), bm::InvalidArgument);
  auto a = random_audio(1, 1000, 44100, 3);
  a(0, 10) = std::nan("");
  EXPECT_THROW(bm::stft(a, bm::StftConfig{}), bm::NonFiniteError);
}

TEST(Stft, ConfigValidation) {
  EXPECT_THROW((bm::StftConfig{2047, 600}.validate()), bm::InvalidArgument);
  EXPECT_THROW((bm::StftConfig{2048, 0}.validate()), bm::InvalidArgument);
  EXPECT_THROW((bm::StftConfig{2048, 4096}.validate()), bm::InvalidArgument);
  EXPECT_THROW((bm::StftConfig{2048, 600, "hamming"}.validate()), bm::InvalidArgument);
}

TEST(Stft, Linearity) {
  bm::StftConfig cfg{256, 100};
  const auto x = random_audio(2, 3000, 16000, 4), z = random_audio(2, 3000, 16000, 5);
  const double a = 0.7, b = -1.3;
  bm::AudioSegment mix(2, 3000, 16000);
  for (std::size_t i = 0; i < mix.samples().size(); ++i)
    mix.samples()[i] = a * x.samples()[i] + b * z.samples()[i];
  const auto sx = bm::stft(x, cfg), sz = bm::stft(z, cfg), sm = bm::stft(mix, cfg);
  for (std::size_t i = 0; i < sm.values().size(); ++i) {
    const auto expect = a * sx.values()[i] + b * sz.values()[i];
    ASSERT_LE(std::abs(sm.values()[i] - expect), 1e-10 * (1 + std::abs(expect)));
  }
}

TEST(Stft, ParsevalPerFrame) {
  bm::StftConfig cfg{512, 128};
  const auto a = random_audio(1, 4000, 16000, 6);
  const auto spec = bm::stft(a, cfg);
  const auto w = bm::hann_window(cfg.n_fft);
  const std::size_t n = cfg.n_fft, pad = n / 2;
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    double time_energy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const long idx = static_cast<long>(t * cfg.hop + i) - static_cast<long>(pad);
      if (idx >= 0 && idx < static_cast<long>(a.length())) {
        const double v = a(0, static_cast<std::size_t>(idx)) * w[i];
        time_energy += v * v;
      }
    }
    double freq_energy = std::norm(spec(0, t, 0)) + std::norm(spec(0, t, n / 2));
    for (std::size_t k = 1; k < n / 2; ++k) freq_energy += 2 * std::norm(spec(0, t, k));
    freq_energy /= static_cast<double>(n);
    EXPECT_NEAR(freq_energy, time_energy, 1e-6 * time_energy);
  }
}

TEST(Istft, RoundTripFourSecondsNoise) {
  const auto x = random_audio(2, 176400, 44100, 7);
  bm::StftConfig cfg;
  const auto y = bm::istft(bm::stft(x, cfg), x.length());
  ASSERT_EQ(y.length(), x.length());
  EXPECT_LT(bm::testing::max_abs_diff(x.samples(), y.samples()), 1e-6);
}

TEST(Istft, RoundTripPropertyOverConfigs) {
  // random (n_fft, hop, length) draws with hop <= n_fft / 2
  bm::nn::Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n_fft = 2 * (8 + rng.index(200));
    const std::size_t hop = 1 + rng.index(n_fft / 2);
    const std::size_t len = 1 + rng.index(3000);
    bm::StftConfig cfg{n_fft, hop};
    const auto x = random_audio(1 + rng.index(3), len, 8000, rng.next());
    const auto y = bm::istft(bm::stft(x, cfg), len);
    ASSERT_LT(bm::testing::max_abs_diff(x.samples(), y.samples()), 1e-9)
        << "n_fft=" << n_fft << " hop=" << hop << " len=" << len;
  }
}

TEST(Istft, ZeroSpectrogramGivesZeroAudio) {
  bm::ComplexSpectrogram spec(2, 10, bm::StftConfig{}, 44100);
  const auto y = bm::istft(spec, 5000);
  for (double v : y.samples()) EXPECT_EQ(v, 0.0);
}

TEST(Istft, RejectsTooLongTargetAndZeroWindowSum) {
  bm::StftConfig cfg{64, 16};
  bm::ComplexSpectrogram spec(1, 10, cfg, 8000);
  EXPECT_EQ(bm::istft_max_length(cfg, 10), 9u * 16u + 32u);
  EXPECT_NO_THROW(bm::istft(spec, 176));
  EXPECT_THROW(bm::istft(spec, 177), bm::InvalidArgument);
  // hop = n_fft leaves positions where the periodic Hann window is zero
  bm::StftConfig sparse{64, 64};
  bm::ComplexSpectrogram s2(1, 4, sparse, 8000);
  EXPECT_THROW(bm::istft(s2, 150), bm::InvalidArgument);
}

TEST(StftAdjoint, BackwardIsTransposeOfForward) {
  // <stft(x), G> == <x, stft_backward(G)> for the real inner product
  bm::StftConfig cfg{126, 32};
  const auto x = random_audio(2, 500, 8000, 8);
  const auto spec = bm::stft(x, cfg);
  bm::nn::Rng rng(9);
  bm::ComplexSpectrogram g(2, spec.frames(), cfg, 8000);
  for (auto& v : g.values()) v = {rng.normal(), rng.normal()};
  double lhs = 0;
  for (std::size_t i = 0; i < g.values().size(); ++i)
    lhs += spec.values()[i].real() * g.values()[i].real() +
           spec.values()[i].imag() * g.values()[i].imag();
  const auto gx = bm::stft_backward(g, x.length());
  double rhs = 0;
  for (std::size_t i = 0; i < x.samples().size(); ++i) rhs += x.samples()[i] * gx.samples()[i];
  EXPECT_NEAR(lhs, rhs, 1e-9 * std::abs(lhs));
}

TEST(IstftAdjoint, BackwardIsTransposeOfForward) {
  bm::StftConfig cfg{126, 32};
  bm::nn::Rng rng(10);
  bm::ComplexSpectrogram s(2, 16, cfg, 8000);
  for (auto& v : s.values()) v = {rng.normal(), rng.normal()};
  // DC and Nyquist imaginary parts are ignored by the inverse
  const std::size_t len = 480;
  const auto y = bm::istft(s, len);
  const auto g = random_audio(2, len, 8000, 11);
  double lhs = 0;
  for (std::size_t i = 0; i < y.samples().size(); ++i) lhs += y.samples()[i] * g.samples()[i];
  const auto gs = bm::istft_backward(g, s);
  double rhs = 0;
  for (std::size_t i = 0; i < s.values().size(); ++i)
    rhs += s.values()[i].real() * gs.values()[i].real() + s.values()[i].imag() * gs.values()[i].imag();
  EXPECT_NEAR(lhs, rhs, 1e-9 * std::abs(lhs));
}

TEST(HzToBin, ComputedFromBandEdges) {
  bm::StftConfig cfg;
  EXPECT_EQ(bm::hz_to_bin(4000, cfg, 44100), 186u);
  EXPECT_EQ(bm::hz_to_bin(0, cfg, 44100), 0u);
  EXPECT_EQ(bm::hz_to_bin(1000, cfg, 44100), 46u);
  EXPECT_EQ(bm::hz_to_bin(6000, cfg, 44100), 279u);
  EXPECT_EQ(bm::hz_to_bin(10000, cfg, 44100), 464u);
  EXPECT_EQ(bm::hz_to_bin(11000, cfg, 44100), 511u);
  EXPECT_EQ(bm::hz_to_bin(22050, cfg, 44100), 1024u);
  EXPECT_THROW(bm::hz_to_bin(-1, cfg, 44100), bm::InvalidArgument);
  EXPECT_THROW(bm::hz_to_bin(22051, cfg, 44100), bm::InvalidArgument);
}

TEST(HzToBin, MonotoneNonDecreasing) {
  bm::StftConfig cfg;
  std::size_t prev = 0;
  for (double f = 0; f <= 22050; f += 3.7) {
    const auto b = bm::hz_to_bin(f, cfg, 44100);
    ASSERT_GE(b, prev);
    prev = b;
  }
}

TEST(BandLayout, TrackTable) {
  bm::StftConfig cfg;
  const auto vocals = bm::make_band_layout(bm::default_band_config(bm::Track::kVocals), cfg, 44100);
  EXPECT_EQ(vocals.f1_bins(), 186u);
  EXPECT_EQ(vocals.f2_bins(), 278u);
  EXPECT_EQ(vocals.residual_bins(), 561u);
  const auto bass = bm::make_band_layout(bm::default_band_config(bm::Track::kBass), cfg, 44100);
  EXPECT_EQ(bass.cut1, 46u);
  EXPECT_EQ(bass.cut2, 279u);
}

TEST(BandLayout, RejectsDegenerateConfigs) {
  bm::StftConfig cfg;
  EXPECT_THROW(bm::make_band_layout({bm::Track::kVocals, 0, 4000, 4000, 4000}, cfg, 44100),
               bm::InvalidArgument);
  EXPECT_THROW(bm::make_band_layout({bm::Track::kVocals, 0, 4000, 5000, 9000}, cfg, 44100),
               bm::InvalidArgument);
  EXPECT_THROW(bm::make_band_layout({bm::Track::kVocals, 0, 4000, 4000, 22050}, cfg, 44100),
               bm::InvalidArgument);
  // rounds to bin 0
  EXPECT_THROW(bm::make_band_layout({bm::Track::kVocals, 0, 5, 5, 4000}, cfg, 44100),
               bm::InvalidArgument);
  // both edges round to the same bin
  EXPECT_THROW(bm::make_band_layout({bm::Track::kVocals, 0, 4000, 4000, 4005}, cfg, 44100),
               bm::InvalidArgument);
}

TEST(BandSplit, ShapesAndPartitionIdentity) {
  bm::StftConfig cfg;
  const auto layout = bm::make_band_layout(bm::default_band_config(bm::Track::kVocals), cfg, 44100);
  const auto spec = bm::stft(random_audio(2, 176400, 44100, 12), cfg);
  const auto sub = bm::band_split(spec, layout);
  EXPECT_EQ(sub.low.shape(), (bm::Shape{2, 295, 186}));
  EXPECT_EQ(sub.high.shape(), (bm::Shape{2, 295, 278}));
  const auto full = bm::spectrogram_tensor(spec);
  const auto rebuilt = bm::concat_bins(bm::concat_bins(sub.low, sub.high),
                                       bm::slice_bins(full, layout.cut2, layout.total_bins));
  EXPECT_TRUE(rebuilt == full);
}

TEST(BandSplit, ZerosAndShapeMismatch) {
  bm::StftConfig cfg;
  const auto layout = bm::make_band_layout(bm::default_band_config(bm::Track::kDrums), cfg, 44100);
  bm::ComplexSpectrogram zero(2, 7, cfg, 44100);
  const auto sub = bm::band_split(zero, layout);
  for (std::size_t i = 0; i < sub.low.size(); ++i) EXPECT_EQ(sub.low[i], bm::cplx(0, 0));
  bm::ComplexSpectrogram other(2, 7, bm::StftConfig{1024, 256}, 44100);
  EXPECT_THROW(bm::band_split(other, layout), bm::InvalidArgument);
}

TEST(ComplexMask, IdentityRotationAndOracle) {
  bm::StftConfig cfg{64, 16};
  const auto spec = bm::stft(random_audio(2, 400, 8000, 13), cfg);
  const bm::Shape shape{2, spec.frames(), spec.bins()};
  bm::Tensor<double> one(shape, 1.0), zero(shape, 0.0);

  const auto same = bm::apply_complex_mask(spec, one, zero);
  EXPECT_EQ(same.values(), spec.values());

  const auto rot = bm::apply_complex_mask(spec, zero, one);
  for (std::size_t i = 0; i < spec.values().size(); ++i)
    EXPECT_EQ(rot.values()[i], bm::cplx(0, 1) * spec.values()[i]);

  bm::nn::Rng rng(14);
  bm::Tensor<double> mr(shape), mi(shape);
  for (auto& v : mr.vec()) v = rng.normal();
  for (auto& v : mi.vec()) v = rng.normal();
  const auto out = bm::apply_complex_mask(spec, mr, mi);
  for (std::size_t i = 0; i < spec.values().size(); ++i) {
    const double a = mr[i], b = mi[i], xr = spec.values()[i].real(), xi = spec.values()[i].imag();
    EXPECT_NEAR(out.values()[i].real(), a * xr - b * xi, 1e-12);
    EXPECT_NEAR(out.values()[i].imag(), a * xi + b * xr, 1e-12);
  }
}

TEST(ComplexMask, RejectsBadMasks) {
  bm::StftConfig cfg{64, 16};
  bm::ComplexSpectrogram spec(2, 5, cfg, 8000);
  bm::Tensor<double> wrong({2, 5, 10}), ok({2, 5, 33});
  EXPECT_THROW(bm::apply_complex_mask(spec, wrong, ok), bm::InvalidArgument);
  ok[3] = std::numeric_limits<double>::infinity();
  bm::Tensor<double> ok2({2, 5, 33});
  EXPECT_THROW(bm::apply_complex_mask(spec, ok, ok2), bm::NonFiniteError);
}

TEST(Chunking, IdentityTenSecondsHalfOverlap) {
  const auto x = random_audio(2, 441000, 44100, 15);
  const auto y = bm::chunk_and_stitch(x, 4.0, 0.5, [](const bm::AudioSegment& c) { return c; });
  EXPECT_LT(bm::testing::max_abs_diff(x.samples(), y.samples()), 1e-6);
}

TEST(Chunking, GainAndShortInput) {
  const auto x = random_audio(2, 3 * 8000, 8000, 16);
  std::size_t calls = 0;
  const auto y = bm::chunk_and_stitch(x, 4.0, 0.5, [&](const bm::AudioSegment& c) {
    ++calls;
    EXPECT_EQ(c.length(), 4u * 8000u);
    auto out = c;
    for (auto& v : out.samples()) v *= 0.5;
    return out;
  });
  EXPECT_EQ(calls, 1u);
  ASSERT_EQ(y.length(), x.length());
  for (std::size_t i = 0; i < x.samples().size(); ++i)
    EXPECT_NEAR(y.samples()[i], 0.5 * x.samples()[i], 1e-12);
}

TEST(Chunking, IdentityPropertyOverParameters) {
  bm::nn::Rng rng(17);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t len = 1 + rng.index(20000);
    const double chunk = 0.05 + rng.uniform() * 0.5, overlap = rng.uniform() * 0.9;
    const auto x = random_audio(2, len, 8000, rng.next());
    const auto y = bm::chunk_and_stitch(x, chunk, overlap, [](const bm::AudioSegment& c) { return c; });
    ASSERT_LT(bm::testing::max_abs_diff(x.samples(), y.samples()), 1e-6)
        << "len=" << len << " chunk=" << chunk << " overlap=" << overlap;
  }
  const auto x = random_audio(1, 100, 8000, 1);
  auto id = [](const bm::AudioSegment& c) { return c; };
  EXPECT_THROW(bm::chunk_and_stitch(x, 0.0, 0.5, id), bm::InvalidArgument);
  EXPECT_THROW(bm::chunk_and_stitch(x, 1.0, 1.0, id), bm::InvalidArgument);
}

TEST(Wav, RoundTripFloatAndPcm16) {
  const auto dir = std::filesystem::temp_directory_path() / "bandmix_wav_test";
  std::filesystem::create_directories(dir);
  const auto x = random_audio(3, 1234, 22050, 18, 0.9);
  bm::write_wav(dir / "f.wav", x, bm::WavFormat::kFloat32);
  const auto f = bm::read_wav(dir / "f.wav");
  ASSERT_TRUE(f.same_layout(x));
  for (std::size_t i = 0; i < x.samples().size(); ++i)
    EXPECT_EQ(f.samples()[i], static_cast<double>(static_cast<float>(x.samples()[i])));

  bm::write_wav(dir / "p.wav", x, bm::WavFormat::kPcm16);
  const auto p = bm::read_wav(dir / "p.wav", 22050);
  ASSERT_TRUE(p.same_layout(x));
  EXPECT_LE(bm::testing::max_abs_diff(x.samples(), p.samples()), 0.5 / 32768.0);

  EXPECT_THROW(bm::read_wav(dir / "p.wav", 44100), bm::FormatError);
  EXPECT_THROW(bm::read_wav(dir / "missing.wav"), bm::FormatError);
  std::filesystem::remove_all(dir);
}
