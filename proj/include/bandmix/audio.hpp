#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "bandmix/common.hpp"

namespace bandmix {

/// Multichannel waveform, channel-major (all of channel 0, then channel 1, ...).
class AudioSegment {
 public:
  AudioSegment() = default;
  AudioSegment(std::size_t channels, std::size_t length, int sample_rate)
      : channels_(channels), length_(length), sample_rate_(sample_rate),
        samples_(channels * length, 0.0) {
    validate_layout();
  }
  AudioSegment(std::size_t channels, int sample_rate, std::vector<double> samples)
      : channels_(channels), sample_rate_(sample_rate), samples_(std::move(samples)) {
    require(channels_ >= 1, "audio needs at least one channel");
    require(samples_.size() % channels_ == 0, "sample count ", samples_.size(),
            " not divisible by channel count ", channels_);
    length_ = samples_.size() / channels_;
    validate_layout();
  }

  std::size_t channels() const noexcept { return channels_; }
  std::size_t length() const noexcept { return length_; }
  int sample_rate() const noexcept { return sample_rate_; }
  double duration() const noexcept { return static_cast<double>(length_) / sample_rate_; }

  double& operator()(std::size_t c, std::size_t n) noexcept { return samples_[c * length_ + n]; }
  double operator()(std::size_t c, std::size_t n) const noexcept {
    return samples_[c * length_ + n];
  }
  std::span<double> channel(std::size_t c) { return {samples_.data() + c * length_, length_}; }
  std::span<const double> channel(std::size_t c) const {
    return {samples_.data() + c * length_, length_};
  }
  std::vector<double>& samples() noexcept { return samples_; }
  const std::vector<double>& samples() const noexcept { return samples_; }

  bool finite() const { return all_finite(samples_.begin(), samples_.end()); }
  bool same_layout(const AudioSegment& o) const {
    return channels_ == o.channels_ && length_ == o.length_ && sample_rate_ == o.sample_rate_;
  }

  /// Samples [begin, begin + n) of every channel; positions past the end read as zero.
  AudioSegment crop(std::size_t begin, std::size_t n) const {
    AudioSegment out(channels_, n, sample_rate_);
    for (std::size_t c = 0; c < channels_; ++c)
      for (std::size_t i = 0; i < n && begin + i < length_; ++i) out(c, i) = (*this)(c, begin + i);
    return out;
  }

  friend bool operator==(const AudioSegment& a, const AudioSegment& b) {
    return a.same_layout(b) && a.samples_ == b.samples_;
  }

 private:
  void validate_layout() const {
    require(channels_ >= 1, "audio needs at least one channel");
    require(sample_rate_ > 0, "sample rate must be positive, got ", sample_rate_);
  }

  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  int sample_rate_ = 44100;
  std::vector<double> samples_;
};

enum class WavFormat { kPcm16, kFloat32 };

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
inline void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace detail

/// Reads RIFF/WAVE files holding 16-bit PCM or 32-bit IEEE float samples.
/// If expected_rate is nonzero a file at any other rate is rejected; there is
/// no resampling.
inline AudioSegment read_wav(const std::filesystem::path& path, int expected_rate = 0) {
  std::ifstream in(path, std::ios::binary);
  require<FormatError>(static_cast<bool>(in), "cannot open WAV file: ", path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  require<FormatError>(buf.size() >= 12 && std::memcmp(buf.data(), "RIFF", 4) == 0 &&
                           std::memcmp(buf.data() + 8, "WAVE", 4) == 0,
                       "not a RIFF/WAVE file: ", path.string());

  std::uint16_t fmt_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* chunk = buf.data() + pos;
    std::size_t size = detail::read_u32(chunk + 4);
    std::size_t body = pos + 8;
    size = std::min(size, buf.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      require<FormatError>(size >= 16, "truncated fmt chunk in ", path.string());
      fmt_tag = detail::read_u16(buf.data() + body);
      channels = detail::read_u16(buf.data() + body + 2);
      rate = detail::read_u32(buf.data() + body + 4);
      bits = detail::read_u16(buf.data() + body + 14);
      if (fmt_tag == 0xFFFE && size >= 26) fmt_tag = detail::read_u16(buf.data() + body + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = buf.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1);
  }
  require<FormatError>(channels > 0 && rate > 0, "missing or invalid fmt chunk in ",
                       path.string());
  require<FormatError>(data != nullptr, "missing data chunk in ", path.string());
  const bool pcm16 = fmt_tag == 1 && bits == 16;
  const bool f32 = fmt_tag == 3 && bits == 32;
  require<FormatError>(pcm16 || f32, "unsupported WAV encoding (format ", fmt_tag, ", ", bits,
                       " bits) in ", path.string(), "; expected 16-bit PCM or 32-bit float");
  if (expected_rate != 0) {
    require<FormatError>(static_cast<int>(rate) == expected_rate, "sample rate mismatch in ",
                         path.string(), ": file is ", rate, " Hz, expected ", expected_rate,
                         " Hz (resampling is not supported)");
  }

  const std::size_t bytes = bits / 8;
  const std::size_t frames = data_size / (bytes * channels);
  AudioSegment out(channels, frames, static_cast<int>(rate));
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (n * channels + c) * bytes;
      if (pcm16) {
        out(c, n) = static_cast<std::int16_t>(detail::read_u16(p)) / 32768.0;
      } else {
        std::uint32_t u = detail::read_u32(p);
        float f;
        std::memcpy(&f, &u, 4);
        out(c, n) = f;
      }
    }
  }
  return out;
}

inline void write_wav(const std::filesystem::path& path, const AudioSegment& audio,
                      WavFormat format = WavFormat::kFloat32) {
  const std::uint16_t bits = format == WavFormat::kPcm16 ? 16 : 32;
  const std::uint16_t channels = static_cast<std::uint16_t>(audio.channels());
  const std::uint32_t block = channels * bits / 8;
  const std::uint32_t data_size = static_cast<std::uint32_t>(audio.length() * block);

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  detail::put_u32(out, 36 + data_size);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, format == WavFormat::kPcm16 ? 1 : 3);
  detail::put_u16(out, channels);
  detail::put_u32(out, static_cast<std::uint32_t>(audio.sample_rate()));
  detail::put_u32(out, static_cast<std::uint32_t>(audio.sample_rate()) * block);
  detail::put_u16(out, static_cast<std::uint16_t>(block));
  detail::put_u16(out, bits);
  out += "data";
  detail::put_u32(out, data_size);
  for (std::size_t n = 0; n < audio.length(); ++n) {
    for (std::size_t c = 0; c < audio.channels(); ++c) {
      double v = audio(c, n);
      if (format == WavFormat::kPcm16) {
        double s = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
        detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(s)));
      } else {
        float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        detail::put_u32(out, u);
      }
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  require<FormatError>(static_cast<bool>(os), "cannot write WAV file: ", path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace bandmix
