#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "bandmix/audio.hpp"

namespace bandmix {

using ChunkFn = std::function<AudioSegment(const AudioSegment&)>;

/// Runs `fn` over overlapping fixed-length chunks and cross-fades the results
/// back together with triangular weights normalised to sum to one at every
/// sample. The tail chunk is zero-padded and the output trimmed to the input
/// length. `fn` must return a segment with the chunk's length.
inline AudioSegment chunk_and_stitch(const AudioSegment& audio, double chunk_s,
                                     double overlap_frac, const ChunkFn& fn) {
  require(chunk_s > 0, "chunk length must be positive, got ", chunk_s);
  require(overlap_frac >= 0 && overlap_frac < 1, "overlap fraction must be in [0, 1), got ",
          overlap_frac);
  require(audio.length() > 0, "chunk_and_stitch: empty audio");
  const std::size_t n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(chunk_s * audio.sample_rate())));
  const std::size_t overlap = static_cast<std::size_t>(std::llround(overlap_frac * n));
  const std::size_t hop = std::max<std::size_t>(1, n - std::min(overlap, n - 1));
  const std::size_t len = audio.length();
  const std::size_t count = len <= n ? 1 : (len - n + hop - 1) / hop + 1;

  std::vector<double> fade(n);
  for (std::size_t i = 0; i < n; ++i)
    fade[i] = static_cast<double>(std::min(i + 1, n - i));

  AudioSegment out(audio.channels(), len, audio.sample_rate());
  std::vector<double> weight(len, 0.0);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t start = k * hop;
    const AudioSegment y = fn(audio.crop(start, n));
    require(y.channels() == audio.channels() && y.length() == n,
            "chunk function changed the chunk shape");
    for (std::size_t i = 0; i < n && start + i < len; ++i) {
      weight[start + i] += fade[i];
      for (std::size_t c = 0; c < audio.channels(); ++c) out(c, start + i) += fade[i] * y(c, i);
    }
  }
  for (std::size_t c = 0; c < audio.channels(); ++c)
    for (std::size_t i = 0; i < len; ++i) out(c, i) /= weight[i];
  return out;
}

}  // namespace bandmix
