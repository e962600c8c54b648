#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "bandmix/audio.hpp"
#include "bandmix/bands.hpp"

namespace bandmix {

/// SI-SDR values are clamped to +/- this many dB (a perfect estimate would
/// otherwise be +infinity, a zero estimate -infinity).
inline constexpr double kSiSdrCapDb = 100.0;

struct SiSdrResult {
  std::vector<double> per_channel;  // dB
  double mean = 0;
};

/// Scale-invariant SDR per channel: project the estimate onto the
/// reference, then compare the projection's energy with the residual's.
/// Signals are used as-is (no mean removal).
inline SiSdrResult si_sdr(const AudioSegment& est, const AudioSegment& ref) {
  require(est.channels() == ref.channels() && est.length() == ref.length(),
          "si_sdr: estimate and reference shapes differ");
  SiSdrResult out;
  for (std::size_t c = 0; c < ref.channels(); ++c) {
    const auto e = est.channel(c), r = ref.channel(c);
    double rr = 0, er = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      rr += r[i] * r[i];
      er += e[i] * r[i];
    }
    require(rr > 0, "si_sdr: reference channel ", c, " is all zeros");
    const double alpha = er / rr;
    double target = 0, noise = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double t = alpha * r[i];
      target += t * t;
      noise += (e[i] - t) * (e[i] - t);
    }
    double db;
    if (noise <= 0)
      db = kSiSdrCapDb;
    else if (target <= 0)
      db = -kSiSdrCapDb;
    else
      db = std::clamp(10.0 * std::log10(target / noise), -kSiSdrCapDb, kSiSdrCapDb);
    out.per_channel.push_back(db);
  }
  double sum = 0;
  for (double v : out.per_channel) sum += v;
  out.mean = sum / static_cast<double>(out.per_channel.size());
  return out;
}

/// One row of a metric report: Left / Right / Overall, like a per-ear table.
struct MetricRow {
  std::string song;
  Track track = Track::kVocals;
  double left_db = 0;
  double right_db = 0;
  double mean_db = 0;
};

inline MetricRow make_metric_row(std::string song, Track track, const SiSdrResult& r) {
  MetricRow row{std::move(song), track, r.per_channel.front(), r.per_channel.back(), r.mean};
  return row;
}

inline void write_metric_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::ofstream os(path);
  require<FormatError>(static_cast<bool>(os), "cannot write report: ", path);
  os << "song,track,left_db,right_db,mean_db\n" << std::setprecision(10);
  for (const auto& r : rows)
    os << r.song << ',' << track_name(r.track) << ',' << r.left_db << ',' << r.right_db << ','
       << r.mean_db << '\n';
}

}  // namespace bandmix
