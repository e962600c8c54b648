#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "bandmix/checkpoint.hpp"
#include "bandmix/json_io.hpp"
#include "bandmix/model/separator.hpp"
#include "bandmix/trainer.hpp"

namespace bandmix {

inline constexpr int kEnsembleFormatVersion = 1;

/// Checkpoints to average and their (unnormalised) weights.
struct EnsembleSpec {
  std::vector<std::string> checkpoints;
  std::vector<double> weights;

  void validate() const {
    require(!checkpoints.empty(), "ensemble needs at least one checkpoint");
    require(weights.size() == checkpoints.size(), "ensemble lists ", checkpoints.size(),
            " checkpoints but ", weights.size(), " weights");
    for (double w : weights)
      require(std::isfinite(w) && w >= 0, "ensemble weights must be finite and >= 0, got ", w);
    require(std::accumulate(weights.begin(), weights.end(), 0.0) > 0,
            "ensemble weights sum to zero");
  }

  friend bool operator==(const EnsembleSpec&, const EnsembleSpec&) = default;
};

/// Weights scaled to sum to one.
inline std::vector<double> normalize_weights(const std::vector<double>& weights) {
  require(!weights.empty(), "no ensemble weights");
  double sum = 0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0, "ensemble weights must be finite and >= 0, got ", w);
    sum += w;
  }
  require(sum > 0, "ensemble weights sum to zero");
  std::vector<double> out;
  for (double w : weights) out.push_back(w / sum);
  return out;
}

/// Weights proportional to validation SI-SDR clipped at zero; uniform when
/// no member scores above zero dB.
inline std::vector<double> default_weights(const std::vector<double>& scores) {
  require(!scores.empty(), "no validation scores");
  std::vector<double> w;
  for (double s : scores) w.push_back(std::isfinite(s) ? std::max(s, 0.0) : 0.0);
  if (std::accumulate(w.begin(), w.end(), 0.0) <= 0) std::fill(w.begin(), w.end(), 1.0);
  return normalize_weights(w);
}

inline Json to_json(const EnsembleSpec& s) {
  return {{"format_version", kEnsembleFormatVersion},
          {"checkpoints", s.checkpoints},
          {"weights", s.weights}};
}

template <typename E = InvalidArgument>
EnsembleSpec ensemble_spec_from_json(const Json& j) {
  StrictObject<E> o(j, "ensemble");
  int version = 0;
  o.get("format_version", version);
  require<E>(version == kEnsembleFormatVersion, "unsupported ensemble format version ", version);
  require<E>(o.has("checkpoints") && o.has("weights"), "ensemble needs 'checkpoints' and 'weights'");
  EnsembleSpec s;
  o.get("checkpoints", s.checkpoints);
  o.get("weights", s.weights);
  o.finish();
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw E(e.what());
  }
  return s;
}

inline void write_ensemble_spec(const fs::path& path, const EnsembleSpec& s) {
  s.validate();
  std::ofstream os(path);
  os << to_json(s).dump(2) << '\n';
  require<FormatError>(static_cast<bool>(os), "cannot write ensemble spec ", path.string());
}

inline EnsembleSpec read_ensemble_spec(const fs::path& path) {
  std::ifstream is(path);
  require<FormatError>(static_cast<bool>(is), "cannot open ensemble spec ", path.string());
  try {
    return ensemble_spec_from_json<FormatError>(Json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("corrupt ensemble spec " + path.string() + ": " + e.what());
  }
}

/// Ensemble over the top-k scored checkpoints with default weights. Paths
/// are stored relative to `base` when they lie beneath it.
inline EnsembleSpec make_top_k_ensemble(const std::vector<CheckpointInfo>& checkpoints, int k,
                                        const fs::path& base = {}) {
  const auto top = select_top_k(checkpoints, k);
  EnsembleSpec s;
  std::vector<double> scores;
  for (const auto& c : top) {
    s.checkpoints.push_back(base.empty() ? c.path.string()
                                         : fs::proximate(c.path, base).generic_string());
    scores.push_back(*c.validation_score);
  }
  s.weights = default_weights(scores);
  return s;
}

/// FNV-1a over the parameter bit patterns; used only to fix a member order.
template <typename T>
std::uint64_t parameter_fingerprint(const SeparatorModel<T>& model) {
  std::uint64_t h = 1469598103934665603ull;
  const auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  for (std::size_t i = 0; i < model.params().size(); ++i)
    for (T v : model.params()[i].vec()) mix(std::bit_cast<std::uint64_t>(static_cast<double>(v)));
  return h;
}

/// Weighted waveform average of the members' separations. Members are
/// summed in a canonical order (parameter fingerprint, then weight), so the
/// output does not depend on how the (model, weight) pairs are listed.
template <typename T>
AudioSegment ensemble_separate(const std::vector<const SeparatorModel<T>*>& models,
                               const std::vector<double>& weights, const AudioSegment& mixture,
                               const SeparateOptions& opts = {},
                               std::size_t threads = num_threads()) {
  require(!models.empty(), "ensemble has no models");
  require(models.size() == weights.size(), "ensemble has ", models.size(), " models but ",
          weights.size(), " weights");
  const auto& ref = *models.front();
  for (const auto* m : models) {
    require(m->config().track == ref.config().track, "ensemble members separate different tracks (",
            track_name(m->config().track), " vs ", track_name(ref.config().track), ")");
    require(m->config().sample_rate == ref.config().sample_rate,
            "ensemble members use different sample rates");
    require(m->config().audio_channels == ref.config().audio_channels,
            "ensemble members use different channel counts");
    require(m->stft_config() == ref.stft_config(), "ensemble members use different STFT configs");
  }
  normalize_weights(weights);  // validates

  std::vector<std::size_t> order(models.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::uint64_t> fp;
  for (const auto* m : models) fp.push_back(parameter_fingerprint(*m));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return fp[a] != fp[b] ? fp[a] < fp[b] : weights[a] < weights[b];
  });
  double total = 0;
  for (std::size_t i : order) total += weights[i];
  std::vector<double> w;
  for (double v : weights) w.push_back(v / total);

  std::vector<AudioSegment> outs(models.size());
  std::vector<std::exception_ptr> errors(models.size());
  const auto work = [&](std::size_t i) {
    try {
      if (w[i] > 0) outs[i] = separate(*models[i], mixture, opts);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, models.size());
  if (threads == 1) {
    for (std::size_t i = 0; i < models.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < models.size(); i += threads) work(i);
      });
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  // The first term is assigned rather than added so a lone member with
  // weight one comes back bit for bit, signed zeros included.
  AudioSegment out;
  bool first = true;
  for (std::size_t i : order) {
    if (w[i] == 0) continue;
    if (first) {
      out = outs[i];
      for (double& v : out.samples()) v *= w[i];
      first = false;
    } else {
      for (std::size_t k = 0; k < out.samples().size(); ++k)
        out.samples()[k] += w[i] * outs[i].samples()[k];
    }
  }
  return out;
}

template <typename T>
AudioSegment ensemble_separate(const std::vector<SeparatorModel<T>>& models,
                               const std::vector<double>& weights, const AudioSegment& mixture,
                               const SeparateOptions& opts = {},
                               std::size_t threads = num_threads()) {
  std::vector<const SeparatorModel<T>*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  return ensemble_separate(ptrs, weights, mixture, opts, threads);
}

}  // namespace bandmix
