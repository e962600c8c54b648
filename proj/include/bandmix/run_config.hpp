#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "bandmix/json_io.hpp"
#include "bandmix/model/separator.hpp"
#include "bandmix/trainer.hpp"

namespace bandmix {

inline constexpr int kRunConfigVersion = 1;

struct DataConfig {
  std::string train;
  /// Separate validation set; when empty the last `holdout_songs` training
  /// songs (in id order) are held out instead.
  std::string validation;
  std::size_t holdout_songs = 1;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

/// Everything a command needs. A default-constructed config describes the
/// full-size setup: 2048/600 STFT, the per-track band table, Adam at 1e-3
/// with batch 2 and 6 accumulation steps on 4 s crops.
struct RunConfig {
  std::optional<Track> track;
  std::uint64_t seed = 0;
  StftConfig stft;
  std::array<BandConfig, 4> bands = {default_band_config(Track::kVocals),
                                     default_band_config(Track::kDrums),
                                     default_band_config(Track::kBass),
                                     default_band_config(Track::kOther)};
  ModelConfig model;
  TrainConfig train;
  SeparateOptions separate;
  DataConfig data;
  std::string out_dir = "runs";
  int top_k = 3;

  const BandConfig& band(Track t) const { return bands[static_cast<std::size_t>(t)]; }

  Track require_track() const {
    require(track.has_value(), "no track given (set \"track\" in the config or pass --track)");
    return *track;
  }

  ModelConfig model_config() const {
    ModelConfig m = model;
    m.track = require_track();
    return m;
  }

  BandLayout layout() const { return make_band_layout(band(require_track()), stft, model.sample_rate); }

  TrainConfig train_config() const {
    TrainConfig t = train;
    t.seed = seed;
    return t;
  }

  /// Checks every setting a command could use. Bands are checked for the
  /// selected track only, so a low-rate config need not rewrite the others.
  void validate() const {
    stft.validate();
    model.validate();
    train.validate();
    require(separate.chunk_seconds > 0, "separate.chunk_seconds must be positive");
    require(separate.overlap >= 0 && separate.overlap < 1, "separate.overlap must be in [0, 1)");
    require(top_k >= 1, "top_k must be >= 1, got ", top_k);
    if (track) {
      try {
        layout();
      } catch (const InvalidArgument& e) {
        throw InvalidArgument(std::string("bands.") + std::string(track_name(*track)) + ": " +
                              e.what());
      }
    }
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

inline Json to_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate},   {"batch_size", t.batch_size},
          {"grad_accum_steps", t.grad_accum_steps}, {"max_steps", t.max_steps},
          {"segment_s", t.segment_s},           {"checkpoint_every", t.checkpoint_every},
          {"validation_every", t.validation_every}, {"grad_clip", t.grad_clip}};
}

/// The seed lives at the top level of a run config, not here.
inline TrainConfig train_config_from_json(const Json& j, TrainConfig t = {}) {
  StrictObject<> o(j, "train");
  o.get("learning_rate", t.learning_rate);
  o.get("batch_size", t.batch_size);
  o.get("grad_accum_steps", t.grad_accum_steps);
  o.get("max_steps", t.max_steps);
  o.get("segment_s", t.segment_s);
  o.get("checkpoint_every", t.checkpoint_every);
  o.get("validation_every", t.validation_every);
  o.get("grad_clip", t.grad_clip);
  o.finish();
  return t;
}

inline Json to_json(const RunConfig& c) {
  Json bands = Json::object();
  for (Track t : kAllTracks) bands[std::string(track_name(t))] = to_json(c.band(t));
  Json model = to_json(c.model);
  model.erase("track");
  Json j = {{"format_version", kRunConfigVersion},
            {"seed", c.seed},
            {"stft", to_json(c.stft)},
            {"bands", bands},
            {"model", model},
            {"train", to_json(c.train)},
            {"separate", {{"chunk_seconds", c.separate.chunk_seconds}, {"overlap", c.separate.overlap}}},
            {"data", {{"train", c.data.train}, {"validation", c.data.validation},
                      {"holdout_songs", c.data.holdout_songs}}},
            {"out_dir", c.out_dir},
            {"top_k", c.top_k}};
  if (c.track) j["track"] = std::string(track_name(*c.track));
  return j;
}

/// Parses and validates a run config. Absent keys keep their defaults;
/// unknown keys, type errors and invalid values raise InvalidArgument.
inline RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  try {
    StrictObject<> o(j, "");
    int version = kRunConfigVersion;
    o.get("format_version", version);
    require(version == kRunConfigVersion, "unsupported config format_version ", version,
            " (this build reads version ", kRunConfigVersion, ")");
    if (o.has("track")) {
      std::string name;
      o.get("track", name);
      c.track = parse_track(name);
    }
    o.get("seed", c.seed);
    if (o.has("stft")) c.stft = stft_config_from_json(o.child("stft"), "stft");
    if (o.has("bands")) {
      StrictObject<> b(o.child("bands"), "bands");
      for (Track t : kAllTracks) {
        const std::string name(track_name(t));
        if (b.has(name))
          c.bands[static_cast<std::size_t>(t)] =
              band_config_from_json(t, b.child(name), "bands." + name);
      }
      b.finish();
    }
    if (o.has("model")) {
      const Json& m = o.child("model");
      require(!m.is_object() || !m.contains("track"),
              "config 'model.track' is not allowed; set the top-level \"track\" or pass --track");
      c.model = model_config_from_json(m, c.model, "model");
    }
    if (o.has("train")) c.train = train_config_from_json(o.child("train"), c.train);
    if (o.has("separate")) {
      StrictObject<> s(o.child("separate"), "separate");
      s.get("chunk_seconds", c.separate.chunk_seconds);
      s.get("overlap", c.separate.overlap);
      s.finish();
    }
    if (o.has("data")) {
      StrictObject<> d(o.child("data"), "data");
      d.get("train", c.data.train);
      d.get("validation", c.data.validation);
      d.get("holdout_songs", c.data.holdout_songs);
      d.finish();
    }
    o.get("out_dir", c.out_dir);
    o.get("top_k", c.top_k);
    o.finish();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), "cannot open config file: ", path.string());
  Json j;
  try {
    j = Json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

inline void write_run_config(const std::filesystem::path& path, const RunConfig& c) {
  std::ofstream os(path);
  os << to_json(c).dump(2) << '\n';
  require<FormatError>(static_cast<bool>(os), "cannot write config: ", path.string());
}

}  // namespace bandmix
