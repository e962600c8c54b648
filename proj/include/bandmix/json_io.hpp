#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "bandmix/bands.hpp"
#include "bandmix/model/config.hpp"
#include "bandmix/stft.hpp"

namespace bandmix {

using Json = nlohmann::json;

/// Reads fields of one JSON object. Missing keys keep their defaults, type
/// errors and (on finish()) unknown keys raise E with the dotted key path.
template <typename E = InvalidArgument>
class StrictObject {
 public:
  StrictObject(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    require<E>(j.is_object(), "config '", path_, "' must be a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename V>
  void get(const std::string& key, V& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).template get<V>();
    } catch (const nlohmann::json::exception& e) {
      throw E("config '" + where(key) + "': " + e.what());
    }
  }

  const Json& child(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      require<E>(seen_.count(key) > 0, "unknown config key '", where(key), "'");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline Json to_json(const StftConfig& c) {
  return {{"n_fft", c.n_fft}, {"hop", c.hop}, {"window", c.window}, {"center", c.center}};
}

template <typename E = InvalidArgument>
StftConfig stft_config_from_json(const Json& j, const std::string& path = "stft") {
  StftConfig c;
  StrictObject<E> o(j, path);
  o.get("n_fft", c.n_fft);
  o.get("hop", c.hop);
  o.get("window", c.window);
  o.get("center", c.center);
  o.finish();
  return c;
}

inline Json to_json(const BandLayout& b) {
  return {{"cut1", b.cut1}, {"cut2", b.cut2}, {"total_bins", b.total_bins}};
}

template <typename E = InvalidArgument>
BandLayout band_layout_from_json(const Json& j, const std::string& path = "band_layout") {
  BandLayout b;
  StrictObject<E> o(j, path);
  o.get("cut1", b.cut1);
  o.get("cut2", b.cut2);
  o.get("total_bins", b.total_bins);
  o.finish();
  return b;
}

inline Json to_json(const BandConfig& b) {
  return {{"band1_hz", {b.band1_start, b.band1_end}}, {"band2_hz", {b.band2_start, b.band2_end}}};
}

template <typename E = InvalidArgument>
BandConfig band_config_from_json(Track t, const Json& j, const std::string& path) {
  BandConfig b = default_band_config(t);
  StrictObject<E> o(j, path);
  std::array<double, 2> b1{b.band1_start, b.band1_end}, b2{b.band2_start, b.band2_end};
  o.get("band1_hz", b1);
  o.get("band2_hz", b2);
  o.finish();
  return {t, b1[0], b1[1], b2[0], b2[1]};
}

inline Json to_json(const ModelConfig& m) {
  return {{"track", std::string(track_name(m.track))},
          {"sample_rate", m.sample_rate},
          {"audio_channels", m.audio_channels},
          {"mask_multiplier", m.mask_multiplier},
          {"encoder_depth", m.encoder_depth},
          {"encoder_channels", m.encoder_channels},
          {"base_width", m.base_width},
          {"dprnn_hidden", m.dprnn_hidden},
          {"dprnn_blocks", m.dprnn_blocks},
          {"mlp_hidden_layers", m.mlp_hidden_layers},
          {"leaky_slope", m.leaky_slope}};
}

/// `base` supplies values for absent keys.
template <typename E = InvalidArgument>
ModelConfig model_config_from_json(const Json& j, ModelConfig base = {},
                                   const std::string& path = "model") {
  StrictObject<E> o(j, path);
  if (o.has("track")) {
    std::string name;
    o.get("track", name);
    try {
      base.track = parse_track(name);
    } catch (const InvalidArgument& e) {
      throw E(o.where("track") + ": " + e.what());
    }
  }
  o.get("sample_rate", base.sample_rate);
  o.get("audio_channels", base.audio_channels);
  o.get("mask_multiplier", base.mask_multiplier);
  o.get("encoder_depth", base.encoder_depth);
  o.get("encoder_channels", base.encoder_channels);
  o.get("base_width", base.base_width);
  o.get("dprnn_hidden", base.dprnn_hidden);
  o.get("dprnn_blocks", base.dprnn_blocks);
  o.get("mlp_hidden_layers", base.mlp_hidden_layers);
  o.get("leaky_slope", base.leaky_slope);
  o.finish();
  return base;
}

}  // namespace bandmix
