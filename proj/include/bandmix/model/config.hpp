#pragma once

#include <vector>

#include "bandmix/bands.hpp"

namespace bandmix {

struct ModelConfig {
  Track track = Track::kVocals;
  int sample_rate = 44100;
  std::size_t audio_channels = 2;
  /// Mask embedding width is mask_multiplier * audio_channels.
  std::size_t mask_multiplier = 4;
  std::size_t encoder_depth = 4;
  /// Output channels of each encoder stage; empty means base_width doubled per stage.
  std::vector<std::size_t> encoder_channels;
  std::size_t base_width = 32;
  /// LSTM hidden size inside the DPRNN; 0 means the bottleneck channel count.
  std::size_t dprnn_hidden = 0;
  std::size_t dprnn_blocks = 1;
  std::size_t mlp_hidden_layers = 1;
  double leaky_slope = 0.01;

  std::size_t mask_channels() const { return mask_multiplier * audio_channels; }

  std::vector<std::size_t> channel_plan() const {
    if (!encoder_channels.empty()) return encoder_channels;
    std::vector<std::size_t> plan;
    for (std::size_t i = 0, w = base_width; i < encoder_depth; ++i, w *= 2) plan.push_back(w);
    return plan;
  }

  std::size_t bottleneck_channels() const { return channel_plan().back(); }
  std::size_t rnn_hidden() const { return dprnn_hidden ? dprnn_hidden : bottleneck_channels(); }

  void validate() const {
    require(sample_rate > 0, "model sample rate must be positive");
    require(audio_channels >= 1 && mask_multiplier >= 1 && dprnn_blocks >= 1,
            "model counts must be >= 1");
    require(encoder_depth >= 1, "encoder depth must be >= 1");
    require(encoder_channels.empty() || encoder_channels.size() == encoder_depth,
            "encoder channel plan has ", encoder_channels.size(), " entries for depth ",
            encoder_depth);
    require(base_width >= 1, "base width must be >= 1");
    for (auto c : channel_plan()) require(c >= 1, "encoder channel counts must be >= 1");
    require(leaky_slope >= 0 && leaky_slope < 1, "leaky slope must be in [0, 1)");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Small configuration used by tests and the desk-scale experiments.
inline ModelConfig tiny_model_config(Track track = Track::kVocals) {
  ModelConfig cfg;
  cfg.track = track;
  cfg.encoder_depth = 2;
  cfg.base_width = 8;
  cfg.dprnn_hidden = 8;
  return cfg;
}

}  // namespace bandmix
