#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "bandmix/checkpoint.hpp"
#include "bandmix/data.hpp"
#include "bandmix/metrics.hpp"
#include "bandmix/model/separator.hpp"
#include "bandmix/nn/init.hpp"
#include "bandmix/objective.hpp"
#include "bandmix/optim.hpp"

namespace bandmix {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 2;
  std::size_t grad_accum_steps = 6;
  std::size_t max_steps = 1000;
  std::uint64_t seed = 0;
  double segment_s = 4.0;
  std::size_t checkpoint_every = 500;
  std::size_t validation_every = 500;
  /// Global gradient-norm limit; 0 disables clipping.
  double grad_clip = 0.0;

  std::size_t effective_batch() const { return batch_size * grad_accum_steps; }

  void validate() const {
    require(learning_rate > 0, "learning_rate must be positive, got ", learning_rate);
    require(batch_size > 0 && grad_accum_steps > 0 && max_steps > 0,
            "batch_size, grad_accum_steps and max_steps must be positive");
    require(segment_s > 0, "segment_s must be positive, got ", segment_s);
    require(checkpoint_every > 0 && validation_every > 0,
            "checkpoint_every and validation_every must be positive");
    require(grad_clip >= 0, "grad_clip must be >= 0");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainRecord {
  std::size_t step = 0;
  LossBreakdown loss;
  double wall_seconds = 0;
  std::optional<double> val_score;
};

/// One training pair: a mixture crop and the matching stem crop.
struct Example {
  AudioSegment mixture;
  AudioSegment target;
};

/// Loss of one example and `scale` times its parameter gradient added to `grads`.
template <typename T>
LossBreakdown example_gradient(const SeparatorModel<T>& model, const Example& ex, double scale,
                               ParamSet<T>& grads) {
  typename SeparatorModel<T>::Cache cache;
  const auto out = model.forward(stft(ex.mixture, model.stft_config()), &cache);
  const AudioSegment est = istft(out.estimate, ex.mixture.length());
  const LossBreakdown loss = demix_loss(est, ex.target, model.stft_config());
  const AudioSegment g = demix_loss_grad(est, ex.target, model.stft_config(), scale);
  model.backward(cache, istft_backward(g, out.estimate), grads);
  return loss;
}

namespace detail {

inline void add_scaled(LossBreakdown& acc, const LossBreakdown& l, double w) {
  acc.time_term += w * l.time_term;
  acc.mag_term += w * l.mag_term;
  acc.real_term += w * l.real_term;
  acc.imag_term += w * l.imag_term;
  acc.total += w * l.total;
}

}  // namespace detail

/// Adds `scale * sum_e dL_e/dparams` over `batch` to `grads` and returns the
/// batch-mean loss. Per-example gradients are summed in example order, so
/// the result does not depend on the worker count.
template <typename T>
LossBreakdown accumulate_gradients(const SeparatorModel<T>& model, std::span<const Example> batch,
                                   double scale, ParamSet<T>& grads,
                                   std::size_t threads = num_threads()) {
  require(!batch.empty(), "accumulate_gradients: empty batch");
  std::vector<ParamSet<T>> per(batch.size());
  std::vector<LossBreakdown> losses(batch.size());
  std::vector<std::exception_ptr> errors(batch.size());
  const auto work = [&](std::size_t e) {
    try {
      per[e] = model.params().zeros_like();
      losses[e] = example_gradient(model, batch[e], scale, per[e]);
    } catch (...) {
      errors[e] = std::current_exception();
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, batch.size());
  if (threads == 1) {
    for (std::size_t e = 0; e < batch.size(); ++e) work(e);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t e = w; e < batch.size(); e += threads) work(e);
      });
    for (auto& th : pool) th.join();
  }
  LossBreakdown mean;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    if (errors[e]) std::rethrow_exception(errors[e]);
    grads += per[e];
    detail::add_scaled(mean, losses[e], 1.0 / static_cast<double>(batch.size()));
  }
  return mean;
}

/// Draws training crops: uniform song, uniform start, seeded.
class CropSampler {
 public:
  CropSampler(const StemDataset& data, Track track, double segment_s, std::uint64_t seed)
      : data_(data), track_(track), rng_(seed) {
    require(!data.empty(), "training set is empty");
    const int sr = data.songs.front().mixture.sample_rate();
    length_ = static_cast<std::size_t>(std::llround(segment_s * sr));
    require(length_ > 0, "segment length rounds to zero samples");
  }

  std::size_t segment_length() const noexcept { return length_; }

  Example next() {
    const auto& song = data_.songs[rng_.index(data_.size())];
    const std::size_t len = song.mixture.length();
    const std::size_t start = len > length_ ? rng_.index(len - length_ + 1) : 0;
    return {song.mixture.crop(start, length_), song.stem(track_).crop(start, length_)};
  }

  std::vector<Example> batch(std::size_t n) {
    std::vector<Example> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(next());
    return out;
  }

 private:
  const StemDataset& data_;
  Track track_;
  nn::Rng rng_;
  std::size_t length_ = 0;
};

/// Mean SI-SDR (dB) of full-song separations of `track` over the set.
template <typename T>
double validation_score(const SeparatorModel<T>& model, const StemDataset& val, Track track,
                        const SeparateOptions& opts = {}) {
  require(!val.empty(), "validation set is empty");
  double sum = 0;
  for (const auto& song : val.songs)
    sum += si_sdr(separate(model, song.mixture, opts), song.stem(track)).mean;
  return sum / static_cast<double>(val.size());
}

inline void write_history_csv(const fs::path& path, const std::vector<TrainRecord>& history) {
  std::ofstream os(path);
  require<FormatError>(static_cast<bool>(os), "cannot write history: ", path.string());
  os << "step,time_term,mag_term,real_term,imag_term,total,val_score\n" << std::setprecision(12);
  for (const auto& r : history) {
    os << r.step << ',' << r.loss.time_term << ',' << r.loss.mag_term << ',' << r.loss.real_term
       << ',' << r.loss.imag_term << ',' << r.loss.total << ',';
    if (r.val_score) os << *r.val_score;
    os << '\n';
  }
}

struct TrainOptions {
  /// Where checkpoints and history.csv go; empty keeps everything in memory.
  fs::path out_dir;
  /// Called after every update (for progress output).
  std::function<void(const TrainRecord&)> on_step;
  SeparateOptions validation;
};

struct TrainResult {
  std::vector<TrainRecord> history;
  std::vector<CheckpointInfo> checkpoints;
  bool aborted = false;
  std::string abort_reason;
  std::optional<double> final_val_score;
};

/// Adam over gradient-accumulated micro-batches of random crops. The model
/// is updated in place; on a non-finite loss or gradient it keeps the last
/// good parameters, training stops, and earlier checkpoints stay intact.
template <typename T>
TrainResult train(SeparatorModel<T>& model, const StemDataset& train_set,
                  const StemDataset& val_set, const TrainConfig& cfg,
                  const TrainOptions& opts = {}) {
  cfg.validate();
  require(!train_set.empty(), "training set is empty");
  for (const auto& s : train_set.songs)
    require(s.mixture.sample_rate() == model.config().sample_rate, "song '", s.id, "' is ",
            s.mixture.sample_rate(), " Hz, model expects ", model.config().sample_rate, " Hz");
  const Track track = model.config().track;
  if (!opts.out_dir.empty()) fs::create_directories(opts.out_dir);

  CropSampler sampler(train_set, track, cfg.segment_s, cfg.seed);
  Adam<T> adam(model.params(), AdamConfig{cfg.learning_rate});
  ParamSet<T> grads = model.params().zeros_like();
  const double scale = 1.0 / static_cast<double>(cfg.effective_batch());
  const auto t0 = std::chrono::steady_clock::now();

  TrainResult result;
  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    grads.set_zero();
    LossBreakdown loss;
    try {
      for (std::size_t a = 0; a < cfg.grad_accum_steps; ++a) {
        const auto batch = sampler.batch(cfg.batch_size);
        detail::add_scaled(loss, accumulate_gradients<T>(model, batch, scale, grads),
                           1.0 / static_cast<double>(cfg.grad_accum_steps));
      }
    } catch (const NonFiniteError& e) {
      result.aborted = true;
      result.abort_reason = "step " + std::to_string(step) + ": " + e.what();
      break;
    }
    if (!std::isfinite(loss.total) || !grads.finite()) {
      result.aborted = true;
      result.abort_reason = "non-finite loss or gradient at step " + std::to_string(step);
      break;
    }
    if (cfg.grad_clip > 0) clip_grad_norm(grads, cfg.grad_clip);
    const ParamSet<T> before = model.params();
    adam.step(model.params(), grads);
    if (!model.params().finite()) {
      model.params() = before;
      result.aborted = true;
      result.abort_reason = "non-finite parameters after update " + std::to_string(step);
      break;
    }

    TrainRecord rec;
    rec.step = step;
    rec.loss = loss;
    const bool last = step == cfg.max_steps;
    const bool ckpt = step % cfg.checkpoint_every == 0 || last;
    if (!val_set.empty() && (step % cfg.validation_every == 0 || ckpt))
      rec.val_score = validation_score(model, val_set, track, opts.validation);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ckpt && !opts.out_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%07zu", step);
      save_checkpoint(model, opts.out_dir / name, step, rec.val_score);
      result.checkpoints.push_back(read_checkpoint_info(opts.out_dir / name));
    }
    result.history.push_back(rec);
    if (rec.val_score) result.final_val_score = rec.val_score;
    if (opts.on_step) opts.on_step(rec);
  }
  if (!opts.out_dir.empty()) write_history_csv(opts.out_dir / "history.csv", result.history);
  return result;
}

/// Best-first: higher validation score, then later step, then smaller id.
/// Checkpoints without a score are skipped; k is clamped to what is left.
inline std::vector<CheckpointInfo> select_top_k(std::vector<CheckpointInfo> checkpoints, int k) {
  require(k > 0, "select_top_k: k must be positive, got ", k);
  std::erase_if(checkpoints, [](const CheckpointInfo& c) { return !c.validation_score; });
  require(!checkpoints.empty(), "select_top_k: no checkpoint has a validation score");
  std::sort(checkpoints.begin(), checkpoints.end(), [](const auto& a, const auto& b) {
    if (*a.validation_score != *b.validation_score) return *a.validation_score > *b.validation_score;
    if (a.step != b.step) return a.step > b.step;
    return a.id < b.id;
  });
  checkpoints.resize(std::min<std::size_t>(checkpoints.size(), static_cast<std::size_t>(k)));
  return checkpoints;
}

}  // namespace bandmix
