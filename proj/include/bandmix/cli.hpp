#pragma once

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bandmix/checkpoint.hpp"
#include "bandmix/data.hpp"
#include "bandmix/ensemble.hpp"
#include "bandmix/metrics.hpp"
#include "bandmix/run_config.hpp"
#include "bandmix/trainer.hpp"

namespace bandmix::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsageError = 2 };

/// Bad flags, bad config or missing inputs: exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

inline constexpr const char* kMetricLabel = "SI-SDR (dB)";

namespace detail {

inline void set_deterministic(bool on) {
  if (on) ::setenv("BANDMIX_NUM_THREADS", "1", 1);
}

inline Track parse_track_flag(const std::string& name) {
  try {
    return parse_track(name);
  } catch (const InvalidArgument& e) {
    throw UsageError(std::string("--track: ") + e.what());
  }
}

inline RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return {};
  require<UsageError>(fs::exists(path), "config file does not exist: ", path);
  try {
    return load_run_config(path);
  } catch (const InvalidArgument& e) {
    throw UsageError(std::string("invalid config ") + path + ": " + e.what());
  }
}

inline void require_dir(const std::string& path, const std::string& what) {
  require<UsageError>(!path.empty(), "no ", what, " given");
  require<UsageError>(fs::is_directory(path), what, " does not exist or is not a directory: ", path);
}

inline std::string fmt_db(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

/// Checkpoint directories directly under `dir`, or `dir` itself.
inline std::vector<fs::path> find_checkpoints(const fs::path& dir) {
  if (fs::exists(dir / kManifestName)) return {dir};
  std::vector<fs::path> out;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory() && fs::exists(e.path() / kManifestName)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

struct TrainArgs {
  std::string config;
  std::string track;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  bool deterministic = false;
};

inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  detail::set_deterministic(a.deterministic);
  RunConfig cfg = detail::load_config_or_default(a.config);
  if (!a.track.empty()) cfg.track = detail::parse_track_flag(a.track);
  if (a.seed) cfg.seed = *a.seed;
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (!a.data.empty()) cfg.data.train = a.data;
  try {
    cfg.require_track();
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  detail::require_dir(cfg.data.train, "training dataset path");
  if (!cfg.data.validation.empty()) detail::require_dir(cfg.data.validation, "validation dataset path");

  StemDataset train_set = load_stem_dataset(cfg.data.train);
  for (const auto& m : train_set.messages) err << m << '\n';
  require(!train_set.empty(), "no usable songs under ", cfg.data.train);
  StemDataset val_set;
  if (!cfg.data.validation.empty()) {
    val_set = load_stem_dataset(cfg.data.validation);
    for (const auto& m : val_set.messages) err << m << '\n';
  } else if (cfg.data.holdout_songs > 0 && train_set.size() > cfg.data.holdout_songs) {
    const auto split = train_set.songs.end() - static_cast<std::ptrdiff_t>(cfg.data.holdout_songs);
    val_set.songs.assign(std::make_move_iterator(split), std::make_move_iterator(train_set.songs.end()));
    train_set.songs.erase(split, train_set.songs.end());
  }
  if (val_set.empty()) err << "warning: no validation songs; checkpoints will carry no score\n";

  const fs::path run_dir = cfg.out_dir;
  fs::create_directories(run_dir);
  write_run_config(run_dir / "config.json", cfg);

  const Track track = cfg.require_track();
  auto model = build_model<float>(cfg.model_config(), cfg.layout(), cfg.stft, cfg.seed);
  out << "track " << track_name(track) << ", " << train_set.size() << " training songs, "
      << val_set.size() << " validation songs, " << model.parameter_count() << " parameters\n";
  if (!val_set.empty())
    out << "untrained validation " << kMetricLabel << ": "
        << detail::fmt_db(validation_score(model, val_set, track, cfg.separate)) << '\n';

  const TrainConfig tc = cfg.train_config();
  const std::size_t every = std::max<std::size_t>(1, tc.max_steps / 10);
  TrainOptions opts;
  opts.out_dir = run_dir;
  opts.validation = cfg.separate;
  opts.on_step = [&](const TrainRecord& r) {
    if (r.step % every == 0 || r.step == 1 || r.val_score) {
      out << "step " << r.step << " loss " << r.loss.total;
      if (r.val_score) out << " val " << detail::fmt_db(*r.val_score);
      out << '\n';
    }
  };
  const TrainResult result = train(model, train_set, val_set, tc, opts);
  if (result.aborted) {
    err << "training aborted: " << result.abort_reason << '\n';
    return kRuntimeFailure;
  }
  const bool scored = std::any_of(result.checkpoints.begin(), result.checkpoints.end(),
                                  [](const auto& c) { return c.validation_score.has_value(); });
  if (scored)
    write_ensemble_spec(run_dir / "ensemble.json",
                        make_top_k_ensemble(result.checkpoints, cfg.top_k, run_dir));
  out << "final validation " << kMetricLabel << ": "
      << (result.final_val_score ? detail::fmt_db(*result.final_val_score) : std::string("n/a"))
      << '\n';
  return kOk;
}

struct SeparateArgs {
  std::vector<std::string> checkpoints;
  std::string ensemble;
  std::string input;
  std::string out;
  std::string config;
  std::vector<double> weights;
  bool deterministic = false;
};

inline int cmd_separate(const SeparateArgs& a, std::ostream& out, std::ostream&) {
  detail::set_deterministic(a.deterministic);
  require<UsageError>(a.checkpoints.empty() != a.ensemble.empty(),
                      "give either --checkpoint (one or more) or --ensemble");
  require<UsageError>(!a.input.empty() && fs::exists(a.input), "input file does not exist: ",
                      a.input);
  require<UsageError>(!a.out.empty(), "no output directory given (--out)");
  const RunConfig cfg = detail::load_config_or_default(a.config);

  std::vector<fs::path> paths;
  std::vector<double> weights = a.weights;
  if (!a.ensemble.empty()) {
    require<UsageError>(fs::exists(a.ensemble), "ensemble file does not exist: ", a.ensemble);
    const EnsembleSpec spec = read_ensemble_spec(a.ensemble);
    for (const auto& c : spec.checkpoints) paths.push_back(fs::path(a.ensemble).parent_path() / c);
    if (weights.empty()) weights = spec.weights;
  } else {
    for (const auto& c : a.checkpoints) paths.emplace_back(c);
  }
  if (weights.empty()) weights.assign(paths.size(), 1.0);
  require<UsageError>(weights.size() == paths.size(), "--weights has ", weights.size(),
                      " values for ", paths.size(), " checkpoints");
  for (double w : weights)
    require<UsageError>(std::isfinite(w) && w >= 0, "--weights must be finite and >= 0, got ", w);

  std::vector<SeparatorModel<float>> models;
  for (const auto& p : paths) models.push_back(load_checkpoint(p).model);

  std::map<Track, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < models.size(); ++i) groups[models[i].config().track].push_back(i);
  for (const auto& [track, members] : groups) {
    std::vector<const SeparatorModel<float>*> ms;
    std::vector<double> ws;
    double sum = 0;
    for (auto i : members) {
      ms.push_back(&models[i]);
      ws.push_back(weights[i]);
      sum += weights[i];
    }
    require<UsageError>(sum > 0, "weights for track ", track_name(track), " sum to zero");
    const AudioSegment mix = read_wav(a.input, ms.front()->config().sample_rate);
    const AudioSegment est = ensemble_separate(ms, ws, mix, cfg.separate);
    const fs::path dst = fs::path(a.out) / stem_filename(track);
    write_wav(dst, est);
    out << "wrote " << dst.string() << " (" << track_name(track) << ", " << ms.size()
        << (ms.size() == 1 ? " model, " : " models, ") << est.duration() << " s)\n";
  }
  return kOk;
}

struct EvaluateArgs {
  std::string estimates;
  std::string references;
  std::string report;
  bool deterministic = false;
};

inline int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  detail::set_deterministic(a.deterministic);
  detail::require_dir(a.estimates, "estimates directory");
  detail::require_dir(a.references, "references directory");
  const auto subdirs = [](const fs::path& root) {
    std::set<std::string> ids;
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_directory()) ids.insert(e.path().filename().string());
    return ids;
  };
  const auto est_songs = subdirs(a.estimates), ref_songs = subdirs(a.references);
  std::set<std::string> songs = est_songs;
  songs.insert(ref_songs.begin(), ref_songs.end());
  std::vector<Track> tracks;
  for (Track t : kAllTracks)
    for (const auto& s : est_songs)
      if (fs::exists(fs::path(a.estimates) / s / stem_filename(t))) {
        tracks.push_back(t);
        break;
      }
  require(!tracks.empty(), "no estimate stems (vocals.wav, drums.wav, bass.wav, other.wav) under ",
          a.estimates);

  std::vector<MetricRow> rows;
  std::vector<std::string> problems;
  for (const auto& song : songs) {
    for (Track t : tracks) {
      const fs::path e = fs::path(a.estimates) / song / stem_filename(t);
      const fs::path r = fs::path(a.references) / song / stem_filename(t);
      const bool he = fs::exists(e), hr = fs::exists(r);
      if (!he) problems.push_back("missing estimate: " + e.string());
      if (!hr) problems.push_back("missing reference: " + r.string());
      if (!he || !hr) continue;
      const AudioSegment est = read_wav(e), ref = read_wav(r);
      if (!est.same_layout(ref)) {
        problems.push_back("shape or rate mismatch: " + e.string() + " vs " + r.string());
        continue;
      }
      rows.push_back(make_metric_row(song, t, si_sdr(est, ref)));
    }
  }
  const fs::path report = a.report.empty() ? fs::path(a.estimates) / "si_sdr.csv" : fs::path(a.report);
  write_metric_csv(report.string(), rows);

  out << kMetricLabel << " per track (left / right / overall), " << rows.size() << " entries\n";
  for (Track t : tracks) {
    double l = 0, r = 0, m = 0;
    std::size_t n = 0;
    for (const auto& row : rows)
      if (row.track == t) {
        l += row.left_db;
        r += row.right_db;
        m += row.mean_db;
        ++n;
      }
    if (n == 0) continue;
    out << std::setw(8) << track_name(t) << "  " << detail::fmt_db(l / n) << "  "
        << detail::fmt_db(r / n) << "  " << detail::fmt_db(m / n) << '\n';
  }
  out << "report: " << report.string() << '\n';
  for (const auto& p : problems) err << p << '\n';
  return problems.empty() ? kOk : kRuntimeFailure;
}

inline int cmd_inspect(const std::string& checkpoint, std::ostream& out) {
  const auto loaded = load_checkpoint(checkpoint);
  const auto& m = loaded.model;
  const auto& l = m.layout();
  out << "checkpoint: " << checkpoint << '\n'
      << "track: " << track_name(m.config().track) << '\n'
      << "step: " << loaded.info.step << '\n'
      << "validation " << kMetricLabel << ": "
      << (loaded.info.validation_score ? detail::fmt_db(*loaded.info.validation_score)
                                       : std::string("none"))
      << '\n'
      << "parameters: " << m.parameter_count() << '\n'
      << "parameter bytes: " << m.parameter_bytes() << '\n'
      << "size: " << std::fixed << std::setprecision(3) << m.parameter_megabytes() << " MB\n"
      << std::defaultfloat << "sample rate: " << m.config().sample_rate << " Hz\n"
      << "stft: n_fft " << m.stft_config().n_fft << ", hop " << m.stft_config().hop << '\n'
      << "band layout: sub-band 1 bins [0, " << l.cut1 << "), sub-band 2 bins [" << l.cut1 << ", "
      << l.cut2 << "), " << l.total_bins << " bins total (F1 " << l.f1_bins() << ", F2 "
      << l.f2_bins() << ")\n"
      << "seed: " << m.seed() << '\n'
      << "model: " << to_json(m.config()).dump() << '\n';
  return kOk;
}

struct FixtureArgs {
  FixtureOptions options;
  std::string out;
};

inline int cmd_make_fixture(const FixtureArgs& a, std::ostream& out) {
  require<UsageError>(!a.out.empty(), "no output directory given (--out)");
  StemDataset ds;
  try {
    ds = make_synthetic_fixture(a.options);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  write_stem_dataset(ds, a.out);
  out << "wrote " << ds.size() << " songs of " << a.options.duration_s << " s at "
      << a.options.sample_rate << " Hz to " << a.out << '\n';
  return kOk;
}

struct SelectArgs {
  std::vector<std::string> runs;
  int k = 3;
  std::string out;
};

inline int cmd_select(const SelectArgs& a, std::ostream& out) {
  require<UsageError>(a.k >= 1, "--k must be >= 1");
  require<UsageError>(!a.out.empty(), "no output file given (--out)");
  std::vector<CheckpointInfo> infos;
  for (const auto& r : a.runs) {
    require<UsageError>(fs::exists(r), "run directory does not exist: ", r);
    for (const auto& p : detail::find_checkpoints(r)) infos.push_back(read_checkpoint_info(p));
  }
  require(!infos.empty(), "no checkpoints found");
  for (const auto& c : infos)
    require(c.model.track == infos.front().model.track, "checkpoints of different tracks: ",
            c.path.string(), " is ", track_name(c.model.track), ", ", infos.front().path.string(),
            " is ", track_name(infos.front().model.track));
  const fs::path base = fs::absolute(a.out).parent_path();
  for (auto& c : infos) c.path = fs::absolute(c.path);
  const EnsembleSpec spec = make_top_k_ensemble(infos, a.k, base);
  if (!base.empty()) fs::create_directories(base);
  write_ensemble_spec(a.out, spec);
  for (std::size_t i = 0; i < spec.checkpoints.size(); ++i)
    out << spec.checkpoints[i] << "  weight " << spec.weights[i] << '\n';
  return kOk;
}

/// Parses `args` (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Music source separation with sub-band and full-band U-Nets", "bandmix"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train one track's separator");
  train->add_option("--config", ta.config, "Run config (JSON)");
  train->add_option("--track", ta.track, "vocals, drums, bass or other");
  train->add_option("--seed", ta.seed, "Seed for initialisation and crop sampling");
  train->add_option("--out", ta.out, "Run directory");
  train->add_option("--data", ta.data, "Training dataset root");
  train->add_flag("--deterministic", ta.deterministic, "Single worker thread");

  SeparateArgs sa;
  auto* sep = app.add_subcommand("separate", "Separate a mixture with one or more checkpoints");
  sep->add_option("--checkpoint", sa.checkpoints, "Checkpoint directory (repeatable)");
  sep->add_option("--ensemble", sa.ensemble, "Ensemble spec (JSON)");
  sep->add_option("--input", sa.input, "Mixture WAV")->required();
  sep->add_option("--out", sa.out, "Output directory")->required();
  sep->add_option("--config", sa.config, "Run config for chunking settings");
  sep->add_option("--weights", sa.weights, "Ensemble weights w1,w2,...")->delimiter(',');
  sep->add_flag("--deterministic", sa.deterministic, "Single worker thread");

  EvaluateArgs ea;
  auto* eval = app.add_subcommand("evaluate", "Score estimates against references");
  eval->add_option("--estimates", ea.estimates, "Estimates root (<song>/<track>.wav)")->required();
  eval->add_option("--references", ea.references, "References root")->required();
  eval->add_option("--out", ea.report, "CSV report path");
  eval->add_flag("--deterministic", ea.deterministic, "Single worker thread");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "Describe a checkpoint");
  inspect->add_option("--checkpoint", inspect_path, "Checkpoint directory")->required();

  FixtureArgs fa;
  auto* fix = app.add_subcommand("make-fixture", "Write a synthetic four-stem dataset");
  fix->add_option("--out", fa.out, "Dataset root")->required();
  fix->add_option("--seed", fa.options.seed, "Seed");
  fix->add_option("--songs", fa.options.songs, "Number of songs");
  fix->add_option("--duration", fa.options.duration_s, "Seconds per song");
  fix->add_option("--sample-rate", fa.options.sample_rate, "Sample rate in Hz");
  fix->add_option("--channels", fa.options.channels, "Channel count");
  fix->add_option("--crosstalk", fa.options.crosstalk, "Stereo cross-talk factor");

  SelectArgs sel;
  auto* select = app.add_subcommand("select", "Pick the top-k checkpoints into an ensemble spec");
  select->add_option("--runs", sel.runs, "Run or checkpoint directories")->required();
  select->add_option("--k", sel.k, "Number of checkpoints");
  select->add_option("--out", sel.out, "Ensemble spec to write")->required();

  std::vector<std::string> argv_store{"bandmix"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*train) return cmd_train(ta, out, err);
    if (*sep) return cmd_separate(sa, out, err);
    if (*eval) return cmd_evaluate(ea, out, err);
    if (*inspect) return cmd_inspect(inspect_path, out);
    if (*fix) return cmd_make_fixture(fa, out);
    if (*select) return cmd_select(sel, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}

}  // namespace bandmix::cli
