#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "bandmix/json_io.hpp"
#include "bandmix/model/separator.hpp"

namespace bandmix {

namespace fs = std::filesystem;

inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";

/// What a checkpoint's manifest says about it, without the parameters.
struct CheckpointInfo {
  fs::path path;
  std::string id;  // directory name
  std::uint64_t step = 0;
  std::optional<double> validation_score;
  ModelConfig model;
  BandLayout layout;
  StftConfig stft;
  std::uint64_t seed = 0;
};

namespace detail {

inline void write_f32_le(const fs::path& path, const std::vector<float>& v) {
  std::vector<unsigned char> bytes(v.size() * 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto u = std::bit_cast<std::uint32_t>(v[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<unsigned char>(u >> (8 * b));
  }
  std::ofstream os(path, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require<FormatError>(static_cast<bool>(os), "cannot write ", path.string());
}

inline std::vector<float> read_f32_le(const fs::path& path, std::size_t count,
                                      const std::string& param) {
  std::ifstream is(path, std::ios::binary);
  require<FormatError>(static_cast<bool>(is), "parameter '", param, "': cannot open ",
                       path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  require<FormatError>(bytes.size() == count * 4, "parameter '", param, "': file ",
                       path.filename().string(), " holds ", bytes.size(), " bytes, expected ",
                       count * 4, " (", count, " float32 values)");
  std::vector<float> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    v[i] = std::bit_cast<float>(u);
  }
  return v;
}

inline std::string param_filename(const std::string& name) { return name + ".f32"; }

inline CheckpointInfo parse_manifest(const fs::path& dir) {
  const fs::path mpath = dir / kManifestName;
  require<FormatError>(fs::exists(mpath), "checkpoint ", dir.string(), " has no ", kManifestName);
  std::ifstream is(mpath);
  Json j;
  try {
    j = Json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("corrupt manifest " + mpath.string() + ": " + e.what());
  }
  require<FormatError>(j.is_object(), "corrupt manifest ", mpath.string());
  require<FormatError>(j.value("format_version", -1) == kCheckpointFormatVersion,
                       "unsupported checkpoint format version in ", mpath.string());
  CheckpointInfo info;
  info.path = dir;
  info.id = dir.filename().string();
  try {
    info.step = j.at("step").get<std::uint64_t>();
    info.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("validation_score").is_null())
      info.validation_score = j.at("validation_score").get<double>();
    info.model = model_config_from_json<FormatError>(j.at("model"));
    info.layout = band_layout_from_json<FormatError>(j.at("band_layout"));
    info.stft = stft_config_from_json<FormatError>(j.at("stft"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("corrupt manifest " + mpath.string() + ": " + e.what());
  }
  return info;
}

}  // namespace detail

/// Writes `dir/manifest.json` plus one little-endian float32 file per
/// parameter. The directory is assembled under a temporary name and then
/// renamed, so an interrupted save never replaces a good checkpoint.
template <typename T>
void save_checkpoint(const SeparatorModel<T>& model, const fs::path& dir, std::uint64_t step,
                     std::optional<double> validation_score) {
  const fs::path tmp = dir.string() + ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  Json params = Json::array();
  const auto& p = model.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::vector<float> v(p[i].size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<float>(p[i][k]);
    const std::string file = detail::param_filename(p.name(i));
    detail::write_f32_le(tmp / file, v);
    params.push_back({{"name", p.name(i)}, {"shape", p[i].shape()}, {"file", file}});
  }
  Json j = {{"format_version", kCheckpointFormatVersion},
            {"model", to_json(model.config())},
            {"band_layout", to_json(model.layout())},
            {"stft", to_json(model.stft_config())},
            {"seed", model.seed()},
            {"step", step},
            {"validation_score", validation_score ? Json(*validation_score) : Json(nullptr)},
            {"parameter_count", model.parameter_count()},
            {"parameters", params}};
  {
    std::ofstream os(tmp / kManifestName);
    os << j.dump(2) << '\n';
    require<FormatError>(static_cast<bool>(os), "cannot write manifest in ", tmp.string());
  }
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

inline CheckpointInfo read_checkpoint_info(const fs::path& dir) { return detail::parse_manifest(dir); }

struct LoadedCheckpoint {
  SeparatorModel<float> model;
  CheckpointInfo info;
};

/// Rebuilds the model the manifest describes and fills its parameters.
/// Any disagreement between manifest, architecture and files is a
/// FormatError naming the parameter concerned.
inline LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  CheckpointInfo info = detail::parse_manifest(dir);
  std::optional<SeparatorModel<float>> model;
  try {
    model.emplace(SeparatorModel<float>::uninitialized(info.model, info.layout, info.stft, info.seed));
  } catch (const InvalidArgument& e) {
    throw FormatError("checkpoint " + dir.string() + " describes an invalid model: " + e.what());
  }
  Json j = Json::parse(std::ifstream(dir / kManifestName));
  const Json& entries = j.at("parameters");
  auto& p = model->params();
  require<FormatError>(entries.is_array() && entries.size() == p.size(), "checkpoint ",
                       dir.string(), " lists ", entries.size(), " parameters, the model has ",
                       p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Json& e = entries[i];
    const std::string name = e.value("name", std::string{});
    require<FormatError>(name == p.name(i), "parameter ", i, " is '", name, "' in the manifest, '",
                         p.name(i), "' in the model");
    Shape shape;
    try {
      shape = e.at("shape").get<Shape>();
    } catch (const nlohmann::json::exception&) {
      throw FormatError("parameter '" + name + "': unreadable shape");
    }
    require<FormatError>(shape == p[i].shape(), "parameter '", name, "': manifest shape ",
                         shape_str(shape), " but the model expects ", shape_str(p[i].shape()));
    const auto values = detail::read_f32_le(dir / e.value("file", detail::param_filename(name)),
                                            p[i].size(), name);
    require<FormatError>(all_finite(values.begin(), values.end()), "parameter '", name,
                         "' contains non-finite values");
    std::copy(values.begin(), values.end(), p[i].vec().begin());
  }
  return {std::move(*model), std::move(info)};
}

}  // namespace bandmix
