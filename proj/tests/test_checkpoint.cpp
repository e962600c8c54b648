#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "bandmix/checkpoint.hpp"
#include "test_util.hpp"

namespace bm = bandmix;
namespace fs = std::filesystem;

namespace {

const bm::StftConfig kSmallStft{126, 32, "hann", true};
const bm::BandLayout kSmallLayout{16, 40, 64};

bm::SeparatorModel<float> small_model(std::uint64_t seed = 3) {
  auto cfg = bm::tiny_model_config(bm::Track::kDrums);
  cfg.sample_rate = 16000;
  return bm::build_model<float>(cfg, kSmallLayout, kSmallStft, seed);
}

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("bandmix_ckpt_" + name);
  fs::remove_all(p);
  return p;
}

bm::Json read_json(const fs::path& p) { return bm::Json::parse(std::ifstream(p)); }

void write_json(const fs::path& p, const bm::Json& j) { std::ofstream(p) << j.dump(2); }

template <typename F>
std::string format_error_message(F&& f) {
  try {
    f();
  } catch (const bm::FormatError& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected FormatError";
  return {};
}

}  // namespace

TEST(Checkpoint, SaveLoadIsBitExact) {
  const auto model = small_model();
  const auto dir = fresh_dir("roundtrip");
  bm::save_checkpoint(model, dir, 42, 3.25);
  const auto loaded = bm::load_checkpoint(dir);
  ASSERT_EQ(loaded.model.params().size(), model.params().size());
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    EXPECT_EQ(loaded.model.params().name(i), model.params().name(i));
    EXPECT_EQ(loaded.model.params()[i].vec(), model.params()[i].vec()) << model.params().name(i);
  }
  EXPECT_EQ(loaded.model.config(), model.config());
  EXPECT_EQ(loaded.model.layout(), model.layout());
  EXPECT_EQ(loaded.model.stft_config(), model.stft_config());
  EXPECT_EQ(loaded.model.seed(), model.seed());

  const auto mix = bm::testing::random_audio(2, 5000, 16000, 9, 0.3);
  EXPECT_EQ(bm::separate(loaded.model, mix), bm::separate(model, mix));
}

TEST(Checkpoint, ManifestRecordsMetadata) {
  const auto model = small_model(11);
  const auto dir = fresh_dir("manifest");
  bm::save_checkpoint(model, dir, 7, std::nullopt);
  const auto j = read_json(dir / bm::kManifestName);
  EXPECT_EQ(j.at("format_version"), bm::kCheckpointFormatVersion);
  EXPECT_EQ(j.at("seed"), 11);
  EXPECT_EQ(j.at("step"), 7);
  EXPECT_TRUE(j.at("validation_score").is_null());
  EXPECT_EQ(j.at("model").at("track"), "drums");
  EXPECT_EQ(j.at("band_layout").at("cut1"), 16);
  EXPECT_EQ(j.at("band_layout").at("cut2"), 40);
  EXPECT_EQ(j.at("stft").at("hop"), 32);
  EXPECT_EQ(j.at("parameter_count"), model.parameter_count());
  EXPECT_EQ(j.at("parameters").size(), model.params().size());

  const auto info = bm::read_checkpoint_info(dir);
  EXPECT_EQ(info.id, dir.filename().string());
  EXPECT_EQ(info.step, 7u);
  EXPECT_FALSE(info.validation_score.has_value());
  EXPECT_EQ(info.model, model.config());
  EXPECT_FALSE(fs::exists(dir.string() + ".partial"));
}

TEST(Checkpoint, ParameterFilesAreLittleEndianFloat32) {
  const auto model = small_model();
  const auto dir = fresh_dir("layout");
  bm::save_checkpoint(model, dir, 1, 0.0);
  std::size_t total = 0;
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    const auto path = dir / (model.params().name(i) + ".f32");
    ASSERT_TRUE(fs::exists(path)) << path;
    EXPECT_EQ(fs::file_size(path), model.params()[i].size() * 4);
    total += fs::file_size(path);
  }
  EXPECT_EQ(total, model.parameter_bytes());

  const auto& w = model.params()[0];
  std::ifstream is(dir / (model.params().name(0) + ".f32"), std::ios::binary);
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  const std::uint32_t u = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  EXPECT_EQ(std::bit_cast<float>(u), w[0]);
}

TEST(Checkpoint, ResaveReplacesPreviousContents) {
  const auto dir = fresh_dir("resave");
  bm::save_checkpoint(small_model(1), dir, 1, 1.0);
  const auto second = small_model(2);
  bm::save_checkpoint(second, dir, 2, 2.0);
  const auto loaded = bm::load_checkpoint(dir);
  EXPECT_EQ(loaded.info.step, 2u);
  EXPECT_EQ(loaded.model.params()[0].vec(), second.params()[0].vec());
}

TEST(CheckpointErrors, MissingManifest) {
  const auto dir = fresh_dir("nomanifest");
  bm::save_checkpoint(small_model(), dir, 1, 0.0);
  fs::remove(dir / bm::kManifestName);
  EXPECT_NE(format_error_message([&] { bm::load_checkpoint(dir); }).find("manifest"),
            std::string::npos);
  EXPECT_THROW(bm::read_checkpoint_info(dir), bm::FormatError);
}

TEST(CheckpointErrors, CorruptManifest) {
  const auto dir = fresh_dir("corrupt");
  bm::save_checkpoint(small_model(), dir, 1, 0.0);
  std::ofstream(dir / bm::kManifestName) << "{ \"format_version\": 1, ";
  EXPECT_THROW(bm::load_checkpoint(dir), bm::FormatError);
}

TEST(CheckpointErrors, UnsupportedVersion) {
  const auto dir = fresh_dir("version");
  bm::save_checkpoint(small_model(), dir, 1, 0.0);
  auto j = read_json(dir / bm::kManifestName);
  j["format_version"] = 99;
  write_json(dir / bm::kManifestName, j);
  EXPECT_THROW(bm::load_checkpoint(dir), bm::FormatError);
}

TEST(CheckpointErrors, TruncatedParameterFileIsNamed) {
  const auto model = small_model();
  const auto dir = fresh_dir("truncated");
  bm::save_checkpoint(model, dir, 1, 0.0);
  const std::string name = model.params().name(5);
  fs::resize_file(dir / (name + ".f32"), 6);
  const auto msg = format_error_message([&] { bm::load_checkpoint(dir); });
  EXPECT_NE(msg.find(name), std::string::npos) << msg;
}

TEST(CheckpointErrors, ShapeMismatchIsNamed) {
  const auto model = small_model();
  const auto dir = fresh_dir("shape");
  bm::save_checkpoint(model, dir, 1, 0.0);
  auto j = read_json(dir / bm::kManifestName);
  j["parameters"][3]["shape"] = {1, 2, 3};
  write_json(dir / bm::kManifestName, j);
  const auto msg = format_error_message([&] { bm::load_checkpoint(dir); });
  EXPECT_NE(msg.find(model.params().name(3)), std::string::npos) << msg;
}

TEST(CheckpointErrors, ArchitectureMismatchIsRejected) {
  const auto dir = fresh_dir("arch");
  bm::save_checkpoint(small_model(), dir, 1, 0.0);
  auto j = read_json(dir / bm::kManifestName);
  j["model"]["base_width"] = 4;
  write_json(dir / bm::kManifestName, j);
  EXPECT_THROW(bm::load_checkpoint(dir), bm::FormatError);
}

TEST(CheckpointErrors, NonFiniteValueIsNamed) {
  const auto model = small_model();
  const auto dir = fresh_dir("nan");
  bm::save_checkpoint(model, dir, 1, 0.0);
  const std::string name = model.params().name(2);
  {
    std::fstream f(dir / (name + ".f32"), std::ios::binary | std::ios::in | std::ios::out);
    const float nan = std::numeric_limits<float>::quiet_NaN();
    f.write(reinterpret_cast<const char*>(&nan), 4);
  }
  const auto msg = format_error_message([&] { bm::load_checkpoint(dir); });
  EXPECT_NE(msg.find(name), std::string::npos) << msg;
}
