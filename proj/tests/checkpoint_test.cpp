// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstring>

#include "clstm/checkpoint.hpp"
#include "clstm/data.hpp"
#include "clstm/errors.hpp"
#include "clstm/evaluation.hpp"
#include "temp_dir.hpp"

using namespace clstm;
using clstm::testing::TempDir;

namespace {

Architecture arch() {
  Architecture a;
  a.hidden_channels = {3, 2};
  a.kernel_size = 3;
  a.height = 12;
  a.width = 14;
  a.window = 4;
  a.offset = 2;
  return a;
}

void expect_same_bits(const Model<float>& a, const Model<float>& b) {
  ASSERT_EQ(a.arch, b.arch);
  const auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ASSERT_EQ(pa[i]->shape(), pb[i]->shape());
    EXPECT_EQ(std::memcmp(pa[i]->data(), pb[i]->data(), pa[i]->size() * sizeof(float)), 0) << "tensor " << i;
  }
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  const auto m = init_model<float>(arch(), 9);
  checkpoint_save(m, dir / "m.ckpt", {{"lr", "0.001"}});
  const auto loaded = checkpoint_load(dir / "m.ckpt");
  expect_same_bits(m, loaded.model);
  EXPECT_EQ(loaded.config.at("lr"), "0.001");
  EXPECT_EQ(loaded.config.at("offset"), "2");
  EXPECT_EQ(encode_checkpoint(loaded.model, {{"lr", "0.001"}}), encode_checkpoint(m, {{"lr", "0.001"}}));
}

TEST(Checkpoint, LayoutStartsWithMagicAndVersion) {
  const std::string bytes = encode_checkpoint(Model<float>(arch()));
  ASSERT_GT(bytes.size(), 16u);
  EXPECT_EQ(bytes.substr(0, 8), "CLSTMCKP");
  EXPECT_EQ(bytes.substr(8, 4), std::string("\x01\x00\x00\x00", 4));
}

TEST(Checkpoint, DoubleModelStoresFloat32) {
  const auto m = init_model<double>(arch(), 3);
  const auto loaded = decode_checkpoint(encode_checkpoint(m));
  expect_same_bits(m.cast<float>(), loaded.model);
}

TEST(Checkpoint, EveryTruncationIsCorruption) {
  const std::string bytes = encode_checkpoint(init_model<float>(arch(), 1));
  for (std::size_t len = 12; len < bytes.size(); len += 7) {
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, len)), CorruptCheckpointError) << "length " << len;
  }
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, 10)), CorruptCheckpointError);
}

TEST(Checkpoint, DistinctErrors) {
  std::string bytes = encode_checkpoint(Model<float>(arch()));
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), BadMagicError);
  std::string bad_version = bytes;
  bad_version[8] = 2;
  EXPECT_THROW(decode_checkpoint(bad_version), VersionMismatchError);
  EXPECT_THROW(decode_checkpoint(bytes + std::string("\x01", 1)), CorruptCheckpointError);
  EXPECT_THROW(checkpoint_load("/nonexistent/clstm/m.ckpt"), IoError);
}

TEST(Checkpoint, ShapeTableMustMatchConfig) {
  Architecture wide = arch();
  wide.hidden_channels = {4, 2};
  const std::string a = encode_checkpoint(Model<float>(arch()));
  const std::string b = encode_checkpoint(Model<float>(wide));
  // Splice the config block of one model onto the tensor table of the other.
  auto config_end = [](const std::string& s) {
    std::uint32_t n = 0;
    std::memcpy(&n, s.data() + 12, 4);
    return 16 + static_cast<std::size_t>(n);
  };
  const std::string spliced = a.substr(0, config_end(a)) + b.substr(config_end(b));
  EXPECT_THROW(decode_checkpoint(spliced), CorruptCheckpointError);
}

TEST(Checkpoint, ArchConfigRoundTrip) {
  EXPECT_EQ(arch_from_config(arch_to_config(arch())), arch());
  ConfigMap cfg = arch_to_config(arch());
  cfg["hidden"] = "3,x";
  EXPECT_THROW(arch_from_config(cfg), CorruptCheckpointError);
  cfg.erase("hidden");
  EXPECT_THROW(arch_from_config(cfg), CorruptCheckpointError);
}

TEST(Checkpoint, EvaluationAfterReloadMatches) {
  TempDir dir;
  SynthConfig sc;
  sc.videos = 1;
  sc.frames_per_video = 12;
  sc.height = 12;
  sc.width = 14;
  Dataset ds;
  ds.names = {"v"};
  ds.videos = render_synthetic(sc);
  const auto windows = make_windows(ds, 2, 4);
  const auto m = init_model<float>(arch(), 4);
  checkpoint_save(m, dir / "k2.ckpt");
  const auto loaded = checkpoint_load(dir / "k2.ckpt").model;
  const auto before = evaluate({model_predictor(m)}, windows, 2);
  const auto after = evaluate({model_predictor(loaded)}, windows, 2);
  EXPECT_NEAR(before.rows[0].mse, after.rows[0].mse, 1e-9);
  EXPECT_NEAR(before.rows[0].cwssim, after.rows[0].cwssim, 1e-9);
}
