#include <gtest/gtest.h>

#include <cstring>
#include <nlohmann/json.hpp>

#include "lseg/models/checkpoint.hpp"
#include "lseg/models/model.hpp"
#include "lseg/models/networks.hpp"
#include "support.hpp"

namespace lseg::models {
namespace {

ModelSpec spec_of(Architecture arch, std::size_t in, std::size_t base, std::size_t depth) {
  ModelSpec s;
  s.architecture = arch;
  s.in_channels = in;
  s.base_width = base;
  s.depth = depth;
  s.aspp_rates = {1, 2};
  return s;
}

Model<float> build(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return build_model<float>(spec, rng);
}

void expect_open_unit_interval(const Tensor& p) {
  for (float v : p.values()) {
    ASSERT_GT(v, 0.0f);
    ASSERT_LT(v, 1.0f);
  }
}

TEST(Models, UNetShapeTrace) {
  const auto m = build(spec_of(Architecture::kUNetPlain, 6, 8, 3), 1);
  Rng rng(2);
  const auto p = m.forward(testing::random_tensor({1, 6, 64, 64}, rng));
  EXPECT_EQ(p.shape(), (Shape{1, 1, 64, 64}));
  expect_open_unit_interval(p);
}

TEST(Models, DecoderConcatenationWidths) {
  Rng rng(3);
  const auto spec = spec_of(Architecture::kUNetPlain, 6, 8, 3);
  UNet<float> net(spec, rng);
  for (std::size_t d = 0; d < 3; ++d) {
    EXPECT_EQ(net.skip_channels(d), spec.width_at(d));
    EXPECT_EQ(net.decoder_concat_channels(d), 2 * spec.width_at(d));
  }
}

TEST(Models, OutputExtentMatchesInputForRandomSizes) {
  Rng rng(4);
  for (auto arch : {Architecture::kUNetPlain, Architecture::kUNetDense, Architecture::kDeepLabLite}) {
    for (std::size_t depth : {1u, 2u, 3u}) {
      const auto m = build(spec_of(arch, 3, 2, depth), depth);
      const std::size_t mult = std::size_t{1} << depth;
      for (int trial = 0; trial < 3; ++trial) {
        const std::size_t h = mult * (1 + rng.below(4)), w = mult * (1 + rng.below(4));
        const auto p = m.forward(testing::random_tensor({2, 3, h, w}, rng));
        ASSERT_EQ(p.shape(), (Shape{2, 1, h, w})) << to_string(arch) << " depth " << depth;
        expect_open_unit_interval(p);
      }
    }
  }
}

TEST(Models, MinimalUNetParameterCount) {
  // enc 9C+1, 9+1; bottleneck 18+2, 36+2; up 8+1; dec 18+1, 9+1; head 1+1.
  for (std::size_t c : {1u, 6u, 14u}) {
    const auto m = build(spec_of(Architecture::kUNetPlain, c, 1, 1), 1);
    EXPECT_EQ(m.parameter_count(), 9 * c + 109) << c;
  }
}

TEST(Models, SameSeedSameWeights) {
  for (auto arch : {Architecture::kUNetPlain, Architecture::kUNetDense, Architecture::kDeepLabLite}) {
    auto a = build(spec_of(arch, 4, 4, 2), 9);
    auto b = build(spec_of(arch, 4, 4, 2), 9);
    auto c = build(spec_of(arch, 4, 4, 2), 10);
    const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    ASSERT_EQ(pa.size(), pb.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      EXPECT_EQ(pa[i].name, pb[i].name);
      EXPECT_EQ(*pa[i].value, *pb[i].value) << pa[i].name;
      any_diff = any_diff || !(*pa[i].value == *pc[i].value);
    }
    EXPECT_TRUE(any_diff);
  }
}

TEST(Models, RepeatedForwardIsBitwiseStable) {
  const auto m = build(spec_of(Architecture::kUNetDense, 5, 4, 2), 5);
  Rng rng(6);
  const auto x = testing::random_tensor({2, 5, 16, 16}, rng);
  EXPECT_EQ(m.forward(x), m.forward(x));
}

TEST(Models, SqueezeExcitationVariantBuilds) {
  auto spec = spec_of(Architecture::kUNetPlain, 3, 4, 2);
  spec.se = true;
  const auto with = build(spec, 1);
  const auto without = build(spec_of(Architecture::kUNetPlain, 3, 4, 2), 1);
  EXPECT_GT(with.parameter_count(), without.parameter_count());
  Rng rng(2);
  EXPECT_EQ(with.forward(testing::random_tensor({1, 3, 8, 8}, rng)).shape(), (Shape{1, 1, 8, 8}));
}

TEST(Models, InputValidation) {
  const auto m = build(spec_of(Architecture::kUNetPlain, 6, 2, 2), 1);
  EXPECT_THROW(m.forward(Tensor({1, 5, 8, 8})), ShapeError);
  EXPECT_THROW(m.forward(Tensor({1, 6, 10, 8})), ShapeError);
  EXPECT_THROW(m.forward(Tensor({6, 8, 8})), ShapeError);
}

TEST(Models, SpecValidation) {
  EXPECT_THROW(spec_of(Architecture::kUNetPlain, 6, 8, 0).validate(), SpecError);
  EXPECT_THROW(spec_of(Architecture::kUNetPlain, 6, 0, 2).validate(), SpecError);
  EXPECT_THROW(spec_of(Architecture::kUNetPlain, 0, 8, 2).validate(), SpecError);
  auto s = spec_of(Architecture::kDeepLabLite, 6, 8, 2);
  s.aspp_rates.clear();
  EXPECT_THROW(s.validate(), SpecError);
  EXPECT_THROW(parse_architecture("resnet"), SpecError);
  EXPECT_EQ(parse_architecture("unet-dense"), Architecture::kUNetDense);
  const auto spec = spec_of(Architecture::kDeepLabLite, 14, 8, 3);
  EXPECT_EQ(nlohmann::json(spec).get<ModelSpec>(), spec);
}

TEST(PredictMask, ThresholdConvention) {
  const Tensor p({3}, {0.49f, 0.5f, 0.51f});
  EXPECT_EQ(predict_mask(p, 0.5), Tensor({3}, {0.0f, 1.0f, 1.0f}));
  EXPECT_EQ(predict_mask(p, 0.0), Tensor({3}, {1.0f, 1.0f, 1.0f}));
  EXPECT_EQ(predict_mask(p, 1.0), Tensor({3}, {0.0f, 0.0f, 0.0f}));
  EXPECT_EQ(predict_mask_bytes(p, 0.5), (std::vector<std::uint8_t>{0, 1, 1}));
}

TEST(PredictMask, ThresholdOneOnRealOutputIsEmpty) {
  const auto m = build(spec_of(Architecture::kUNetPlain, 2, 2, 1), 3);
  Rng rng(4);
  const auto bytes = predict_mask_bytes(m.forward(testing::random_tensor({1, 2, 8, 8}, rng, -50, 50)), 1.0);
  for (auto b : bytes) EXPECT_EQ(b, 0);
}

data::BandStats stats_for(std::size_t c) {
  data::BandStats s;
  for (std::size_t i = 0; i < c; ++i) {
    s.mean.push_back(0.1 * static_cast<double>(i));
    s.std.push_back(1.0 + static_cast<double>(i));
  }
  return s;
}

std::vector<std::byte> checkpoint_of(Model<float>& m) {
  return save_checkpoint_bytes(m, data::ChannelConfig::six_channel(), stats_for(m.spec().in_channels),
                               {{"epoch", 3}});
}

CheckpointError::Kind load_error(const std::vector<std::byte>& bytes) {
  try {
    load_checkpoint_bytes(bytes);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "checkpoint loaded";
  return CheckpointError::Kind::kIo;
}

std::uint64_t header_length(const std::vector<std::byte>& bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[8 + i]) << (8 * i);
  return v;
}

nlohmann::json header_of(const std::vector<std::byte>& bytes) {
  const auto* p = reinterpret_cast<const char*>(bytes.data()) + 16;
  return nlohmann::json::parse(std::string(p, header_length(bytes)));
}

std::vector<std::byte> with_header(const std::vector<std::byte>& bytes, const nlohmann::json& header) {
  const std::string text = header.dump();
  std::vector<std::byte> out(bytes.begin(), bytes.begin() + 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((text.size() >> (8 * i)) & 0xFF));
  for (char c : text) out.push_back(static_cast<std::byte>(c));
  out.insert(out.end(), bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_length(bytes)), bytes.end());
  return out;
}

TEST(Checkpoint, RoundTripPreservesPredictionsBitwise) {
  Rng rng(7);
  for (auto arch : {Architecture::kUNetPlain, Architecture::kUNetDense, Architecture::kDeepLabLite}) {
    auto m = build(spec_of(arch, 6, 4, 2), 8);
    // Move batch-norm running statistics away from their initial values.
    m.set_training(true);
    m.forward_train(testing::random_tensor({2, 6, 8, 8}, rng, 0.5, 2.0));
    m.set_training(false);
    const auto x = testing::random_tensor({2, 6, 16, 16}, rng);
    const auto bytes = checkpoint_of(m);
    const auto ck = load_checkpoint_bytes(bytes);
    EXPECT_EQ(ck.model.spec(), m.spec());
    EXPECT_EQ(ck.model.forward(x), m.forward(x)) << to_string(arch);
    EXPECT_EQ(ck.channels, data::ChannelConfig::six_channel());
    EXPECT_EQ(ck.band_stats, stats_for(6));
    EXPECT_EQ(ck.training.at("epoch"), 3);
  }
}

TEST(Checkpoint, FileRoundTripAndHeader) {
  testing::TempDir dir;
  auto m = build(spec_of(Architecture::kUNetPlain, 6, 2, 1), 1);
  save_checkpoint(dir / "m.lseg", m, data::ChannelConfig::six_channel(), stats_for(6));
  const auto bytes = testing::read_file(dir / "m.lseg");
  EXPECT_EQ(bytes.substr(0, 4), "LSEG");
  const auto header = read_checkpoint_header(dir / "m.lseg");
  EXPECT_EQ(header.at("model").at("architecture"), "unet-plain");
  std::uint64_t end = 0;
  for (const auto& t : header.at("tensors")) {
    EXPECT_EQ(t.at("dtype"), "f32");
    EXPECT_EQ(t.at("offset").get<std::uint64_t>(), end);
    end += t.at("nbytes").get<std::uint64_t>();
  }
  const std::vector<std::byte> raw(reinterpret_cast<const std::byte*>(bytes.data()),
                                  reinterpret_cast<const std::byte*>(bytes.data()) + bytes.size());
  EXPECT_EQ(16 + header_length(raw) + end, bytes.size());
  EXPECT_EQ(load_checkpoint(dir / "m.lseg").model.parameter_count(), m.parameter_count());
  try {
    load_checkpoint(dir / "missing.lseg");
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::kIo);
  }
}

TEST(Checkpoint, CorruptionsRaiseDistinctErrors) {
  auto m = build(spec_of(Architecture::kUNetPlain, 6, 2, 1), 1);
  const auto good = checkpoint_of(m);
  using K = CheckpointError::Kind;

  auto magic = good;
  magic[0] = std::byte{'X'};
  EXPECT_EQ(load_error(magic), K::kBadMagic);

  auto version = good;
  version[4] = std::byte{9};
  EXPECT_EQ(load_error(version), K::kVersionMismatch);

  EXPECT_EQ(load_error(std::vector<std::byte>(good.begin(), good.begin() + 10)), K::kTruncated);
  EXPECT_EQ(load_error(std::vector<std::byte>(good.begin(), good.end() - 4)), K::kTruncated);

  auto garbled = good;
  garbled[16] = std::byte{'!'};
  EXPECT_EQ(load_error(garbled), K::kBadHeader);

  auto header = header_of(good);
  const std::string victim = header["tensors"][0]["name"];
  const std::size_t n = header["tensors"][0]["nbytes"].get<std::size_t>() / 4;
  header["tensors"][0]["shape"] = {n};
  try {
    load_checkpoint_bytes(with_header(good, header));
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), K::kShapeMismatch);
    EXPECT_NE(std::string(e.what()).find(victim), std::string::npos) << e.what();
  }

  header = header_of(good);
  header["tensors"].erase(header["tensors"].begin() + 1);
  EXPECT_EQ(load_error(with_header(good, header)), K::kMissingTensor);

  header = header_of(good);
  header["tensors"][1]["offset"] = 0;
  EXPECT_EQ(load_error(with_header(good, header)), K::kOverlap);

  EXPECT_NO_THROW(load_checkpoint_bytes(with_header(good, header_of(good))));
}

}  // namespace
}  // namespace lseg::models
