#include <gtest/gtest.h>

#include <cstring>
#include <thread>

#include "lseg/data/synth.hpp"
#include "lseg/service/job_store.hpp"
#include "lseg/service/predictor.hpp"
#include "lseg/service/registry.hpp"
#include "lseg/service/render.hpp"
#include "support.hpp"

namespace lseg::service {
namespace {

using namespace std::chrono_literals;

Image solid(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Image img{w, h, 3, {}};
  for (std::size_t i = 0; i < w * h; ++i) img.pixels.insert(img.pixels.end(), {r, g, b});
  return img;
}

TEST(Render, OverlayAlphaEndpointsAndBlend) {
  const auto rgb = solid(2, 2, 10, 100, 201);
  const std::vector<std::uint8_t> mask = {1, 0, 0, 1};
  EXPECT_EQ(render_overlay(rgb, mask, 0.0), rgb);
  const auto full = render_overlay(rgb, mask, 1.0);
  EXPECT_EQ(std::vector<std::uint8_t>(full.pixels.begin(), full.pixels.begin() + 6),
            (std::vector<std::uint8_t>{255, 0, 0, 10, 100, 201}));
  const auto half = render_overlay(rgb, mask, 0.5);
  // (10+255)/2 = 132.5, 100/2 = 50, 201/2 = 100.5; halves round away from zero.
  EXPECT_EQ(std::vector<std::uint8_t>(half.pixels.begin() + 9, half.pixels.end()),
            (std::vector<std::uint8_t>{133, 50, 101}));
  const std::vector<std::uint8_t> none(4, 0);
  EXPECT_EQ(render_overlay(rgb, none, 0.7), rgb);
  EXPECT_THROW(render_overlay(rgb, std::vector<std::uint8_t>(3, 0)), ShapeError);
}

TEST(Render, MaskImageAndComposite) {
  const std::vector<std::uint8_t> mask = {0, 1, 1, 0, 0, 1};
  const auto m = mask_image(mask, 2, 3);
  EXPECT_EQ(m.channels, 1u);
  EXPECT_EQ(m.pixels, (std::vector<std::uint8_t>{0, 255, 255, 0, 0, 255}));
  const auto s = data::synth_dataset(1, 16, 3)[0];
  const auto rgb = rgb_composite(s, {4, 3, 2});
  EXPECT_EQ(rgb.width, 16u);
  EXPECT_EQ(rgb.height, 16u);
  EXPECT_EQ(rgb.pixels.size(), 16u * 16 * 3);
  EXPECT_EQ(rgb, rgb_composite(s, {4, 3, 2}));
}

TEST(Render, PngIsValidAndDeterministic) {
  const auto img = solid(5, 3, 1, 2, 3);
  const auto a = encode_png(img);
  const std::string bytes(a.begin(), a.end());
  EXPECT_TRUE(testing::is_png_of_size(bytes, 5, 3));
  EXPECT_EQ(a, encode_png(img));
  EXPECT_NE(a, encode_png(solid(5, 3, 1, 2, 4)));
}

struct FakeClock {
  std::shared_ptr<std::chrono::steady_clock::time_point> now =
      std::make_shared<std::chrono::steady_clock::time_point>();
  JobStore::Clock fn() const {
    auto n = now;
    return [n] { return *n; };
  }
  void advance(std::chrono::seconds s) const { *now += s; }
};

TEST(JobStore, ExpiresAfterTtl) {
  FakeClock clock;
  JobStore store(10s, clock.fn());
  store.put("job", "m", {{1, 2, 3}, "{}"});
  ASSERT_TRUE(store.get("job", "m").has_value());
  EXPECT_EQ(store.get("job", "m")->payload, (std::vector<std::uint8_t>{1, 2, 3}));
  EXPECT_FALSE(store.get("job", "other").has_value());
  clock.advance(9s);
  EXPECT_TRUE(store.get("job", "m").has_value());
  clock.advance(2s);
  EXPECT_FALSE(store.get("job", "m").has_value());
  EXPECT_EQ(store.sweep(), 1u);
  EXPECT_EQ(store.job_count(), 0u);
}

TEST(JobStore, PutRestartsTtl) {
  FakeClock clock;
  JobStore store(10s, clock.fn());
  store.put("job", "a", {{1}, "a"});
  clock.advance(8s);
  store.put("job", "b", {{2}, "b"});
  clock.advance(8s);
  EXPECT_TRUE(store.get("job", "a").has_value());
  EXPECT_EQ(store.sweep(), 0u);
}

TEST(JobStore, BackgroundSweeperEvicts) {
  FakeClock clock;
  JobStore store(1s, clock.fn());
  store.put("j", "m", {{}, ""});
  clock.advance(5s);
  store.start_sweeper(5ms);
  for (int i = 0; i < 400 && store.job_count() > 0; ++i) std::this_thread::sleep_for(5ms);
  EXPECT_EQ(store.job_count(), 0u);
}

TEST(JobStore, ContentAddressedIds) {
  const auto a = job_id_for("abc", 0.5);
  EXPECT_EQ(a.size(), 16u);
  EXPECT_EQ(a.find_first_not_of("0123456789abcdef"), std::string::npos);
  EXPECT_EQ(a, job_id_for("abc", 0.5));
  EXPECT_NE(a, job_id_for("abd", 0.5));
  EXPECT_NE(a, job_id_for("abc", 0.6));
}

models::Checkpoint tiny_checkpoint(std::uint64_t seed, std::size_t in = 6) {
  models::ModelSpec spec;
  spec.in_channels = in;
  spec.base_width = 2;
  spec.depth = 1;
  Rng rng(seed);
  auto m = models::build_model<float>(spec, rng);
  const auto channels = in == 6 ? data::ChannelConfig::six_channel() : data::ChannelConfig::passthrough();
  data::BandStats stats{std::vector<double>(in, 0.2), std::vector<double>(in, 0.5)};
  return models::load_checkpoint_bytes(models::save_checkpoint_bytes(m, channels, stats));
}

TEST(Predictor, ResultFieldsAreConsistent) {
  const auto s = data::synth_dataset(1, 16, 4)[0];
  const auto ck = tiny_checkpoint(1);
  const auto p = predict(ck, s, "tiny");
  EXPECT_EQ(p.height, 16u);
  EXPECT_EQ(p.mask.size(), 256u);
  EXPECT_GE(p.landslide_fraction, 0.0);
  EXPECT_LE(p.landslide_fraction, 1.0);
  std::size_t ones = 0;
  for (auto v : p.mask) ones += v;
  EXPECT_DOUBLE_EQ(p.landslide_fraction, static_cast<double>(ones) / 256.0);
  EXPECT_EQ(p.overlay, render_overlay(p.rgb, p.mask, 0.5));
  EXPECT_EQ(p.mask_image, mask_image(p.mask, 16, 16));
  const auto payload = p.probability_payload();
  ASSERT_EQ(payload.size(), 256u * 4);
  float first;
  std::memcpy(&first, payload.data(), 4);
  EXPECT_EQ(first, p.probs[0]);
  EXPECT_EQ(p.sidecar().dump(), R"({"shape":[16,16],"dtype":"f32le","threshold":0.5,"model":"tiny"})");
}

TEST(Predictor, ThresholdOneGivesEmptyMask) {
  const auto s = data::synth_dataset(1, 16, 5)[0];
  const auto p = predict(tiny_checkpoint(2), s, "tiny", 1.0);
  EXPECT_EQ(p.landslide_fraction, 0.0);
  EXPECT_EQ(p.overlay, p.rgb);
}

TEST(Predictor, CacheSharesAssembledInputs) {
  const auto s = data::synth_dataset(1, 16, 6)[0];
  InputCache cache(s);
  const auto a = predict(tiny_checkpoint(3), s, "a", std::nullopt, &cache);
  const auto b = predict(tiny_checkpoint(4), s, "b", std::nullopt, &cache);
  EXPECT_EQ(cache.size(), 1u);
  predict(tiny_checkpoint(5, 14), s, "c", std::nullopt, &cache);
  EXPECT_EQ(cache.size(), 2u);
  EXPECT_EQ(a.probs, predict(tiny_checkpoint(3), s, "a").probs);
  EXPECT_FALSE(a.probs == b.probs);
}

TEST(Registry, LoadsSortsAndRecordsFailures) {
  testing::TempDir dir;
  auto ck = tiny_checkpoint(1);
  models::save_checkpoint(dir / "good.lseg", ck.model, ck.channels, ck.band_stats);
  testing::write_file(dir / "bad.lseg", "garbage");
  testing::write_file(dir / "reg.json", R"({"models":[
    {"id":"zeta","name":"Z","description":"d","checkpoint":"good.lseg","architecture":"unet-plain","f1":0.7},
    {"id":"alpha","name":"A","description":"d","checkpoint":"bad.lseg","architecture":"unet-plain"}]})");
  const auto reg = Registry::load(dir / "reg.json");
  ASSERT_EQ(reg.entries().size(), 2u);
  EXPECT_EQ(reg.entries()[0].entry.id, "alpha");
  EXPECT_FALSE(reg.entries()[0].available());
  EXPECT_FALSE(reg.entries()[0].error.empty());
  EXPECT_TRUE(reg.find("zeta")->available());
  EXPECT_EQ(reg.find("zeta")->entry.f1, 0.7);
  EXPECT_EQ(reg.find("nope"), nullptr);
}

TEST(Registry, DuplicateIdsAndMalformedJsonRejected) {
  testing::TempDir dir;
  testing::write_file(dir / "dup.json", R"({"models":[
    {"id":"a","name":"A","description":"","checkpoint":"x.lseg","architecture":"unet-plain"},
    {"id":"a","name":"B","description":"","checkpoint":"y.lseg","architecture":"unet-plain"}]})");
  EXPECT_THROW(Registry::load(dir / "dup.json"), std::invalid_argument);
  testing::write_file(dir / "bad.json", "{models:");
  EXPECT_THROW(Registry::load(dir / "bad.json"), std::invalid_argument);
}

}  // namespace
}  // namespace lseg::service
