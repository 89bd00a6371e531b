#include <gtest/gtest.h>
#include <httplib.h>

#include <sstream>
#include <thread>

#include "cli.hpp"
#include "golden.hpp"
#include "lseg/service/server.hpp"
#include "support.hpp"

namespace lseg {
namespace {

namespace fs = std::filesystem;
using testing::fixture_dir;
using testing::read_file;

httplib::MultipartFormDataItems upload(const std::string& bytes,
                                       std::vector<std::pair<std::string, std::string>> fields = {}) {
  httplib::MultipartFormDataItems items{{"file", bytes, "patch.h5", "application/x-hdf5"}};
  for (auto& [k, v] : fields) items.push_back({k, v, "", ""});
  return items;
}

std::shared_ptr<const service::Registry> fixture_registry() {
  return std::make_shared<const service::Registry>(service::Registry::load(fixture_dir() / testing::kFixtureRegistry));
}

service::ServiceConfig fixture_config() {
  service::ServiceConfig cfg;
  cfg.port = 0;
  cfg.any_size = true;
  return cfg;
}

int run_cli(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int rc = cli::run(args, out, err);
  if (err_text) *err_text = err.str();
  return rc;
}

class Contract : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    registry_ = fixture_registry();
    server_ = std::make_unique<service::Server>(registry_, fixture_config());
    port_ = server_->start();
    auto small = fixture_config();
    small.max_upload_bytes = testing::kSmallUploadLimit;
    small_ = std::make_unique<service::Server>(registry_, small);
    small_port_ = small_->start();
  }
  static void TearDownTestSuite() {
    server_->stop();
    small_->stop();
    server_.reset();
    small_.reset();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60, 0);
    return c;
  }

  static inline std::shared_ptr<const service::Registry> registry_;
  static inline std::unique_ptr<service::Server> server_;
  static inline std::unique_ptr<service::Server> small_;
  static inline int port_ = 0;
  static inline int small_port_ = 0;
};

TEST_F(Contract, ExchangesMatchGoldenFiles) {
  const auto exchanges = testing::record_golden_exchanges(port_, small_port_);
  std::size_t checked = 0;
  for (const auto& g : exchanges) {
    const fs::path golden = testing::golden_dir() / (g.name + ".json");
    ASSERT_TRUE(fs::exists(golden)) << golden;
    EXPECT_EQ(g.document().dump(2) + "\n", read_file(golden)) << g.name;
    ++checked;
  }
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(testing::golden_dir())) ++files;
  EXPECT_EQ(checked, files);
}

TEST_F(Contract, PredictImagesArePngsOfPatchSize) {
  const auto res = client().Post("/api/predict", upload(read_file(fixture_dir() / testing::kFixturePatch),
                                                        {{"model_id", "tiny-unet"}}));
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const auto body = nlohmann::json::parse(res->body);
  for (const char* key : {"rgb", "mask", "overlay"}) {
    EXPECT_TRUE(testing::is_png_of_size(testing::base64_decode(body["images"][key]), 32, 32)) << key;
  }
  const auto expected = nlohmann::json::parse(read_file(fixture_dir() / "expected_prediction.json"));
  EXPECT_EQ(body["landslide_fraction"], expected["landslide_fraction"]);
}

TEST_F(Contract, EvalReproducesFrozenReport) {
  testing::TempDir out;
  ASSERT_EQ(run_cli({"eval", "--checkpoint", (fixture_dir() / "tiny_unet.lseg").string(), "--manifest",
                     (fixture_dir() / "manifest.json").string(), "--split", "test", "--out", out.path().string(),
                     "--any-size"}),
            0);
  EXPECT_EQ(read_file(out / "metrics.json"), read_file(fixture_dir() / "expected_report.json"));
  EXPECT_EQ(read_file(out / "per_patch.csv"), read_file(fixture_dir() / "expected_per_patch.csv"));
}

TEST_F(Contract, CliAndHttpExportsAreByteIdentical) {
  testing::TempDir out;
  ASSERT_EQ(run_cli({"predict", "--checkpoint", (fixture_dir() / "tiny_unet.lseg").string(), "--input",
                     (fixture_dir() / testing::kFixturePatch).string(), "--outdir", out.path().string(),
                     "--model-id", "tiny-unet", "--any-size"}),
            0);
  auto c = client();
  const auto res = c.Post("/api/predict", upload(read_file(fixture_dir() / testing::kFixturePatch),
                                                 {{"model_id", "tiny-unet"}}));
  ASSERT_TRUE(res);
  const auto body = nlohmann::json::parse(res->body);
  const auto payload = c.Get(body["export"]["payload"].get<std::string>());
  ASSERT_TRUE(payload);
  EXPECT_EQ(payload->status, 200);
  EXPECT_EQ(payload->get_header_value("Content-Type"), "application/octet-stream");
  EXPECT_EQ(payload->body, read_file(out / "probs.bin"));
  EXPECT_EQ(payload->body.size(), 32u * 32 * 4);

  const auto sidecar = c.Get(body["export"]["sidecar"].get<std::string>());
  ASSERT_TRUE(sidecar);
  const auto meta = nlohmann::json::parse(read_file(out / "meta.json"));
  const auto http_sidecar = nlohmann::json::parse(sidecar->body);
  for (const auto& [key, value] : http_sidecar.items()) EXPECT_EQ(meta.at(key), value) << key;
  EXPECT_EQ(meta["landslide_fraction"], body["landslide_fraction"]);
  for (const char* png : {"rgb.png", "mask.png", "overlay.png"}) {
    EXPECT_TRUE(testing::is_png_of_size(read_file(out / png), 32, 32)) << png;
  }
}

TEST_F(Contract, RepeatedDownloadsAreIdentical) {
  auto c = client();
  const auto res = c.Post("/api/predict", upload(read_file(fixture_dir() / testing::kFixturePatchB),
                                                 {{"model_id", "tiny-deeplab"}}));
  ASSERT_TRUE(res);
  const auto url = nlohmann::json::parse(res->body)["export"]["payload"].get<std::string>();
  const auto a = c.Get(url), b = c.Get(url);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->status, 200);
  EXPECT_EQ(a->body, b->body);
}

TEST_F(Contract, ThresholdOneKeepsProbabilitiesAndEmptiesMask) {
  auto c = client();
  const auto patch = read_file(fixture_dir() / testing::kFixturePatch);
  const auto at_half = nlohmann::json::parse(c.Post("/api/predict", upload(patch, {{"model_id", "tiny-unet"}}))->body);
  const auto at_one = nlohmann::json::parse(
      c.Post("/api/predict", upload(patch, {{"model_id", "tiny-unet"}, {"threshold", "1"}}))->body);
  EXPECT_EQ(at_one["landslide_fraction"], 0.0);
  EXPECT_EQ(at_one["images"]["overlay"], at_one["images"]["rgb"]);
  EXPECT_NE(at_one["job_id"], at_half["job_id"]);
  EXPECT_EQ(c.Get(at_one["export"]["payload"].get<std::string>())->body,
            c.Get(at_half["export"]["payload"].get<std::string>())->body);
}

TEST_F(Contract, ConcurrentRequestsAreIsolated) {
  const std::pair<std::string, std::string> cases[2] = {{"tiny-unet", testing::kFixturePatch},
                                                        {"tiny-deeplab", testing::kFixturePatchB}};
  std::string baseline[2];
  for (int k = 0; k < 2; ++k) {
    baseline[k] = client().Post("/api/predict", upload(read_file(fixture_dir() / cases[k].second),
                                                       {{"model_id", cases[k].first}}))->body;
  }
  std::vector<std::string> got(16);
  std::vector<int> status(16, 0);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < got.size(); ++i) {
    threads.emplace_back([&, i] {
      const auto& [model, patch] = cases[i % 2];
      auto c = client();
      const auto res = c.Post("/api/predict", upload(read_file(fixture_dir() / patch), {{"model_id", model}}));
      if (res) {
        status[i] = res->status;
        got[i] = res->body;
      }
    });
  }
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(status[i], 200) << i;
    EXPECT_EQ(got[i], baseline[i % 2]) << i;
  }
}

TEST_F(Contract, OversizeUploadRejectedBeforePrediction) {
  httplib::Client c("127.0.0.1", small_port_);
  const auto res = c.Post("/api/predict", upload(std::string(4096, 'x'), {{"model_id", "tiny-unet"}}));
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 413);
  EXPECT_EQ(nlohmann::json::parse(res->body)["error"], "payload_too_large");
}

TEST_F(Contract, MissingFileFieldIsMalformed) {
  auto c = client();
  httplib::MultipartFormDataItems items{{"model_id", "tiny-unet", "", ""}};
  const auto res = c.Post("/api/predict", items);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 422);
  EXPECT_EQ(nlohmann::json::parse(res->body)["kind"], "missing_file");
}

TEST(ContractApi, ExpiredJobsAreGone) {
  auto now = std::make_shared<std::chrono::steady_clock::time_point>();
  auto cfg = fixture_config();
  cfg.job_ttl = std::chrono::seconds(60);
  service::Api api(fixture_registry(), cfg, [now] { return *now; });
  const auto res = api.predict(read_file(fixture_dir() / testing::kFixturePatch), "tiny-unet", std::nullopt);
  ASSERT_EQ(res.status, 200);
  const std::string job = nlohmann::json::parse(res.body)["job_id"];
  EXPECT_EQ(api.export_payload(job, "tiny-unet").status, 200);
  EXPECT_EQ(api.export_sidecar(job, "tiny-unet").status, 200);
  *now += std::chrono::seconds(61);
  EXPECT_EQ(api.export_payload(job, "tiny-unet").status, 404);
  EXPECT_EQ(api.export_sidecar(job, "tiny-unet").status, 404);
  EXPECT_EQ(api.jobs().sweep(), 1u);
}

TEST(ContractApi, StrictSizeRejectsFixturePatch) {
  auto cfg = fixture_config();
  cfg.any_size = false;
  service::Api api(fixture_registry(), cfg);
  const auto res = api.predict(read_file(fixture_dir() / testing::kFixturePatch), "tiny-unet", std::nullopt);
  EXPECT_EQ(res.status, 422);
  EXPECT_EQ(nlohmann::json::parse(res.body)["kind"], "wrong_size");
}

}  // namespace
}  // namespace lseg
