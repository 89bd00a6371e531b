#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "lseg/service/job_store.hpp"
#include "lseg/service/predictor.hpp"
#include "lseg/service/registry.hpp"

namespace lseg::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  /// 0 binds an ephemeral port.
  int port = 8080;
  std::size_t max_upload_bytes = 64u << 20;
  std::chrono::seconds job_ttl{3600};
  /// Directory served at "/" (the web client); empty disables it.
  std::filesystem::path static_dir;
  /// Accept patches other than 128 x 128.
  bool any_size = false;
  double overlay_alpha = 0.5;
};

/// Response of an API call, independent of the transport.
struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Transport-independent implementation of the JSON API. Every method is
/// safe to call concurrently.
class Api {
 public:
  Api(std::shared_ptr<const Registry> registry, const ServiceConfig& config,
      JobStore::Clock clock = &std::chrono::steady_clock::now);

  /// GET /api/models
  ApiResponse models() const;
  /// POST /api/predict
  ApiResponse predict(const std::string& upload, const std::string& model_id,
                      const std::optional<std::string>& threshold) const;
  /// POST /api/predict-all
  ApiResponse predict_all(const std::string& upload, const std::optional<std::string>& threshold) const;
  /// GET /api/export/{job}/{model} and GET /api/export/{job}/{model}.json
  ApiResponse export_payload(const std::string& job, const std::string& model) const;
  ApiResponse export_sidecar(const std::string& job, const std::string& model) const;

  JobStore& jobs() noexcept { return *jobs_; }
  const ServiceConfig& config() const noexcept { return config_; }

 private:
  std::shared_ptr<const Registry> registry_;
  ServiceConfig config_;
  std::unique_ptr<JobStore> jobs_;
};

/// HTTP/1.1 front end for Api.
class Server {
 public:
  Server(std::shared_ptr<const Registry> registry, ServiceConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the socket and returns the port actually bound.
  int bind();
  /// Serves until stop(). Requires bind().
  void run();
  /// bind() plus run() on a background thread.
  int start();
  void stop();

  Api& api() noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lseg::service
