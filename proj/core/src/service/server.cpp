#include "lseg/service/server.hpp"

#include <httplib.h>

#include <charconv>
#include <cmath>
#include <nlohmann/json.hpp>
#include <span>
#include <stdexcept>
#include <thread>

#include "lseg/data/hdf5_io.hpp"

namespace lseg::service {
namespace {

using nlohmann::ordered_json;

ApiResponse json_response(int status, const ordered_json& body) { return {status, "application/json", body.dump()}; }

ApiResponse error_response(int status, const std::string& code, const std::string& detail = {}) {
  ordered_json j;
  j["error"] = code;
  if (!detail.empty()) j["detail"] = detail;
  return json_response(status, j);
}

const char* status_code_name(int status) {
  switch (status) {
    case 400: return "bad_request";
    case 404: return "not_found";
    case 405: return "method_not_allowed";
    case 413: return "payload_too_large";
    case 414: return "uri_too_long";
    case 415: return "unsupported_media_type";
    default: return status >= 500 ? "internal_error" : "http_error";
  }
}

std::string base64_png(const Image& image) {
  const auto png = encode_png(image);
  return httplib::detail::base64_encode(std::string(png.begin(), png.end()));
}

// Parses an optional threshold; throws invalid_argument unless it is a
// number in [0, 1].
std::optional<double> parse_threshold(const std::optional<std::string>& text) {
  if (!text || text->empty()) return std::nullopt;
  double value = 0.0;
  const char* first = text->data();
  const char* last = first + text->size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value) || value < 0.0 || value > 1.0) {
    throw std::invalid_argument("threshold must be a number in [0, 1], got '" + *text + "'");
  }
  return value;
}

data::PatchSample parse_upload(const std::string& upload, bool any_size) {
  if (upload.empty()) throw data::DataError(data::DataError::Kind::kUnreadable, "upload is empty");
  data::LoadOptions options;
  options.any_size = any_size;
  const auto bytes = std::as_bytes(std::span(upload.data(), upload.size()));
  return data::load_patch_from_memory(bytes, "upload", {}, options);
}

ApiResponse malformed(const data::DataError& e) {
  ordered_json j;
  j["error"] = "malformed_patch";
  j["kind"] = data::to_string(e.kind());
  j["detail"] = e.what();
  return json_response(422, j);
}

ApiResponse malformed(const std::string& kind, const std::string& detail) {
  ordered_json j;
  j["error"] = "malformed_patch";
  j["kind"] = kind;
  j["detail"] = detail;
  return json_response(422, j);
}

std::string export_url(const std::string& job, const std::string& model) { return "/api/export/" + job + "/" + model; }

ordered_json result_json(const LoadedEntry& le, const std::string& job, const Prediction& p) {
  ordered_json j;
  j["job_id"] = job;
  j["model_id"] = le.entry.id;
  j["model_name"] = le.entry.name;
  j["architecture"] = le.entry.architecture;
  j["threshold"] = p.threshold;
  j["shape"] = {p.height, p.width};
  j["landslide_fraction"] = p.landslide_fraction;
  j["images"] = {{"rgb", base64_png(p.rgb)}, {"mask", base64_png(p.mask_image)}, {"overlay", base64_png(p.overlay)}};
  const auto url = export_url(job, le.entry.id);
  j["export"] = {{"payload", url}, {"sidecar", url + ".json"}};
  return j;
}

}  // namespace

Api::Api(std::shared_ptr<const Registry> registry, const ServiceConfig& config, JobStore::Clock clock)
    : registry_(registry ? std::move(registry) : std::make_shared<const Registry>()),
      config_(config),
      jobs_(std::make_unique<JobStore>(config.job_ttl, std::move(clock))) {}

ApiResponse Api::models() const {
  ordered_json list = ordered_json::array();
  for (const auto& le : registry_->entries()) {
    ordered_json j;
    j["id"] = le.entry.id;
    j["name"] = le.entry.name;
    j["description"] = le.entry.description;
    j["architecture"] = le.entry.architecture;
    j["f1"] = le.entry.f1 ? ordered_json(*le.entry.f1) : ordered_json(nullptr);
    list.push_back(std::move(j));
  }
  return json_response(200, list);
}

ApiResponse Api::predict(const std::string& upload, const std::string& model_id,
                         const std::optional<std::string>& threshold_text) const {
  const LoadedEntry* le = registry_->find(model_id);
  if (!le) return error_response(404, "unknown_model", model_id.empty() ? "" : "no model with id '" + model_id + "'");
  std::optional<double> threshold;
  try {
    threshold = parse_threshold(threshold_text);
  } catch (const std::invalid_argument& e) {
    return error_response(400, "invalid_threshold", e.what());
  }
  data::PatchSample sample;
  try {
    sample = parse_upload(upload, config_.any_size);
  } catch (const data::DataError& e) {
    return malformed(e);
  }
  if (!le->available()) return error_response(503, "model_unavailable", le->error);

  Prediction p;
  try {
    p = service::predict(*le->checkpoint, sample, le->entry.id, threshold, nullptr, config_.overlay_alpha);
  } catch (const data::DataError& e) {
    return malformed(e);
  } catch (const ShapeError& e) {
    return malformed("incompatible_shape", e.what());
  }
  const auto job = job_id_for(upload, threshold.value_or(-1.0));
  jobs_->put(job, le->entry.id, {p.probability_payload(), p.sidecar().dump()});
  return json_response(200, result_json(*le, job, p));
}

ApiResponse Api::predict_all(const std::string& upload, const std::optional<std::string>& threshold_text) const {
  std::optional<double> threshold;
  try {
    threshold = parse_threshold(threshold_text);
  } catch (const std::invalid_argument& e) {
    return error_response(400, "invalid_threshold", e.what());
  }
  data::PatchSample sample;
  try {
    sample = parse_upload(upload, config_.any_size);
  } catch (const data::DataError& e) {
    return malformed(e);
  }
  const auto job = job_id_for(upload, threshold.value_or(-1.0));
  InputCache cache(sample);
  ordered_json results = ordered_json::array();
  for (const auto& le : registry_->entries()) {
    ordered_json failure;
    failure["model_id"] = le.entry.id;
    if (!le.available()) {
      failure["error"] = "model_unavailable";
      failure["detail"] = le.error;
      results.push_back(std::move(failure));
      continue;
    }
    try {
      const auto p = service::predict(*le.checkpoint, sample, le.entry.id, threshold, &cache, config_.overlay_alpha);
      jobs_->put(job, le.entry.id, {p.probability_payload(), p.sidecar().dump()});
      results.push_back(result_json(le, job, p));
    } catch (const std::exception& e) {
      failure["error"] = dynamic_cast<const ShapeError*>(&e) || dynamic_cast<const data::DataError*>(&e)
                             ? "malformed_patch"
                             : "prediction_failed";
      failure["detail"] = e.what();
      results.push_back(std::move(failure));
    }
  }
  return json_response(200, results);
}

ApiResponse Api::export_payload(const std::string& job, const std::string& model) const {
  const auto artifact = jobs_->get(job, model);
  if (!artifact) return error_response(404, "unknown_job");
  return {200, "application/octet-stream", std::string(artifact->payload.begin(), artifact->payload.end())};
}

ApiResponse Api::export_sidecar(const std::string& job, const std::string& model) const {
  const auto artifact = jobs_->get(job, model);
  if (!artifact) return error_response(404, "unknown_job");
  return {200, "application/json", artifact->sidecar};
}

struct Server::Impl {
  Impl(std::shared_ptr<const Registry> registry, ServiceConfig cfg) : config(std::move(cfg)), api(registry, config) {}

  ServiceConfig config;
  Api api;
  httplib::Server http;
  std::thread thread;
  int port = -1;
};

namespace {

void send(httplib::Response& res, const ApiResponse& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

std::optional<std::string> field(const httplib::Request& req, const std::string& name) {
  if (req.has_file(name)) return req.get_file_value(name).content;
  if (req.has_param(name)) return req.get_param_value(name);
  return std::nullopt;
}

std::string upload_of(const httplib::Request& req) {
  return req.has_file("file") ? req.get_file_value("file").content : std::string();
}

}  // namespace

Server::Server(std::shared_ptr<const Registry> registry, ServiceConfig config)
    : impl_(std::make_unique<Impl>(std::move(registry), std::move(config))) {
  auto& http = impl_->http;
  Api& api = impl_->api;
  http.set_payload_max_length(impl_->config.max_upload_bytes);

  http.Get("/api/models", [&api](const httplib::Request&, httplib::Response& res) { send(res, api.models()); });

  http.Post("/api/predict", [&api](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_file("file")) return send(res, malformed("missing_file", "multipart field 'file' is required"));
    send(res, api.predict(upload_of(req), field(req, "model_id").value_or(""), field(req, "threshold")));
  });

  http.Post("/api/predict-all", [&api](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_file("file")) return send(res, malformed("missing_file", "multipart field 'file' is required"));
    send(res, api.predict_all(upload_of(req), field(req, "threshold")));
  });

  http.Get(R"(/api/export/([^/]+)/([^/]+))", [&api](const httplib::Request& req, httplib::Response& res) {
    const std::string job = req.matches[1];
    std::string model = req.matches[2];
    constexpr std::string_view kSuffix = ".json";
    if (model.size() > kSuffix.size() && model.ends_with(kSuffix)) {
      const auto sidecar = api.export_sidecar(job, model.substr(0, model.size() - kSuffix.size()));
      if (sidecar.status == 200) return send(res, sidecar);
    }
    send(res, api.export_payload(job, model));
  });

  if (!impl_->config.static_dir.empty()) {
    if (!http.set_mount_point("/", impl_->config.static_dir.string())) {
      throw std::invalid_argument("static directory not found: " + impl_->config.static_dir.string());
    }
  }

  http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    ordered_json j;
    j["error"] = status_code_name(res.status);
    res.set_content(j.dump(), "application/json");
    return httplib::Server::HandlerResponse::Handled;
  });

  http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string detail = "unknown exception";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      detail = e.what();
    } catch (...) {
    }
    send(res, error_response(500, "internal_error", detail));
  });
}

Server::~Server() { stop(); }

int Server::bind() {
  if (impl_->port >= 0) return impl_->port;
  const auto& cfg = impl_->config;
  if (cfg.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(cfg.host);
  } else if (impl_->http.bind_to_port(cfg.host, cfg.port)) {
    impl_->port = cfg.port;
  }
  if (impl_->port < 0) throw std::runtime_error("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
  impl_->api.jobs().start_sweeper(std::chrono::seconds(30));
  return impl_->port;
}

void Server::run() {
  if (impl_->port < 0) throw std::logic_error("Server::run before bind");
  impl_->http.listen_after_bind();
}

int Server::start() {
  const int port = bind();
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return port;
}

void Server::stop() {
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

Api& Server::api() noexcept { return impl_->api; }

}  // namespace lseg::service
