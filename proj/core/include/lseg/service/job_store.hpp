#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace lseg::service {

struct ExportArtifact {
  std::vector<std::uint8_t> payload;
  std::string sidecar;
};

/// In-memory export artifacts with time-to-live eviction. Thread-safe.
class JobStore {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  explicit JobStore(std::chrono::seconds ttl, Clock clock = &std::chrono::steady_clock::now);
  ~JobStore();
  JobStore(const JobStore&) = delete;
  JobStore& operator=(const JobStore&) = delete;

  /// Stores (or replaces) one model's artifact and restarts the job's TTL.
  void put(const std::string& job, const std::string& model, ExportArtifact artifact);
  /// nullopt when the job is unknown or expired.
  std::optional<ExportArtifact> get(const std::string& job, const std::string& model) const;
  /// Drops expired jobs; returns how many were removed.
  std::size_t sweep();
  std::size_t job_count() const;

  /// Runs sweep() every `period` on a background thread until destruction.
  void start_sweeper(std::chrono::milliseconds period);

 private:
  struct Job {
    std::chrono::steady_clock::time_point expires;
    std::map<std::string, ExportArtifact> models;
  };

  std::chrono::seconds ttl_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, Job> jobs_;

  std::thread sweeper_;
  std::condition_variable stop_cv_;
  bool stopping_ = false;
};

/// Content address of an upload: FNV-1a 64 over the bytes and the
/// threshold, as 16 lowercase hex digits.
std::string job_id_for(const std::string& upload, double threshold);

}  // namespace lseg::service
