#include "lseg/service/job_store.hpp"

#include <bit>
#include <cstdio>

namespace lseg::service {

JobStore::JobStore(std::chrono::seconds ttl, Clock clock) : ttl_(ttl), clock_(std::move(clock)) {}

JobStore::~JobStore() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  stop_cv_.notify_all();
  if (sweeper_.joinable()) sweeper_.join();
}

void JobStore::put(const std::string& job, const std::string& model, ExportArtifact artifact) {
  std::lock_guard lock(mutex_);
  auto& j = jobs_[job];
  j.expires = clock_() + ttl_;
  j.models[model] = std::move(artifact);
}

std::optional<ExportArtifact> JobStore::get(const std::string& job, const std::string& model) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(job);
  if (it == jobs_.end() || clock_() >= it->second.expires) return std::nullopt;
  const auto m = it->second.models.find(model);
  if (m == it->second.models.end()) return std::nullopt;
  return m->second;
}

std::size_t JobStore::sweep() {
  std::lock_guard lock(mutex_);
  const auto now = clock_();
  std::size_t removed = 0;
  for (auto it = jobs_.begin(); it != jobs_.end();) {
    if (now >= it->second.expires) {
      it = jobs_.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  return removed;
}

std::size_t JobStore::job_count() const {
  std::lock_guard lock(mutex_);
  return jobs_.size();
}

void JobStore::start_sweeper(std::chrono::milliseconds period) {
  if (sweeper_.joinable()) return;
  sweeper_ = std::thread([this, period] {
    std::unique_lock lock(mutex_);
    while (!stopping_) {
      if (stop_cv_.wait_for(lock, period, [this] { return stopping_; })) break;
      lock.unlock();
      sweep();
      lock.lock();
    }
  });
}

std::string job_id_for(const std::string& upload, double threshold) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (unsigned char c : upload) mix(c);
  const auto bits = std::bit_cast<std::uint64_t>(threshold);
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>((bits >> (8 * i)) & 0xFF));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lseg::service
