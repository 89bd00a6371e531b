#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lseg/models/checkpoint.hpp"

namespace lseg::service {

struct RegistryEntry {
  std::string id;
  std::string name;
  std::string description;
  std::filesystem::path checkpoint;
  std::string architecture;
  /// Reported F1, informational only.
  std::optional<double> f1;
};

/// A registry entry and, when its checkpoint loaded, the model. Entries whose
/// checkpoint fails to load stay listed with the failure reason so callers can
/// report them per entry.
struct LoadedEntry {
  RegistryEntry entry;
  std::shared_ptr<const models::Checkpoint> checkpoint;
  std::string error;

  bool available() const noexcept { return checkpoint != nullptr; }
};

/// Immutable after construction; entries are sorted by id.
class Registry {
 public:
  Registry() = default;
  explicit Registry(std::vector<LoadedEntry> entries);

  /// Parses {"models":[{id, name, description, checkpoint, architecture,
  /// f1?}]}. Relative checkpoint paths resolve against the registry file's
  /// directory. Throws std::invalid_argument on malformed JSON or duplicate
  /// ids; checkpoint failures are recorded on the entry instead.
  static Registry load(const std::filesystem::path& path);

  const std::vector<LoadedEntry>& entries() const noexcept { return entries_; }
  const LoadedEntry* find(const std::string& id) const;
  bool empty() const noexcept { return entries_.empty(); }

 private:
  std::vector<LoadedEntry> entries_;
};

}  // namespace lseg::service
