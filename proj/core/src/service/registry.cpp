#include "lseg/service/registry.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <stdexcept>

namespace lseg::service {

Registry::Registry(std::vector<LoadedEntry> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const LoadedEntry& a, const LoadedEntry& b) { return a.entry.id < b.entry.id; });
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    if (entries_[i].entry.id == entries_[i - 1].entry.id) {
      throw std::invalid_argument("registry: duplicate model id '" + entries_[i].entry.id + "'");
    }
  }
}

Registry Registry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("registry: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("registry: " + path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("models") || !j["models"].is_array()) {
    throw std::invalid_argument("registry: expected an object with a \"models\" array");
  }
  std::vector<LoadedEntry> entries;
  for (const auto& m : j["models"]) {
    LoadedEntry le;
    try {
      le.entry.id = m.at("id").get<std::string>();
      le.entry.name = m.value("name", le.entry.id);
      le.entry.description = m.value("description", "");
      le.entry.checkpoint = m.at("checkpoint").get<std::string>();
      le.entry.architecture = m.value("architecture", "");
      if (m.contains("f1") && !m["f1"].is_null()) le.entry.f1 = m["f1"].get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(std::string("registry: malformed entry: ") + e.what());
    }
    if (le.entry.checkpoint.is_relative()) le.entry.checkpoint = path.parent_path() / le.entry.checkpoint;
    try {
      le.checkpoint = std::make_shared<const models::Checkpoint>(models::load_checkpoint(le.entry.checkpoint));
      if (le.entry.architecture.empty()) {
        le.entry.architecture = models::to_string(le.checkpoint->model.spec().architecture);
      }
    } catch (const std::exception& e) {
      le.error = e.what();
    }
    entries.push_back(std::move(le));
  }
  return Registry(std::move(entries));
}

const LoadedEntry* Registry::find(const std::string& id) const {
  const auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                                   [](const LoadedEntry& e, const std::string& key) { return e.entry.id < key; });
  return it != entries_.end() && it->entry.id == id ? &*it : nullptr;
}

}  // namespace lseg::service
