#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lseg/data/normalize.hpp"
#include "lseg/models/model.hpp"

namespace lseg::models {

inline constexpr char kCheckpointMagic[4] = {'L', 'S', 'E', 'G'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Container layout (all integers little-endian):
///
///   bytes 0-3   "LSEG"
///   bytes 4-7   u32 format version
///   bytes 8-15  u64 header length L
///   next L      UTF-8 JSON header
///   remainder   raw tensor payloads
///
/// The header holds "model" (ModelSpec), "channels" (ChannelConfig),
/// "band_stats", "training" (free-form metadata) and "tensors", a list of
/// {name, dtype, shape, offset, nbytes} with offsets relative to the start
/// of the payload region. Only dtype "f32" is written.
class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kVersionMismatch, kTruncated, kBadHeader, kShapeMismatch, kMissingTensor, kOverlap };

  CheckpointError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

const char* to_string(CheckpointError::Kind kind) noexcept;

struct Checkpoint {
  Model<float> model;
  data::ChannelConfig channels;
  data::BandStats band_stats;
  nlohmann::json training = nlohmann::json::object();
};

std::vector<std::byte> save_checkpoint_bytes(Model<float>& model, const data::ChannelConfig& channels,
                                             const data::BandStats& stats,
                                             const nlohmann::json& training = nlohmann::json::object());
void save_checkpoint(const std::filesystem::path& path, Model<float>& model, const data::ChannelConfig& channels,
                     const data::BandStats& stats, const nlohmann::json& training = nlohmann::json::object());

/// Rebuilds the model from the stored spec and fills every tensor from the
/// manifest. Each failure mode raises a CheckpointError of its own kind.
Checkpoint load_checkpoint_bytes(std::span<const std::byte> bytes);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Header only, without rebuilding the model.
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

}  // namespace lseg::models
