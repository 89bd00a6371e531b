#include "lseg/models/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace lseg::models {

namespace {

using Kind = CheckpointError::Kind;

constexpr std::size_t kPreambleSize = 16;

void put_le(std::vector<std::byte>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(std::span<const std::byte> in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
  return v;
}

void put_floats(std::vector<std::byte>& out, const Tensor& t) {
  const std::size_t at = out.size();
  out.resize(at + t.size() * sizeof(float));
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(t[i]);
    for (int b = 0; b < 4; ++b) out[at + i * 4 + b] = static_cast<std::byte>((bits >> (8 * b)) & 0xFF);
  }
}

void get_floats(std::span<const std::byte> in, Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(in, i * 4, 4)));
}

[[noreturn]] void fail(Kind kind, const std::string& msg) { throw CheckpointError(kind, "checkpoint: " + msg); }

struct ManifestItem {
  std::string name;
  Shape shape;
  std::uint64_t offset = 0;
  std::uint64_t nbytes = 0;
};

std::vector<ManifestItem> parse_manifest(const nlohmann::json& header, std::uint64_t payload_size) {
  if (!header.contains("tensors") || !header["tensors"].is_array()) fail(Kind::kBadHeader, "header has no tensor list");
  std::vector<ManifestItem> items;
  for (const auto& t : header["tensors"]) {
    ManifestItem item;
    try {
      item.name = t.at("name").get<std::string>();
      if (t.at("dtype").get<std::string>() != "f32") {
        fail(Kind::kBadHeader, "tensor '" + item.name + "' has unsupported dtype " + t["dtype"].dump());
      }
      item.shape = t.at("shape").get<Shape>();
      item.offset = t.at("offset").get<std::uint64_t>();
      item.nbytes = t.at("nbytes").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      fail(Kind::kBadHeader, std::string("malformed tensor entry: ") + e.what());
    }
    if (item.offset > payload_size || item.nbytes > payload_size - item.offset) {
      fail(Kind::kTruncated, "payload of tensor '" + item.name + "' extends past the end of the file");
    }
    items.push_back(std::move(item));
  }
  std::vector<const ManifestItem*> by_offset;
  for (const auto& i : items) by_offset.push_back(&i);
  std::sort(by_offset.begin(), by_offset.end(), [](auto* a, auto* b) { return a->offset < b->offset; });
  for (std::size_t i = 1; i < by_offset.size(); ++i) {
    const auto* prev = by_offset[i - 1];
    if (prev->offset + prev->nbytes > by_offset[i]->offset) {
      fail(Kind::kOverlap, "payloads of '" + prev->name + "' and '" + by_offset[i]->name + "' overlap");
    }
  }
  return items;
}

}  // namespace

const char* to_string(CheckpointError::Kind kind) noexcept {
  switch (kind) {
    case Kind::kIo: return "io";
    case Kind::kBadMagic: return "bad_magic";
    case Kind::kVersionMismatch: return "version_mismatch";
    case Kind::kTruncated: return "truncated";
    case Kind::kBadHeader: return "bad_header";
    case Kind::kShapeMismatch: return "shape_mismatch";
    case Kind::kMissingTensor: return "missing_tensor";
    case Kind::kOverlap: return "overlap";
  }
  return "unknown";
}

std::vector<std::byte> save_checkpoint_bytes(Model<float>& model, const data::ChannelConfig& channels,
                                             const data::BandStats& stats, const nlohmann::json& training) {
  nlohmann::ordered_json header;
  header["model"] = nlohmann::json(model.spec());
  header["channels"] = nlohmann::json(channels);
  header["band_stats"] = nlohmann::json(stats);
  header["training"] = training;
  auto tensors = nlohmann::ordered_json::array();
  std::vector<std::byte> payload;
  for (const auto& p : model.parameters()) {
    const std::uint64_t offset = payload.size();
    put_floats(payload, *p.value);
    tensors.push_back({{"name", p.name},
                       {"dtype", "f32"},
                       {"shape", p.value->shape()},
                       {"offset", offset},
                       {"nbytes", payload.size() - offset}});
  }
  header["tensors"] = std::move(tensors);
  const std::string text = header.dump();

  std::vector<std::byte> out;
  out.reserve(kPreambleSize + text.size() + payload.size());
  for (char c : kCheckpointMagic) out.push_back(static_cast<std::byte>(c));
  put_le(out, kCheckpointVersion, 4);
  put_le(out, text.size(), 8);
  for (char c : text) out.push_back(static_cast<std::byte>(c));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

void save_checkpoint(const std::filesystem::path& path, Model<float>& model, const data::ChannelConfig& channels,
                     const data::BandStats& stats, const nlohmann::json& training) {
  const auto bytes = save_checkpoint_bytes(model, channels, stats, training);
  // Write to a sibling and rename so readers never observe a partial file.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Kind::kIo, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(Kind::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(Kind::kIo, "cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

namespace {

struct Parsed {
  nlohmann::json header;
  std::span<const std::byte> payload;
};

Parsed parse(std::span<const std::byte> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) fail(Kind::kBadMagic, "bad magic");
  if (bytes.size() < kPreambleSize) fail(Kind::kTruncated, "file ends inside the preamble");
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != kCheckpointVersion) {
    fail(Kind::kVersionMismatch, "format version " + std::to_string(version) + ", this build reads version " +
                                     std::to_string(kCheckpointVersion));
  }
  const std::uint64_t header_len = get_le(bytes, 8, 8);
  if (header_len > bytes.size() - kPreambleSize) fail(Kind::kTruncated, "file ends inside the JSON header");
  const auto* text = reinterpret_cast<const char*>(bytes.data() + kPreambleSize);
  Parsed p;
  try {
    p.header = nlohmann::json::parse(text, text + header_len);
  } catch (const nlohmann::json::exception& e) {
    fail(Kind::kBadHeader, std::string("header is not valid JSON: ") + e.what());
  }
  if (!p.header.is_object()) fail(Kind::kBadHeader, "header is not a JSON object");
  p.payload = bytes.subspan(kPreambleSize + header_len);
  return p;
}

}  // namespace

Checkpoint load_checkpoint_bytes(std::span<const std::byte> bytes) {
  const Parsed parsed = parse(bytes);
  const auto& header = parsed.header;
  ModelSpec spec;
  data::ChannelConfig channels;
  data::BandStats stats;
  try {
    spec = header.at("model").get<ModelSpec>();
    channels = header.at("channels").get<data::ChannelConfig>();
    stats = header.at("band_stats").get<data::BandStats>();
    spec.validate();
  } catch (const std::exception& e) {
    fail(Kind::kBadHeader, std::string("invalid header: ") + e.what());
  }
  const auto items = parse_manifest(header, parsed.payload.size());
  std::map<std::string, const ManifestItem*> by_name;
  for (const auto& i : items) {
    if (!by_name.emplace(i.name, &i).second) fail(Kind::kBadHeader, "tensor '" + i.name + "' listed twice");
  }

  Rng rng(0);
  Checkpoint ck{build_model<float>(spec, rng), std::move(channels), std::move(stats),
                header.value("training", nlohmann::json::object())};
  const auto params = ck.model.parameters();
  for (const auto& p : params) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) fail(Kind::kMissingTensor, "tensor '" + p.name + "' missing from manifest");
    const ManifestItem& item = *it->second;
    if (item.shape != p.value->shape() || item.nbytes != p.value->size() * sizeof(float)) {
      fail(Kind::kShapeMismatch, "tensor '" + p.name + "' has manifest shape " + lseg::to_string(item.shape) + " (" +
                                     std::to_string(item.nbytes) + " bytes), model expects " +
                                     lseg::to_string(p.value->shape()));
    }
    get_floats(parsed.payload.subspan(item.offset, item.nbytes), *p.value);
  }
  if (by_name.size() != params.size()) {
    for (const auto& [name, _] : by_name) {
      const bool known = std::any_of(params.begin(), params.end(), [&](const auto& p) { return p.name == name; });
      if (!known) fail(Kind::kBadHeader, "manifest lists unknown tensor '" + name + "'");
    }
  }
  if (ck.channels.channel_count() != spec.in_channels) {
    fail(Kind::kBadHeader, "channel config selects " + std::to_string(ck.channels.channel_count()) +
                               " channels but the model takes " + std::to_string(spec.in_channels));
  }
  if (ck.band_stats.channel_count() != spec.in_channels) {
    fail(Kind::kBadHeader, "band stats describe " + std::to_string(ck.band_stats.channel_count()) +
                               " channels but the model takes " + std::to_string(spec.in_channels));
  }
  return ck;
}

namespace {

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Kind::kIo, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) fail(Kind::kIo, "cannot read " + path.string());
  return bytes;
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) { return load_checkpoint_bytes(read_file(path)); }

nlohmann::json read_checkpoint_header(const std::filesystem::path& path) { return parse(read_file(path)).header; }

}  // namespace lseg::models
