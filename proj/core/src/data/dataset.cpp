#include "lseg/data/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>

namespace lseg::data {

namespace {

struct ExpectedCount {
  const char* split;
  std::size_t count;
};

// Published Landslide4Sense split sizes.
constexpr ExpectedCount kExpected[] = {{kTrainSplit, 3799}, {kValidationSplit, 245}, {kTestSplit, 800}};

std::string canonical_split(const std::string& name) { return name == "val" ? kValidationSplit : name; }

[[noreturn]] void bad_manifest(const std::string& msg) { throw DataError(DataError::Kind::kBadManifest, msg); }

}  // namespace

const std::vector<ManifestEntry>& Manifest::split(const std::string& name) const {
  const auto it = splits.find(canonical_split(name));
  if (it == splits.end()) {
    throw DataError(DataError::Kind::kEmptySplit, "manifest has no split named '" + name + "'");
  }
  return it->second;
}

std::filesystem::path Manifest::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : root / p;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Kind::kUnreadable, path.string() + ": cannot open manifest");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    bad_manifest(path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("splits") || !j["splits"].is_object()) {
    bad_manifest(path.string() + ": expected an object with a \"splits\" object");
  }
  Manifest m;
  m.dataset = j.value("dataset", "");
  m.root = path.parent_path();
  for (const auto& [name, entries] : j["splits"].items()) {
    if (!entries.is_array()) bad_manifest(path.string() + ": split '" + name + "' must be an array");
    auto& out = m.splits[canonical_split(name)];
    for (const auto& e : entries) {
      ManifestEntry entry;
      if (e.is_string()) {
        entry.image = e.get<std::string>();
        entry.id = entry.image.stem().string();
      } else if (e.is_object() && e.contains("image")) {
        entry.image = e["image"].get<std::string>();
        entry.id = e.value("id", entry.image.stem().string());
        if (e.contains("mask")) entry.mask = std::filesystem::path(e["mask"].get<std::string>());
      } else {
        bad_manifest(path.string() + ": entries of split '" + name + "' need an \"image\" path");
      }
      out.push_back(std::move(entry));
    }
  }
  return m;
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  nlohmann::ordered_json j;
  if (!manifest.dataset.empty()) j["dataset"] = manifest.dataset;
  j["splits"] = nlohmann::ordered_json::object();
  for (const auto& [name, entries] : manifest.splits) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
      nlohmann::ordered_json item{{"id", e.id}, {"image", e.image.generic_string()}};
      if (e.mask) item["mask"] = e.mask->generic_string();
      arr.push_back(std::move(item));
    }
    j["splits"][name] = std::move(arr);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::kUnreadable, path.string() + ": cannot write manifest");
  out << j.dump(2) << '\n';
}

std::vector<std::string> validate_manifest(const Manifest& manifest) {
  std::map<std::string, std::string> owner;
  for (const auto& [name, entries] : manifest.splits) {
    for (const auto& e : entries) {
      const auto [it, inserted] = owner.emplace(e.id, name);
      if (!inserted) {
        bad_manifest("patch '" + e.id + "' appears in split '" + it->second + "' and split '" + name + "'");
      }
    }
  }
  std::vector<std::string> warnings;
  if (manifest.dataset != "landslide4sense") return warnings;
  for (const auto& exp : kExpected) {
    const auto it = manifest.splits.find(exp.split);
    const std::size_t have = it == manifest.splits.end() ? 0 : it->second.size();
    if (have != exp.count) {
      warnings.push_back("split '" + std::string(exp.split) + "' has " + std::to_string(have) + " patches, expected " +
                         std::to_string(exp.count));
    }
  }
  return warnings;
}

std::vector<PatchSample> load_split(const Manifest& manifest, const std::string& split, const LoadOptions& options,
                                    const PatchKeys& keys) {
  const auto& entries = manifest.split(split);
  if (entries.empty()) throw DataError(DataError::Kind::kEmptySplit, "split '" + split + "' is empty");
  std::vector<PatchSample> samples;
  samples.reserve(entries.size());
  for (const auto& e : entries) {
    auto s = load_patch(manifest.resolve(e.image), keys, options);
    s.id = e.id;
    if (e.mask) attach_mask(s, manifest.resolve(*e.mask), keys);
    if (options.require_mask && !s.mask) {
      throw DataError(DataError::Kind::kMissingKey, "patch '" + e.id + "' has no mask");
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<Example> prepare_examples(std::span<const PatchSample> samples, const ChannelConfig& cfg,
                                      const BandStats& stats, bool require_masks) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (require_masks && !s.mask) throw DataError(DataError::Kind::kMissingKey, "patch '" + s.id + "' has no mask");
    Example e;
    e.id = s.id;
    e.input = normalize(assemble_channels(s, cfg), stats);
    if (s.mask) e.mask = *s.mask;
    out.push_back(std::move(e));
  }
  return out;
}

Batch make_batch(std::span<const Example> examples, std::span<const std::size_t> indices,
                 std::span<const Augmentation> augmentations) {
  if (indices.empty()) throw DataError(DataError::Kind::kEmptySplit, "cannot build an empty batch");
  if (!augmentations.empty() && augmentations.size() != indices.size()) {
    throw ShapeError("make_batch: one augmentation per example required");
  }
  const auto& first = examples[indices[0]].input;
  const Augmentation none{};
  const Tensor probe = augment(first, augmentations.empty() ? none : augmentations[0]);
  const std::size_t c = probe.dim(0), h = probe.dim(1), w = probe.dim(2), plane = h * w;
  Batch batch;
  batch.images = Tensor({indices.size(), c, h, w});
  batch.masks = Tensor({indices.size(), 1, h, w});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& ex = examples[indices[k]];
    const Augmentation& op = augmentations.empty() ? none : augmentations[k];
    const Tensor img = augment(ex.input, op);
    if (img.shape() != probe.shape()) {
      throw ShapeError("make_batch: example '" + ex.id + "' has shape " + lseg::to_string(img.shape()) + ", expected " +
                       lseg::to_string(probe.shape()));
    }
    std::copy(img.values().begin(), img.values().end(), batch.images.data() + k * c * plane);
    if (ex.mask.size() != plane) {
      throw DataError(DataError::Kind::kMissingKey, "example '" + ex.id + "' has no mask of matching extent");
    }
    const Tensor m = augment(Tensor({1, ex.input.dim(1), ex.input.dim(2)},
                                    std::vector<float>(ex.mask.begin(), ex.mask.end())),
                             op);
    std::copy(m.values().begin(), m.values().end(), batch.masks.data() + k * plane);
    batch.ids.push_back(ex.id);
  }
  return batch;
}

BatchIterator::BatchIterator(std::span<const Example> examples, std::size_t batch_size, bool shuffle, Rng& rng)
    : examples_(examples), batch_size_(batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  if (examples.empty()) throw DataError(DataError::Kind::kEmptySplit, "cannot iterate an empty split");
  order_.resize(examples.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(),
                   [&](std::size_t a, std::size_t b) { return examples[a].id < examples[b].id; });
  if (shuffle) rng.shuffle(std::span<std::size_t>(order_));
}

std::span<const std::size_t> BatchIterator::next_indices() {
  const std::size_t begin = cursor_;
  const std::size_t end = std::min(order_.size(), begin + batch_size_);
  cursor_ = end;
  return std::span<const std::size_t>(order_).subspan(begin, end - begin);
}

Batch BatchIterator::next() { return make_batch(examples_, next_indices()); }

}  // namespace lseg::data
