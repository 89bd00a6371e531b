#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lseg/data/augment.hpp"
#include "lseg/data/hdf5_io.hpp"
#include "lseg/data/normalize.hpp"
#include "lseg/rng.hpp"

namespace lseg::data {

inline constexpr const char* kTrainSplit = "train";
inline constexpr const char* kValidationSplit = "validation";
inline constexpr const char* kTestSplit = "test";

struct ManifestEntry {
  std::string id;
  std::filesystem::path image;
  /// Separate mask file; absent when the mask lives in the image file.
  std::optional<std::filesystem::path> mask;
};

/// Split name -> patch files. Relative paths resolve against `root`, the
/// directory holding the manifest file.
struct Manifest {
  std::string dataset;
  std::filesystem::path root;
  std::map<std::string, std::vector<ManifestEntry>> splits;

  /// "val" is accepted as an alias of "validation".
  const std::vector<ManifestEntry>& split(const std::string& name) const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Throws DataError(kBadManifest) when an id appears in two splits or twice
/// in one split. Returns warnings for split sizes that differ from the
/// published Landslide4Sense counts (only when dataset == "landslide4sense").
std::vector<std::string> validate_manifest(const Manifest& manifest);

std::vector<PatchSample> load_split(const Manifest& manifest, const std::string& split, const LoadOptions& options = {},
                                    const PatchKeys& keys = {});

/// A model-ready patch: normalized C x H x W input plus its mask.
struct Example {
  std::string id;
  Tensor input;
  std::vector<std::uint8_t> mask;
};

/// Assembles channels and normalizes. Samples without masks are rejected
/// when `require_masks` is set.
std::vector<Example> prepare_examples(std::span<const PatchSample> samples, const ChannelConfig& cfg,
                                      const BandStats& stats, bool require_masks = true);

struct Batch {
  Tensor images;  // N x C x H x W
  Tensor masks;   // N x 1 x H x W, values in {0, 1}
  std::vector<std::string> ids;
};

/// Stacks the listed examples, optionally applying one augmentation each.
Batch make_batch(std::span<const Example> examples, std::span<const std::size_t> indices,
                 std::span<const Augmentation> augmentations = {});

/// Deterministic batch order over a split. Without shuffling, examples are
/// visited in ascending id order; with shuffling the id-sorted order is
/// permuted by `rng`. The final batch may be short.
class BatchIterator {
 public:
  BatchIterator(std::span<const Example> examples, std::size_t batch_size, bool shuffle, Rng& rng);

  bool done() const noexcept { return cursor_ >= order_.size(); }
  /// Indices (into the example span) of the next batch.
  std::span<const std::size_t> next_indices();
  Batch next();
  std::size_t batch_count() const noexcept { return (order_.size() + batch_size_ - 1) / batch_size_; }

 private:
  std::span<const Example> examples_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace lseg::data
