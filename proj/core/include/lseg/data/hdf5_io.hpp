#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "lseg/data/patch.hpp"

namespace lseg::data {

struct PatchKeys {
  std::string image = "img";
  std::string mask = "mask";
};

struct LoadOptions {
  /// Accept extents other than 128x128 as long as both are multiples of
  /// `size_multiple` (typically 2^depth of the consuming model).
  bool any_size = false;
  std::size_t size_multiple = 1;
  std::size_t expected_bands = kBandCount;
  /// Fail if the mask dataset is absent.
  bool require_mask = false;
};

/// Reads an image (and, when present, a mask) from an HDF5 container.
///
/// The image dataset must be rank 3 (H x W x bands) and is converted to
/// float32; the mask must be H x W with values in {0, 1}. NaN/Inf image
/// values are replaced by 0 and counted in PatchSample::cleaned.
/// Throws DataError with a kind identifying the failure.
PatchSample load_patch(const std::filesystem::path& path, const PatchKeys& keys = {}, const LoadOptions& options = {});

/// Same as load_patch for an in-memory HDF5 file image (e.g. an upload).
PatchSample load_patch_from_memory(std::span<const std::byte> bytes, std::string id, const PatchKeys& keys = {},
                                   const LoadOptions& options = {});

/// Loads the mask of `mask_path` into an existing sample. Used for datasets
/// that keep images and masks in separate files.
void attach_mask(PatchSample& sample, const std::filesystem::path& mask_path, const PatchKeys& keys = {});

/// Writes image as float32 "img" and mask as uint8 "mask". Object timestamps
/// are disabled so equal samples produce byte-identical files.
void write_patch(const std::filesystem::path& path, const PatchSample& sample, const PatchKeys& keys = {});

}  // namespace lseg::data
