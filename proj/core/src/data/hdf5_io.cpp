#include "lseg/data/hdf5_io.hpp"

#include <hdf5.h>
#include <hdf5_hl.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <vector>

namespace lseg::data {

namespace {

// The serial HDF5 library is not thread-safe.
std::mutex& hdf5_mutex() {
  static std::mutex m;
  return m;
}

class Handle {
 public:
  using Closer = herr_t (*)(hid_t);
  Handle(hid_t id, Closer closer) : id_(id), closer_(closer) {}
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() {
    if (id_ >= 0) closer_(id_);
  }
  hid_t get() const { return id_; }
  bool valid() const { return id_ >= 0; }

 private:
  hid_t id_;
  Closer closer_;
};

void silence_hdf5() {
  static std::once_flag once;
  std::call_once(once, [] { H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr); });
}

bool has_dataset(hid_t file, const std::string& key) {
  return H5Lexists(file, key.c_str(), H5P_DEFAULT) > 0;
}

std::vector<hsize_t> dataset_extents(hid_t dset) {
  Handle space(H5Dget_space(dset), H5Sclose);
  const int rank = H5Sget_simple_extent_ndims(space.get());
  std::vector<hsize_t> dims(rank > 0 ? rank : 0);
  if (rank > 0) H5Sget_simple_extent_dims(space.get(), dims.data(), nullptr);
  return dims;
}

std::vector<std::uint8_t> read_mask(hid_t file, const std::string& key, const std::string& where, std::size_t h,
                                    std::size_t w) {
  Handle dset(H5Dopen2(file, key.c_str(), H5P_DEFAULT), H5Dclose);
  if (!dset.valid()) throw DataError(DataError::Kind::kUnreadable, where + ": cannot open dataset '" + key + "'");
  auto dims = dataset_extents(dset.get());
  // Some exporters store masks as H x W x 1.
  if (dims.size() == 3 && dims[2] == 1) dims.pop_back();
  if (dims.size() != 2) {
    throw DataError(DataError::Kind::kWrongRank,
                    where + ": mask '" + key + "' must be rank 2, got rank " + std::to_string(dims.size()));
  }
  if (dims[0] != h || dims[1] != w) {
    throw DataError(DataError::Kind::kWrongSize, where + ": mask extent " + std::to_string(dims[0]) + "x" +
                                                     std::to_string(dims[1]) + " does not match image " +
                                                     std::to_string(h) + "x" + std::to_string(w));
  }
  std::vector<double> raw(h * w);
  if (H5Dread(dset.get(), H5T_NATIVE_DOUBLE, H5S_ALL, H5S_ALL, H5P_DEFAULT, raw.data()) < 0) {
    throw DataError(DataError::Kind::kUnreadable, where + ": failed to read mask '" + key + "'");
  }
  std::vector<std::uint8_t> mask(h * w);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != 0.0 && raw[i] != 1.0) {
      throw DataError(DataError::Kind::kInvalidMask, where + ": mask value " + std::to_string(raw[i]) + " at pixel " +
                                                         std::to_string(i) + " is not 0 or 1");
    }
    mask[i] = raw[i] == 1.0 ? 1 : 0;
  }
  return mask;
}

PatchSample read_sample(hid_t file, const std::string& where, std::string id, const PatchKeys& keys,
                        const LoadOptions& options) {
  if (!has_dataset(file, keys.image)) {
    throw DataError(DataError::Kind::kMissingKey, where + ": missing dataset '" + keys.image + "'");
  }
  Handle dset(H5Dopen2(file, keys.image.c_str(), H5P_DEFAULT), H5Dclose);
  if (!dset.valid()) throw DataError(DataError::Kind::kUnreadable, where + ": cannot open dataset '" + keys.image + "'");
  const auto dims = dataset_extents(dset.get());
  if (dims.size() != 3) {
    throw DataError(DataError::Kind::kWrongRank, where + ": image '" + keys.image + "' must be rank 3 (HxWxC), got rank " +
                                                     std::to_string(dims.size()));
  }
  const std::size_t h = dims[0], w = dims[1], c = dims[2];
  if (c != options.expected_bands) {
    throw DataError(DataError::Kind::kWrongChannelCount, where + ": expected " + std::to_string(options.expected_bands) +
                                                             " bands, got " + std::to_string(c));
  }
  if (options.any_size) {
    const std::size_t m = std::max<std::size_t>(1, options.size_multiple);
    if (h == 0 || w == 0 || h % m != 0 || w % m != 0) {
      throw DataError(DataError::Kind::kWrongSize, where + ": extent " + std::to_string(h) + "x" + std::to_string(w) +
                                                       " is not a positive multiple of " + std::to_string(m));
    }
  } else if (h != kPatchSize || w != kPatchSize) {
    throw DataError(DataError::Kind::kWrongSize, where + ": expected 128x128 patch, got " + std::to_string(h) + "x" +
                                                     std::to_string(w) + " (use --any-size to accept other extents)");
  }

  PatchSample sample;
  sample.id = std::move(id);
  sample.image = Tensor({h, w, c});
  if (H5Dread(dset.get(), H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, sample.image.data()) < 0) {
    throw DataError(DataError::Kind::kUnreadable, where + ": failed to read image '" + keys.image + "'");
  }
  for (auto& v : sample.image.values()) {
    if (!std::isfinite(v)) {
      v = 0.0f;
      ++sample.cleaned;
    }
  }
  if (has_dataset(file, keys.mask)) {
    sample.mask = read_mask(file, keys.mask, where, h, w);
  } else if (options.require_mask) {
    throw DataError(DataError::Kind::kMissingKey, where + ": missing dataset '" + keys.mask + "'");
  }
  return sample;
}

}  // namespace

double PatchSample::landslide_fraction() const {
  if (!mask || mask->empty()) return 0.0;
  std::size_t ones = 0;
  for (auto v : *mask) ones += v;
  return static_cast<double>(ones) / static_cast<double>(mask->size());
}

const char* to_string(DataError::Kind kind) noexcept {
  switch (kind) {
    case DataError::Kind::kUnreadable: return "unreadable";
    case DataError::Kind::kMissingKey: return "missing_key";
    case DataError::Kind::kWrongRank: return "wrong_rank";
    case DataError::Kind::kWrongChannelCount: return "wrong_channel_count";
    case DataError::Kind::kWrongSize: return "wrong_size";
    case DataError::Kind::kInvalidMask: return "invalid_mask";
    case DataError::Kind::kBadIndex: return "bad_index";
    case DataError::Kind::kBadManifest: return "bad_manifest";
    case DataError::Kind::kEmptySplit: return "empty_split";
  }
  return "unknown";
}

PatchSample load_patch(const std::filesystem::path& path, const PatchKeys& keys, const LoadOptions& options) {
  std::lock_guard lock(hdf5_mutex());
  silence_hdf5();
  const std::string where = path.string();
  if (!std::filesystem::is_regular_file(path)) {
    throw DataError(DataError::Kind::kUnreadable, where + ": file does not exist");
  }
  if (H5Fis_hdf5(where.c_str()) <= 0) {
    throw DataError(DataError::Kind::kUnreadable, where + ": not an HDF5 file");
  }
  Handle file(H5Fopen(where.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
  if (!file.valid()) throw DataError(DataError::Kind::kUnreadable, where + ": cannot open HDF5 file");
  return read_sample(file.get(), where, path.stem().string(), keys, options);
}

PatchSample load_patch_from_memory(std::span<const std::byte> bytes, std::string id, const PatchKeys& keys,
                                   const LoadOptions& options) {
  std::lock_guard lock(hdf5_mutex());
  silence_hdf5();
  static constexpr char kSignature[8] = {'\x89', 'H', 'D', 'F', '\r', '\n', '\x1a', '\n'};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0) {
    throw DataError(DataError::Kind::kUnreadable, "upload: not an HDF5 file");
  }
  // With flags 0 H5LT works on its own copy, so the buffer is never written.
  void* buffer = const_cast<std::byte*>(bytes.data());
  Handle file(H5LTopen_file_image(buffer, bytes.size(), 0), H5Fclose);
  if (!file.valid()) throw DataError(DataError::Kind::kUnreadable, "upload: cannot open HDF5 image");
  return read_sample(file.get(), "upload", std::move(id), keys, options);
}

void attach_mask(PatchSample& sample, const std::filesystem::path& mask_path, const PatchKeys& keys) {
  std::lock_guard lock(hdf5_mutex());
  silence_hdf5();
  const std::string where = mask_path.string();
  if (!std::filesystem::is_regular_file(mask_path) || H5Fis_hdf5(where.c_str()) <= 0) {
    throw DataError(DataError::Kind::kUnreadable, where + ": not a readable HDF5 file");
  }
  Handle file(H5Fopen(where.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
  if (!file.valid()) throw DataError(DataError::Kind::kUnreadable, where + ": cannot open HDF5 file");
  if (!has_dataset(file.get(), keys.mask)) {
    throw DataError(DataError::Kind::kMissingKey, where + ": missing dataset '" + keys.mask + "'");
  }
  sample.mask = read_mask(file.get(), keys.mask, where, sample.height(), sample.width());
}

void write_patch(const std::filesystem::path& path, const PatchSample& sample, const PatchKeys& keys) {
  std::lock_guard lock(hdf5_mutex());
  silence_hdf5();
  if (sample.image.rank() != 3) throw DataError(DataError::Kind::kWrongRank, "write_patch: image must be HxWxC");
  const std::string where = path.string();
  Handle fcpl(H5Pcreate(H5P_FILE_CREATE), H5Pclose);
  Handle file(H5Fcreate(where.c_str(), H5F_ACC_TRUNC, fcpl.get(), H5P_DEFAULT), H5Fclose);
  if (!file.valid()) throw DataError(DataError::Kind::kUnreadable, where + ": cannot create HDF5 file");

  Handle dcpl(H5Pcreate(H5P_DATASET_CREATE), H5Pclose);
  H5Pset_obj_track_times(dcpl.get(), false);

  const hsize_t img_dims[3] = {sample.height(), sample.width(), sample.bands()};
  Handle img_space(H5Screate_simple(3, img_dims, nullptr), H5Sclose);
  Handle img(H5Dcreate2(file.get(), keys.image.c_str(), H5T_IEEE_F32LE, img_space.get(), H5P_DEFAULT, dcpl.get(),
                        H5P_DEFAULT),
             H5Dclose);
  if (!img.valid() ||
      H5Dwrite(img.get(), H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, sample.image.data()) < 0) {
    throw DataError(DataError::Kind::kUnreadable, where + ": failed to write image");
  }
  if (sample.mask) {
    const hsize_t mask_dims[2] = {sample.height(), sample.width()};
    Handle mask_space(H5Screate_simple(2, mask_dims, nullptr), H5Sclose);
    Handle mask(H5Dcreate2(file.get(), keys.mask.c_str(), H5T_STD_U8LE, mask_space.get(), H5P_DEFAULT, dcpl.get(),
                           H5P_DEFAULT),
                H5Dclose);
    if (!mask.valid() ||
        H5Dwrite(mask.get(), H5T_NATIVE_UINT8, H5S_ALL, H5S_ALL, H5P_DEFAULT, sample.mask->data()) < 0) {
      throw DataError(DataError::Kind::kUnreadable, where + ": failed to write mask");
    }
  }
}

}  // namespace lseg::data
