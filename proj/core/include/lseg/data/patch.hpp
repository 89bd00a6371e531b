#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lseg/tensor.hpp"

namespace lseg::data {

inline constexpr std::size_t kPatchSize = 128;
inline constexpr std::size_t kBandCount = 14;

enum class Provenance { kReal, kSynthetic };

/// One image patch as stored on disk: image is H x W x C (band-last), mask is
/// H*W row-major with values in {0, 1}.
struct PatchSample {
  std::string id;
  Tensor image{Shape{0, 0, 0}};
  std::optional<std::vector<std::uint8_t>> mask;
  Provenance provenance = Provenance::kReal;
  /// Number of NaN/Inf image elements replaced by 0 during ingestion.
  std::size_t cleaned = 0;

  std::size_t height() const { return image.dim(0); }
  std::size_t width() const { return image.dim(1); }
  std::size_t bands() const { return image.dim(2); }
  /// Fraction of mask pixels equal to 1; 0 when there is no mask.
  double landslide_fraction() const;
};

class DataError : public std::runtime_error {
 public:
  enum class Kind {
    kUnreadable,
    kMissingKey,
    kWrongRank,
    kWrongChannelCount,
    kWrongSize,
    kInvalidMask,
    kBadIndex,
    kBadManifest,
    kEmptySplit,
  };

  DataError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

const char* to_string(DataError::Kind kind) noexcept;

}  // namespace lseg::data
