#pragma once

#include <nlohmann/json_fwd.hpp>
#include <stdexcept>
#include <string>
#include <vector>

namespace lseg::models {

enum class Architecture { kUNetPlain, kUNetDense, kDeepLabLite };

const char* to_string(Architecture arch) noexcept;
/// Accepts "unet-plain", "unet-dense" and "deeplab-lite".
Architecture parse_architecture(const std::string& name);

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Architecture configuration. Channel widths double per encoder stage,
/// starting at base_width.
struct ModelSpec {
  Architecture architecture = Architecture::kUNetPlain;
  std::size_t in_channels = 6;
  std::size_t base_width = 8;
  std::size_t depth = 3;

  // deeplab-lite
  std::vector<std::size_t> aspp_rates{1, 2, 4};
  bool aspp_pooling = true;

  // unet-dense
  std::size_t dense_layers = 2;
  std::size_t growth = 4;

  // Optional squeeze-and-excitation gate after every encoder stage (U-Net
  // variants only).
  bool se = false;
  std::size_t se_reduction = 4;

  double threshold = 0.5;

  /// Throws SpecError naming the first invalid field.
  void validate() const;
  /// Input height and width must be multiples of this.
  std::size_t spatial_multiple() const noexcept { return std::size_t{1} << depth; }
  std::size_t width_at(std::size_t stage) const noexcept { return base_width << stage; }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

void to_json(nlohmann::json& j, const ModelSpec& spec);
void from_json(const nlohmann::json& j, ModelSpec& spec);

}  // namespace lseg::models
