#include "lseg/models/spec.hpp"

#include <nlohmann/json.hpp>

namespace lseg::models {

const char* to_string(Architecture arch) noexcept {
  switch (arch) {
    case Architecture::kUNetPlain: return "unet-plain";
    case Architecture::kUNetDense: return "unet-dense";
    case Architecture::kDeepLabLite: return "deeplab-lite";
  }
  return "unknown";
}

Architecture parse_architecture(const std::string& name) {
  if (name == "unet-plain" || name == "unet") return Architecture::kUNetPlain;
  if (name == "unet-dense") return Architecture::kUNetDense;
  if (name == "deeplab-lite") return Architecture::kDeepLabLite;
  throw SpecError("unknown architecture '" + name + "' (expected unet-plain, unet-dense or deeplab-lite)");
}

void ModelSpec::validate() const {
  if (in_channels < 1) throw SpecError("in_channels must be at least 1");
  if (base_width < 1) throw SpecError("base_width must be at least 1");
  if (depth < 1) throw SpecError("depth must be at least 1");
  if (depth > 8) throw SpecError("depth must be at most 8");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw SpecError("threshold must lie in [0, 1]");
  if (architecture == Architecture::kDeepLabLite) {
    if (aspp_rates.empty()) throw SpecError("aspp_rates must not be empty");
    for (auto r : aspp_rates) {
      if (r < 1) throw SpecError("aspp_rates entries must be positive");
    }
  }
  if (architecture == Architecture::kUNetDense && growth < 1) throw SpecError("growth must be at least 1");
  if (se && se_reduction < 1) throw SpecError("se_reduction must be at least 1");
}

void to_json(nlohmann::json& j, const ModelSpec& spec) {
  j = nlohmann::json{{"architecture", to_string(spec.architecture)},
                     {"in_channels", spec.in_channels},
                     {"base_width", spec.base_width},
                     {"depth", spec.depth},
                     {"aspp_rates", spec.aspp_rates},
                     {"aspp_pooling", spec.aspp_pooling},
                     {"dense_layers", spec.dense_layers},
                     {"growth", spec.growth},
                     {"se", spec.se},
                     {"se_reduction", spec.se_reduction},
                     {"threshold", spec.threshold}};
}

void from_json(const nlohmann::json& j, ModelSpec& spec) {
  const ModelSpec d;
  spec.architecture = parse_architecture(j.value("architecture", std::string(to_string(d.architecture))));
  spec.in_channels = j.value("in_channels", d.in_channels);
  spec.base_width = j.value("base_width", d.base_width);
  spec.depth = j.value("depth", d.depth);
  spec.aspp_rates = j.value("aspp_rates", d.aspp_rates);
  spec.aspp_pooling = j.value("aspp_pooling", d.aspp_pooling);
  spec.dense_layers = j.value("dense_layers", d.dense_layers);
  spec.growth = j.value("growth", d.growth);
  spec.se = j.value("se", d.se);
  spec.se_reduction = j.value("se_reduction", d.se_reduction);
  spec.threshold = j.value("threshold", d.threshold);
}

}  // namespace lseg::models
