#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "lseg/gradcheck.hpp"
#include "lseg/metrics/confusion.hpp"
#include "lseg/nn/module.hpp"
#include "lseg/rng.hpp"

namespace lseg::testing {

std::filesystem::path fixture_dir();
std::filesystem::path golden_dir();

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "lseg");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

Tensor64 random_tensor64(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0);
Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0);

/// Finite-difference check of d<r, f(x)>/dx for a module, with r a fixed
/// random projection.
GradCheckReport check_module_input(nn::Module<double>& module, const Tensor64& x, std::uint64_t seed);
/// Same, for every trainable parameter; the worst parameter wins.
GradCheckReport check_module_params(nn::Module<double>& module, const Tensor64& x, std::uint64_t seed);

struct GradientCase {
  std::string name;
  double error = 0.0;
};

/// Every differentiable layer on small randomized shapes (input and
/// parameter gradients reported as separate cases).
std::vector<GradientCase> layer_gradient_cases(std::uint64_t seed);
/// BCE, WCE (both weighting modes), Dice and the combined loss.
std::vector<GradientCase> loss_gradient_cases(std::uint64_t seed);

/// Pixel-by-pixel tally, written independently of metrics::confusion.
metrics::ConfusionCounts naive_confusion(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& target);

std::vector<std::uint8_t> random_mask(std::size_t n, double p, Rng& rng);

/// Replaces the base64 PNG strings of prediction results with "<png>" so
/// golden files stay small and readable. Handles a single result or an array.
nlohmann::ordered_json redact_images(nlohmann::ordered_json j);

/// True when `bytes` is a PNG whose header declares width x height.
bool is_png_of_size(const std::string& bytes, std::size_t width, std::size_t height);

std::string base64_decode(const std::string& text);

}  // namespace lseg::testing
