#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lseg/metrics/losses.hpp"
#include "lseg/models/model.hpp"
#include "lseg/nn/blocks.hpp"

namespace lseg::testing {
namespace fs = std::filesystem;

fs::path fixture_dir() { return LSEG_FIXTURE_DIR; }
fs::path golden_dir() { return LSEG_GOLDEN_DIR; }

TempDir::TempDir(const std::string& tag) {
  static std::uint64_t counter = 0;
  Rng rng(static_cast<std::uint64_t>(reinterpret_cast<std::uintptr_t>(this)) ^ ++counter);
  for (;;) {
    path_ = fs::temp_directory_path() / (tag + "-" + std::to_string(rng.next_u64() % 1000000000ULL));
    if (fs::create_directories(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  out << contents;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Tensor64 random_tensor64(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor64 t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

namespace {

Tensor64 projection_for(nn::Module<double>& module, const Tensor64& x, std::uint64_t seed) {
  Rng rng(seed);
  const auto y = module.forward(x);
  return random_tensor64(y.shape(), rng);
}

}  // namespace

GradCheckReport check_module_input(nn::Module<double>& module, const Tensor64& x, std::uint64_t seed) {
  const auto r = projection_for(module, x, seed);
  DifferentiableFn fn{
      [&](const Tensor64& in) { return dot(module.forward(in), r); },
      [&](const Tensor64& in) {
        module.forward(in);
        module.zero_grad();
        return module.backward(r);
      },
  };
  return finite_diff_check(fn, x);
}

GradCheckReport check_module_params(nn::Module<double>& module, const Tensor64& x, std::uint64_t seed) {
  const auto r = projection_for(module, x, seed);
  GradCheckReport worst;
  for (const auto& p : module.parameters()) {
    if (!p.grad) continue;
    const Tensor64 original = *p.value;
    DifferentiableFn fn{
        [&](const Tensor64& theta) {
          *p.value = theta;
          return dot(module.forward(x), r);
        },
        [&](const Tensor64& theta) {
          *p.value = theta;
          module.zero_grad();
          module.forward(x);
          module.backward(r);
          return *p.grad;
        },
    };
    const auto report = finite_diff_check(fn, original);
    *p.value = original;
    if (report.max_rel_error >= worst.max_rel_error) worst = report;
  }
  return worst;
}

namespace {

// Zero-initialised biases put ReLU inputs exactly on the kink wherever every
// incoming feature is zero, where no finite difference is meaningful.
void randomize_biases(nn::Module<double>& module, std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& p : module.parameters()) {
    if (p.grad && p.name.ends_with("bias")) *p.value = random_tensor64(p.value->shape(), rng, -0.5, 0.5);
  }
}

void add_module_cases(std::vector<GradientCase>& out, const std::string& name, nn::Module<double>& module,
                      const Tensor64& x, std::uint64_t seed) {
  randomize_biases(module, seed ^ 0xB1A5);
  out.push_back({name + " (input)", check_module_input(module, x, seed).max_rel_error});
  bool has_params = false;
  for (const auto& p : module.parameters()) has_params |= p.grad != nullptr;
  if (has_params) out.push_back({name + " (params)", check_module_params(module, x, seed + 1).max_rel_error});
}

}  // namespace

std::vector<GradientCase> layer_gradient_cases(std::uint64_t seed) {
  std::vector<GradientCase> out;
  Rng rng(seed);
  const auto next = [&] { return rng.next_u64(); };

  {
    nn::Conv2d<double> conv({2, 3, 3, 1, 1, 1, true}, rng);
    add_module_cases(out, "conv2d 3x3 pad 1", conv, random_tensor64({1, 2, 5, 5}, rng), next());
  }
  {
    nn::Conv2d<double> conv({2, 2, 3, 2, 2, 2, true}, rng);
    add_module_cases(out, "conv2d stride 2 dilation 2", conv, random_tensor64({2, 2, 7, 7}, rng), next());
  }
  {
    nn::ConvTranspose2d<double> up({3, 2, 2, 2, 0, 1, true}, rng);
    add_module_cases(out, "transposed conv k2 s2", up, random_tensor64({1, 3, 3, 3}, rng), next());
  }
  {
    nn::ConvTranspose2d<double> up({2, 2, 3, 2, 1, 1, true}, rng);
    add_module_cases(out, "transposed conv k3 s2 pad 1", up, random_tensor64({2, 2, 3, 4}, rng), next());
  }
  {
    nn::MaxPool2d<double> pool;
    add_module_cases(out, "maxpool 2x2", pool, random_tensor64({2, 2, 4, 6}, rng), next());
  }
  {
    nn::AvgPool2d<double> pool;
    add_module_cases(out, "avgpool 2x2", pool, random_tensor64({1, 2, 4, 4}, rng), next());
  }
  {
    nn::GlobalAvgPool<double> gap;
    add_module_cases(out, "global average pool", gap, random_tensor64({2, 3, 3, 2}, rng), next());
  }
  {
    nn::BatchNorm2d<double> bn(3);
    bn.gamma() = random_tensor64({3}, rng, 0.5, 1.5);
    bn.beta() = random_tensor64({3}, rng);
    bn.set_training(true);
    add_module_cases(out, "batchnorm (train)", bn, random_tensor64({2, 3, 3, 3}, rng), next());
    bn.running_var() = random_tensor64({3}, rng, 0.5, 2.0);
    bn.set_training(false);
    add_module_cases(out, "batchnorm (eval)", bn, random_tensor64({2, 3, 3, 3}, rng), next());
  }
  {
    nn::DenseBlock<double> block({3, 2, 2}, rng);
    block.set_training(true);
    add_module_cases(out, "dense block", block, random_tensor64({2, 3, 4, 4}, rng), next());
  }
  {
    nn::Transition<double> tr(4, 2, rng);
    add_module_cases(out, "transition", tr, random_tensor64({1, 4, 4, 4}, rng), next());
  }
  {
    nn::SEBlock<double> se({4, 2}, rng);
    add_module_cases(out, "squeeze-excitation", se, random_tensor64({1, 4, 4, 4}, rng), next());
  }
  {
    nn::ASPPConfig cfg;
    cfg.in_channels = 2;
    cfg.rates = {1, 2};
    cfg.branch_channels = 2;
    cfg.out_channels = 3;
    nn::ASPP<double> aspp(cfg, rng);
    add_module_cases(out, "aspp", aspp, random_tensor64({1, 2, 5, 5}, rng), next());
  }
  {
    nn::Sigmoid<double> s;
    add_module_cases(out, "sigmoid", s, random_tensor64({2, 1, 3, 3}, rng, -4.0, 4.0), next());
  }
  {
    nn::ReLU<double> r;
    add_module_cases(out, "relu", r, random_tensor64({1, 2, 3, 3}, rng), next());
  }
  {
    nn::Softmax<double> sm;
    add_module_cases(out, "softmax", sm, random_tensor64({2, 3, 2, 2}, rng, -2.0, 2.0), next());
  }
  for (const auto arch :
       {models::Architecture::kUNetPlain, models::Architecture::kUNetDense, models::Architecture::kDeepLabLite}) {
    models::ModelSpec spec;
    spec.architecture = arch;
    spec.in_channels = 2;
    spec.base_width = 2;
    spec.depth = 2;
    spec.aspp_rates = {1, 2};
    spec.dense_layers = 1;
    spec.growth = 2;
    spec.se = arch == models::Architecture::kUNetPlain;
    spec.se_reduction = 2;
    auto model = models::build_model<double>(spec, rng);
    model.set_training(true);
    add_module_cases(out, std::string(models::to_string(arch)) + " network", model.network(),
                     random_tensor64({1, 2, 4, 4}, rng), next());
  }
  return out;
}

std::vector<GradientCase> loss_gradient_cases(std::uint64_t seed) {
  std::vector<GradientCase> out;
  Rng rng(seed);
  const Shape shape{2, 1, 4, 4};
  Tensor64 target(shape);
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
  const auto pred = random_tensor64(shape, rng, 0.05, 0.95);

  const auto add = [&](const std::string& name, std::function<metrics::LossResult<double>(const Tensor64&)> loss) {
    DifferentiableFn fn{[&](const Tensor64& p) { return loss(p).value; }, [&](const Tensor64& p) { return loss(p).grad; }};
    out.push_back({name, finite_diff_check(fn, pred).max_rel_error});
  };
  add("bce", [&](const Tensor64& p) { return metrics::bce_loss(p, target); });
  add("wce (positive weighting)", [&](const Tensor64& p) { return metrics::wce_loss(p, target, 3.0); });
  add("wce (both terms weighted)", [&](const Tensor64& p) { return metrics::wce_loss(p, target, 3.0, 1e-7, true); });
  add("dice", [&](const Tensor64& p) { return metrics::dice_loss(p, target, 1.0); });
  metrics::LossConfig cfg;
  cfg.pos_weight = 2.0;
  cfg.alpha = 0.3;
  add("combined", [&](const Tensor64& p) { return metrics::combined_loss(p, target, cfg); });
  return out;
}

metrics::ConfusionCounts naive_confusion(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& target) {
  metrics::ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == 1, t = target[i] == 1;
    if (p && t) ++c.tp;
    if (p && !t) ++c.fp;
    if (!p && t) ++c.fn;
    if (!p && !t) ++c.tn;
  }
  return c;
}

std::vector<std::uint8_t> random_mask(std::size_t n, double p, Rng& rng) {
  std::vector<std::uint8_t> m(n);
  for (auto& v : m) v = rng.uniform() < p ? 1 : 0;
  return m;
}

nlohmann::ordered_json redact_images(nlohmann::ordered_json j) {
  if (j.is_array()) {
    for (auto& e : j) e = redact_images(std::move(e));
    return j;
  }
  if (j.is_object() && j.contains("images") && j["images"].is_object()) {
    for (auto& [key, value] : j["images"].items()) {
      (void)key;
      value = "<png>";
    }
  }
  return j;
}

bool is_png_of_size(const std::string& bytes, std::size_t width, std::size_t height) {
  static const unsigned char kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (bytes.size() < 24 || !std::equal(kSignature, kSignature + 8, reinterpret_cast<const unsigned char*>(bytes.data()))) {
    return false;
  }
  const auto be32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
    return v;
  };
  return bytes.compare(12, 4, "IHDR") == 0 && be32(16) == width && be32(20) == height;
}

std::string base64_decode(const std::string& text) {
  static const std::string kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const auto pos = kAlphabet.find(c);
    if (pos == std::string::npos) throw std::invalid_argument("invalid base64 character");
    acc = (acc << 6) | static_cast<std::uint32_t>(pos);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

}  // namespace lseg::testing
