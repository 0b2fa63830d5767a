#include <array>
#include <stdexcept>

#include "binio.hpp"
#include "vibxai/nn.hpp"

namespace vibxai::nn {
namespace {

constexpr std::array<char, 8> kMagic{'V', 'I', 'B', 'X', 'C', 'K', 'P', 'T'};

// Stored value count (parameters plus running statistics) implied by a config.
std::uint64_t stored_values(const ModelConfig& cfg) {
  std::uint64_t n = 0;
  std::uint64_t in_ch = 1;
  for (const auto& b : cfg.conv_blocks) {
    n += b.filters * in_ch * b.kernel_size + 5 * b.filters;
    in_ch = b.filters;
  }
  n += cfg.dense_hidden * cfg.flat_size() + cfg.dense_hidden;
  n += cfg.n_classes * cfg.dense_hidden + cfg.n_classes;
  return n;
}

}  // namespace

void save_weights(const Checkpoint& ckpt, const std::filesystem::path& path) {
  vibxai::detail::ByteWriter w;
  w.raw(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  const auto& cfg = ckpt.network.config;
  w.u64(cfg.input_len);
  w.u64(cfg.conv_blocks.size());
  for (const auto& b : cfg.conv_blocks) {
    w.u64(b.filters);
    w.u64(b.kernel_size);
    w.u64(b.pool_size);
  }
  w.u64(cfg.dense_hidden);
  w.u64(cfg.n_classes);
  w.f64(ckpt.best_test_accuracy);
  w.u64(ckpt.epoch_of_best);
  w.doubles(ckpt.input_norm.mean);
  w.doubles(ckpt.input_norm.scale);
  for (const auto& b : ckpt.network.blocks)
    for (const Tensor* t : {&b.weight, &b.bias, &b.gamma, &b.beta, &b.running_mean, &b.running_var})
      w.doubles(t->data);
  for (const Tensor* t : {&ckpt.network.hidden.weight, &ckpt.network.hidden.bias, &ckpt.network.output.weight,
                          &ckpt.network.output.bias})
    w.doubles(t->data);
  w.write_file(path);
}

Checkpoint load_weights(const std::filesystem::path& path) {
  auto r = vibxai::detail::ByteReader::from_file(path, "checkpoint " + path.string());

  std::array<char, 8> magic{};
  r.raw(magic.data(), magic.size());
  if (magic != kMagic) r.fail("bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    r.fail("unsupported format version " + std::to_string(version));

  ModelConfig cfg;
  cfg.input_len = r.u64();
  const std::uint64_t n_blocks = r.u64();
  if (n_blocks == 0 || n_blocks > 64) r.fail("implausible block count");
  cfg.conv_blocks.clear();
  for (std::uint64_t i = 0; i < n_blocks; ++i) {
    ConvBlockConfig b;
    b.filters = r.u64();
    b.kernel_size = r.u64();
    b.pool_size = r.u64();
    cfg.conv_blocks.push_back(b);
  }
  cfg.dense_hidden = r.u64();
  cfg.n_classes = r.u64();
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(std::string("invalid config: ") + e.what());
  }

  // Each array also carries an 8-byte count.
  r.need(8 * (stored_values(cfg) + 2 * cfg.input_len));

  Checkpoint ckpt;
  ckpt.best_test_accuracy = r.f64();
  ckpt.epoch_of_best = r.u64();
  ckpt.input_norm.mean = r.doubles(cfg.input_len);
  ckpt.input_norm.scale = r.doubles(cfg.input_len);
  // Shapes come from the config; the file only carries values.
  ckpt.network = Network::initialize(cfg, 0);
  for (auto& b : ckpt.network.blocks)
    for (Tensor* t : {&b.weight, &b.bias, &b.gamma, &b.beta, &b.running_mean, &b.running_var})
      t->data = r.doubles(t->size());
  for (Tensor* t : {&ckpt.network.hidden.weight, &ckpt.network.hidden.bias, &ckpt.network.output.weight,
                    &ckpt.network.output.bias})
    t->data = r.doubles(t->size());
  r.expect_end();
  return ckpt;
}

}  // namespace vibxai::nn
