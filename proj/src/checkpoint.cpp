#include <cmath>

#include "neurosleep/binary_io.hpp"
#include "neurosleep/errors.hpp"
#include "neurosleep/params.hpp"

namespace neurosleep::net {

namespace {

constexpr std::string_view kMagic = "NCKP";
constexpr std::uint16_t kVersion = 1;

void put_config(io::ByteWriter& w, const ModelConfig& c) {
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.profile));
  for (int k : c.kernel_sizes) w.put<std::uint32_t>(static_cast<std::uint32_t>(k));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.branch_width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.fused_width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.gate_reduction));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.attn_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.window_radius));
  w.put<double>(c.leak);
  w.put<double>(c.fire_threshold);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.n_classes));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.epoch_samples));
  w.put<std::uint8_t>(c.single_branch);
  w.put<std::uint8_t>(c.use_elif);
  w.put<std::uint8_t>(c.gate_bypass);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.pooling));
  w.put<std::uint8_t>(c.dense_input);
}

bool get_flag(io::ByteReader& r) {
  const std::size_t at = r.offset();
  const auto v = r.get<std::uint8_t>();
  if (v > 1) r.fail_at(at, "flag byte must be 0 or 1");
  return v == 1;
}

int get_int(io::ByteReader& r) {
  const std::size_t at = r.offset();
  const auto v = r.get<std::uint32_t>();
  if (v > 1u << 30) r.fail_at(at, "config value out of range");
  return static_cast<int>(v);
}

ModelConfig get_config(io::ByteReader& r) {
  ModelConfig c;
  const std::size_t at = r.offset();
  const auto prof = r.get<std::uint8_t>();
  if (prof > 1) r.fail_at(at, "unknown profile code");
  c.profile = static_cast<Profile>(prof);
  for (int& k : c.kernel_sizes) k = get_int(r);
  c.branch_width = get_int(r);
  c.fused_width = get_int(r);
  c.gate_reduction = get_int(r);
  c.attn_dim = get_int(r);
  c.window_radius = get_int(r);
  c.leak = r.get<double>();
  c.fire_threshold = r.get<double>();
  c.n_classes = get_int(r);
  c.epoch_samples = get_int(r);
  c.single_branch = get_flag(r);
  c.use_elif = get_flag(r);
  c.gate_bypass = get_flag(r);
  const std::size_t pool_at = r.offset();
  const auto pool = r.get<std::uint8_t>();
  if (pool > 1) r.fail_at(pool_at, "unknown pooling code");
  c.pooling = static_cast<TokenPooling>(pool);
  c.dense_input = get_flag(r);
  try {
    c.validate();
  } catch (const ParameterError& e) {
    r.fail_at(at, std::string("invalid config block: ") + e.what());
  }
  return c;
}

}  // namespace

std::string encode_checkpoint(const ModelConfig& cfg, const ModelParams& params) {
  io::ByteWriter w;
  w.put_bytes(kMagic);
  w.put<std::uint16_t>(kVersion);
  put_config(w, cfg);
  for (const auto& t : tensor_views(const_cast<ModelParams&>(params))) {
    w.put_string16(t.name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.shape.size()));
    for (int d : t.shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (double v : t.values()) w.put<float>(static_cast<float>(v));
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  io::ByteReader r(bytes, "NCKP");
  if (r.get_bytes(4) != kMagic) r.fail_at(0, "bad magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kVersion) r.fail_at(4, "unsupported version " + std::to_string(version));
  Checkpoint ck;
  ck.config = get_config(r);
  ck.params = zero_params(ck.config);
  auto views = tensor_views(ck.params);
  for (auto& t : views) {
    if (r.at_end()) r.fail("missing tensor " + t.name);
    const std::size_t at = r.offset();
    const auto name = r.get_string16();
    if (name != t.name) r.fail_at(at, "expected tensor " + t.name + ", found " + name);
    const auto rank = r.get<std::uint8_t>();
    std::vector<int> shape;
    for (int i = 0; i < rank; ++i) shape.push_back(static_cast<int>(r.get<std::uint32_t>()));
    if (shape != t.shape) r.fail_at(at, "shape mismatch for tensor " + t.name);
    for (double& v : t.values()) {
      const std::size_t vat = r.offset();
      const float f = r.get<float>();
      if (!std::isfinite(f)) r.fail_at(vat, "non-finite value in " + t.name);
      v = f;
    }
  }
  if (!r.at_end()) r.fail("unexpected trailing tensor data");
  return ck;
}

void save_checkpoint(const ModelConfig& cfg, const ModelParams& params, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(cfg, params));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(io::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace neurosleep::net
