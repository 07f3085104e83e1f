#include "cicoder/checkpoint.hpp"

#include <cmath>

#include "byteio.hpp"
#include "cicoder/error.hpp"

namespace cicoder {

namespace {
constexpr std::string_view kMagic = "NCKP";
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxDim = 1u << 20;
}  // namespace

std::string serialize_checkpoint(const ModelParams& params) {
  const auto& cfg = params.config;
  detail::ByteWriter w;
  w.raw(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(cfg.num_channels));
  w.u32(static_cast<std::uint32_t>(cfg.tcn_layers.size()));
  for (const auto& l : cfg.tcn_layers) {
    w.u32(static_cast<std::uint32_t>(l.out_channels));
    w.u32(static_cast<std::uint32_t>(l.kernel_size));
    w.u32(static_cast<std::uint32_t>(l.dilation));
    w.u8(static_cast<std::uint8_t>(l.activation));
  }
  w.u32(static_cast<std::uint32_t>(cfg.d_k));
  w.u32(static_cast<std::uint32_t>(cfg.d_v));
  w.u32(static_cast<std::uint32_t>(cfg.attention_context));

  auto named = const_cast<ModelParams&>(params).named_tensors();
  w.u32(static_cast<std::uint32_t>(named.size()));
  for (const auto& n : named) {
    w.u32(static_cast<std::uint32_t>(n.name.size()));
    w.raw(n.name);
    w.u32(static_cast<std::uint32_t>(n.tensor->shape().size()));
    for (std::size_t d : n.tensor->shape()) w.u64(d);
    for (double v : n.tensor->data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

ModelParams deserialize_checkpoint(std::string_view bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (r.raw(4, "magic") != kMagic) r.fail("bad magic (expected NCKP)");
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version));

  auto dim = [&](const char* what) {
    const std::uint32_t v = r.u32(what);
    if (v == 0 || v > kMaxDim) r.fail(std::string(what) + " out of range");
    return static_cast<int>(v);
  };
  ModelConfig cfg;
  cfg.num_channels = dim("num_channels");
  const std::uint32_t layers = r.u32("layer count");
  if (layers > 1024) r.fail("layer count out of range");
  cfg.tcn_layers.clear();
  for (std::uint32_t i = 0; i < layers; ++i) {
    TcnLayerSpec spec;
    spec.out_channels = dim("out_channels");
    spec.kernel_size = dim("kernel_size");
    spec.dilation = dim("dilation");
    const std::uint8_t act = r.u8("activation");
    if (act > static_cast<std::uint8_t>(Activation::kTanh)) r.fail("unknown activation code");
    spec.activation = static_cast<Activation>(act);
    cfg.tcn_layers.push_back(spec);
  }
  cfg.d_k = dim("d_k");
  cfg.d_v = dim("d_v");
  cfg.attention_context = dim("attention_context");

  ModelParams params = init_params(cfg, 0);
  auto named = params.named_tensors();
  const std::uint32_t count = r.u32("tensor count");
  if (count != named.size())
    r.fail("expected " + std::to_string(named.size()) + " tensors, found " +
           std::to_string(count));
  for (auto& n : named) {
    const std::uint32_t len = r.u32("name length");
    const auto name = r.raw(len, "tensor name");
    if (name != n.name) r.fail("expected tensor '" + n.name + "', found '" + std::string(name) + "'");
    const std::uint32_t ndim = r.u32("rank");
    if (ndim != n.tensor->shape().size()) r.fail("rank mismatch for '" + n.name + "'");
    for (std::size_t d : n.tensor->shape()) {
      if (r.u64("shape") != d) r.fail("shape mismatch for '" + n.name + "'");
    }
    for (double& v : n.tensor->data()) {
      const float f = r.f32("tensor data");
      if (!std::isfinite(f)) r.fail("non-finite value in '" + n.name + "'");
      v = f;
    }
  }
  if (r.remaining() != 0) r.fail("trailing bytes after last tensor");
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(params));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    return deserialize_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace cicoder
