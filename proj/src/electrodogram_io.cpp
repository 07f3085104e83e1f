#include <cmath>
#include <fstream>
#include <limits>

#include "byteio.hpp"
#include "cicoder/ace.hpp"

namespace cicoder {

namespace {
constexpr std::string_view kMagic = "EGRM";
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::string serialize_electrodogram(const Electrodogram& e) {
  e.validate();
  detail::ByteWriter w;
  w.raw(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(e.num_channels));
  w.u64(e.num_frames);
  w.f64(e.frame_rate_hz);
  for (float v : e.magnitudes) w.f32(v);
  return w.take();
}

Electrodogram deserialize_electrodogram(std::string_view bytes) {
  detail::ByteReader r(bytes, "electrodogram");
  if (r.raw(4, "magic") != kMagic) r.fail("bad magic (expected EGRM)");
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
  const std::uint32_t channels = r.u32("channel count");
  const std::uint64_t frames = r.u64("frame count");
  const double rate = r.f64("frame rate");
  if (!std::isfinite(rate) || rate <= 0.0) r.fail("frame rate must be positive and finite");
  if (channels == 0) r.fail("channel count must be >= 1");

  const std::uint64_t max_entries = std::numeric_limits<std::uint64_t>::max() / 4 / channels;
  if (frames > max_entries || channels * frames * 4 != r.remaining()) {
    r.fail("dimension mismatch: header says " + std::to_string(channels) + " x " +
           std::to_string(frames) + " but payload has " + std::to_string(r.remaining()) +
           " bytes");
  }

  Electrodogram e(channels, static_cast<std::size_t>(frames), rate);
  for (auto& v : e.magnitudes) {
    v = r.f32("payload");
    if (!std::isfinite(v)) r.fail("non-finite magnitude");
    if (v < 0.0f || v > 1.0f) r.fail("magnitude " + std::to_string(v) + " outside [0, 1]");
  }
  return e;
}

void write_electrodogram(const Electrodogram& e, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_electrodogram(e));
}

Electrodogram read_electrodogram(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    return deserialize_electrodogram(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace cicoder
