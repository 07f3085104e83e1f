#include <gtest/gtest.h>

#include <cmath>

#include "cicoder/error.hpp"
#include "cicoder/fft.hpp"
#include "cicoder/vocoder.hpp"

using namespace cicoder;

namespace {

Electrodogram constant_channel(std::size_t c, float level, std::size_t frames = 1000) {
  Electrodogram e(22, frames, 1000.0);
  for (std::size_t t = 0; t < frames; ++t) e.at(c, t) = level;
  return e;
}

}  // namespace

TEST(InverseLgf, EndpointsAndMidpoint) {
  const AceConfig ace;
  EXPECT_EQ(inverse_lgf(0.0, ace), 0.0);
  EXPECT_EQ(inverse_lgf(1.0, ace), ace.lgf_saturation);
  EXPECT_NEAR(inverse_lgf(0.885515223382972295, ace), 0.30078125, 1e-12);
  EXPECT_THROW(inverse_lgf(1.01, ace), Error);
  EXPECT_THROW(inverse_lgf(std::nan(""), ace), Error);
}

TEST(InverseLgf, InvertsCompression) {
  const AceConfig ace;
  for (int i = 1; i < 200; ++i) {
    const double y = i / 200.0;
    EXPECT_NEAR(lgf_compress(inverse_lgf(y, ace), ace), y, 1e-12);
  }
}

TEST(Vocoder, ZeroInGivesSilence) {
  const auto out = synthesize(Electrodogram(22, 50, 1000.0), VocoderConfig{}, AceConfig{});
  EXPECT_EQ(out.samples.size(), 800u);
  for (double s : out.samples) EXPECT_EQ(s, 0.0);
}

TEST(Vocoder, SingleChannelPeaksAtCarrier) {
  const AceConfig ace;
  const auto centers = build_filterbank(ace).centers_hz;
  for (std::size_t c : {0u, 5u, 12u, 21u}) {
    const auto out = synthesize(constant_channel(c, 1.0f), VocoderConfig{}, ace);
    ASSERT_EQ(out.samples.size(), 16000u);
    // 16000-point transform: 1 Hz bins.
    const std::vector<double> tail(out.samples.begin(), out.samples.end());
    const auto spec = rfft(tail, 16384);
    std::size_t arg = 0;
    for (std::size_t k = 1; k < spec.size(); ++k)
      if (std::abs(spec[k]) > std::abs(spec[arg])) arg = k;
    const double bin_hz = 16000.0 / 16384.0;
    EXPECT_NEAR(arg * bin_hz, centers[c], bin_hz) << "channel " << c;
  }
}

TEST(Vocoder, PeakLimited) {
  Electrodogram e(22, 200, 1000.0);
  for (float& m : e.magnitudes) m = 1.0f;
  const auto out = synthesize(e, VocoderConfig{}, AceConfig{});
  double peak = 0.0;
  for (double s : out.samples) peak = std::max(peak, std::abs(s));
  EXPECT_NEAR(peak, 0.9, 1e-12);
}

TEST(Vocoder, SuperpositionWithoutNormalisation) {
  const AceConfig ace;
  VocoderConfig v;
  v.inverse_lgf = false;
  const auto a = constant_channel(3, 0.25f, 100);
  const auto b = constant_channel(9, 0.5f, 100);
  auto ab = a;
  for (std::size_t i = 0; i < ab.magnitudes.size(); ++i) ab.magnitudes[i] += b.magnitudes[i];
  const auto ya = synthesize_unnormalized(a, v, ace);
  const auto yb = synthesize_unnormalized(b, v, ace);
  const auto yab = synthesize_unnormalized(ab, v, ace);
  for (std::size_t n = 0; n < yab.samples.size(); ++n)
    EXPECT_NEAR(yab.samples[n], ya.samples[n] + yb.samples[n], 1e-12);
}

TEST(Vocoder, CarrierValidation) {
  VocoderConfig v;
  v.carrier_freqs_hz = {100.0, 200.0};
  EXPECT_THROW(synthesize(Electrodogram(22, 5, 1000.0), v, AceConfig{}), Error);
  v.carrier_freqs_hz.assign(22, 0.0);
  for (std::size_t c = 0; c < 22; ++c) v.carrier_freqs_hz[c] = 9000.0 - 10.0 * c;
  EXPECT_THROW(synthesize(Electrodogram(22, 5, 1000.0), v, AceConfig{}), Error);
}
