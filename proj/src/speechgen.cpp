#include "cicoder/speechgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "cicoder/error.hpp"
#include "cicoder/rng.hpp"

namespace cicoder {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kBlock = 16;  // parameter update interval, samples
constexpr double kBreathLevel = 0.1;  // aspiration noise re voiced level

struct Vowel {
  double f1, f2, f3;
};

// Adult male averages; scaled per speaker.
constexpr std::array<Vowel, 10> kVowels = {{
    {270, 2290, 3010},
    {390, 1990, 2550},
    {530, 1840, 2480},
    {660, 1720, 2410},
    {730, 1090, 2440},
    {570, 840, 2410},
    {440, 1020, 2240},
    {300, 870, 2240},
    {640, 1190, 2390},
    {490, 1350, 1690},
}};

struct Fricative {
  double center, bandwidth, level;
};

constexpr std::array<Fricative, 5> kFricatives = {{
    {5500, 2500, 0.35},  // s
    {3000, 1800, 0.40},  // sh
    {4500, 5000, 0.10},  // f, th
    {1800, 2500, 0.12},  // h
    {6000, 3000, 0.25},  // z, voiced below
}};

// F2 loci: labial, alveolar, velar.
constexpr std::array<double, 3> kLoci = {900.0, 1800.0, 2300.0};

// Piecewise-constant parameter targets, one entry per sample.
struct Tracks {
  std::vector<double> voice, noise, f1, f2, f3, nasal, noise_fc, noise_bw, f0, accent;

  explicit Tracks(std::size_t n)
      : voice(n), noise(n), f1(n, 500), f2(n, 1500), f3(n, 2500), nasal(n),
        noise_fc(n, 3000), noise_bw(n, 2000), f0(n, 120), accent(n, 1.0) {}
};

// Two-pole resonator with unity gain at DC.
class Resonator {
 public:
  void set(double freq, double bw, double fs) {
    const double r = std::exp(-kPi * bw / fs);
    c_ = -r * r;
    b_ = 2.0 * r * std::cos(2.0 * kPi * freq / fs);
    a_ = 1.0 - b_ - c_;
  }
  double operator()(double x) {
    const double y = a_ * x + b_ * y1_ + c_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a_ = 1.0, b_ = 0.0, c_ = 0.0, y1_ = 0.0, y2_ = 0.0;
};

// Band-pass biquad.
class BandPass {
 public:
  void set(double fc, double bw, double fs) {
    fc = std::min(fc, 0.45 * fs);
    const double w0 = 2.0 * kPi * fc / fs;
    const double q = std::max(0.3, fc / bw);
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    b0_ = alpha / a0;
    b2_ = -alpha / a0;
    a1_ = -2.0 * std::cos(w0) / a0;
    a2_ = (1.0 - alpha) / a0;
    // Unit-variance output for unit-variance white input.
    norm_ = std::sqrt(fs / (kPi * fc / q));
  }
  double operator()(double x) {
    const double y = b0_ * x * norm_ + b2_ * x2_ * norm_ - a1_ * y1_ - a2_ * y2_;
    x2_ = x1_;
    x1_ = x;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double b0_ = 0, b2_ = 0, a1_ = 0, a2_ = 0, norm_ = 1, x1_ = 0, x2_ = 0, y1_ = 0, y2_ = 0;
};

void smooth(std::vector<double>& v, double tau_s, double fs) {
  const double a = std::exp(-1.0 / (tau_s * fs));
  double state = v.empty() ? 0.0 : v.front();
  for (double& x : v) {
    state = (1.0 - a) * x + a * state;
    x = state;
  }
}

class Planner {
 public:
  Planner(Tracks& tracks, detail::SplitMix& rng, double fs, double formant_scale)
      : tr_(tracks), rng_(rng), fs_(fs), scale_(formant_scale) {}

  std::size_t cursor() const { return pos_; }

  void silence(double dur) { advance(dur); }

  // Glides linearly from `a` to `b`; a == b gives a monophthong.
  // A positive `locus_f2` bends F2 in from a consonant place of
  // articulation over the first 50 ms.
  void vowel(double dur, double gain, const Vowel& a, const Vowel& b, double locus_f2) {
    const std::size_t start = pos_;
    const double len = std::max(1.0, dur * fs_);
    const double onset = 0.05 * fs_;
    fill(dur, [&](std::size_t n) {
      const double t = static_cast<double>(n - start);
      const double w = t / len;
      tr_.voice[n] = gain * (1.0 - 0.3 * w);
      tr_.f1[n] = ((1.0 - w) * a.f1 + w * b.f1) * scale_;
      tr_.f2[n] = ((1.0 - w) * a.f2 + w * b.f2) * scale_;
      tr_.f3[n] = ((1.0 - w) * a.f3 + w * b.f3) * scale_;
      if (locus_f2 > 0.0 && t < onset) {
        const double u = t / onset;
        tr_.f1[n] *= 0.6 + 0.4 * u;
        tr_.f2[n] = (1.0 - u) * locus_f2 * scale_ + u * tr_.f2[n];
      }
    });
  }

  void fricative(double dur, double gain, const Fricative& f, bool voiced) {
    fill(dur, [&](std::size_t n) {
      tr_.noise[n] = gain * f.level;
      tr_.noise_fc[n] = f.center;
      tr_.noise_bw[n] = f.bandwidth;
      if (voiced) tr_.voice[n] = 0.15 * gain;
    });
  }

  void plosive(double gain) {
    silence(rng_.uniform(0.03, 0.07));  // closure
    const double fc = rng_.uniform(1500.0, 4500.0);
    fill(rng_.uniform(0.01, 0.025), [&](std::size_t n) {
      tr_.noise[n] = gain * 0.3;
      tr_.noise_fc[n] = fc;
      tr_.noise_bw[n] = 4000.0;
    });
  }

  void nasal(double dur, double gain) {
    fill(dur, [&](std::size_t n) {
      tr_.voice[n] = 0.4 * gain;
      tr_.nasal[n] = 1.0;
      tr_.f1[n] = 280.0 * scale_;
      tr_.f2[n] = 1200.0 * scale_;
      tr_.f3[n] = 2500.0 * scale_;
    });
  }

 private:
  template <typename F>
  void fill(double dur, F&& body) {
    const std::size_t end = std::min(tr_.voice.size(), pos_ + static_cast<std::size_t>(dur * fs_));
    for (std::size_t n = pos_; n < end; ++n) body(n);
    pos_ = end;
  }
  void advance(double dur) {
    pos_ = std::min(tr_.voice.size(), pos_ + static_cast<std::size_t>(dur * fs_));
  }

  Tracks& tr_;
  detail::SplitMix& rng_;
  double fs_;
  double scale_;
  std::size_t pos_ = 0;
};

}  // namespace

AudioSignal generate_speech(std::uint64_t seed, const SpeechGenConfig& cfg) {
  if (cfg.sample_rate_hz < 8000) throw Error("speechgen: sample rate must be >= 8000 Hz");
  if (!(cfg.duration_s > 0.5)) throw Error("speechgen: duration must exceed 0.5 s");
  const double fs = cfg.sample_rate_hz;
  const auto length = static_cast<std::size_t>(cfg.duration_s * fs);
  detail::SplitMix rng(detail::SplitMix::mix(seed + 17));

  // Speaker mix of about 70% male, 30% female.
  const bool female = rng.uniform() < 0.3;
  const double f0_base = female ? rng.uniform(170.0, 250.0) : rng.uniform(85.0, 150.0);
  const double formant_scale = female ? rng.uniform(1.1, 1.2) : rng.uniform(0.95, 1.05);

  Tracks tr(length);
  Planner plan(tr, rng, fs, formant_scale);
  const double tail = rng.uniform(0.15, 0.3);
  const auto stop = static_cast<std::size_t>((cfg.duration_s - tail) * fs);
  plan.silence(rng.uniform(0.15, 0.3));

  std::size_t phrase_start = plan.cursor();
  while (plan.cursor() + static_cast<std::size_t>(0.3 * fs) < stop) {
    const int syllables = 1 + static_cast<int>(rng.below(3));
    for (int s = 0; s < syllables; ++s) {
      const std::size_t syllable_start = plan.cursor();
      const double accent = rng.uniform(0.85, 1.3);
      const double gain = std::pow(10.0, -rng.uniform(0.0, 15.0) / 20.0);
      const double onset = rng.uniform();
      double locus = 0.0;
      if (onset >= 0.35 && onset < 0.75) locus = kLoci[rng.below(kLoci.size())];
      if (onset < 0.35) {
        const auto& f = kFricatives[rng.below(kFricatives.size())];
        plan.fricative(rng.uniform(0.05, 0.12), gain, f, rng.uniform() < 0.3);
      } else if (onset < 0.6) {
        plan.plosive(gain);
      } else if (onset < 0.75) {
        plan.nasal(rng.uniform(0.04, 0.08), gain);
      }
      const auto& v = kVowels[rng.below(kVowels.size())];
      const auto& glide = rng.uniform() < 0.4 ? kVowels[rng.below(kVowels.size())] : v;
      plan.vowel(rng.uniform(0.06, 0.18), gain, v, glide, locus);
      if (rng.uniform() < 0.25) {
        const auto& f = kFricatives[rng.below(kFricatives.size())];
        plan.fricative(rng.uniform(0.04, 0.1), 0.7 * gain, f, false);
      }
      // Rising or falling pitch across the syllable.
      const double slope = rng.uniform(-0.2, 0.2);
      const double span = std::max<double>(1.0, static_cast<double>(plan.cursor() - syllable_start));
      for (std::size_t n = syllable_start; n < plan.cursor(); ++n)
        tr.accent[n] = accent * (1.0 + slope * (static_cast<double>(n - syllable_start) / span - 0.5));
    }
    plan.silence(rng.uniform() < 0.6 ? rng.uniform(0.05, 0.25) : 0.02);

    // Declining f0 over each phrase.
    const std::size_t end = plan.cursor();
    for (std::size_t n = phrase_start; n < end; ++n) {
      const double pos = static_cast<double>(n - phrase_start) / std::max<std::size_t>(1, end - phrase_start);
      tr.f0[n] = f0_base * tr.accent[n] * (1.15 - 0.3 * pos);
    }
    phrase_start = end;
  }

  smooth(tr.voice, 0.008, fs);
  smooth(tr.noise, 0.005, fs);
  smooth(tr.nasal, 0.01, fs);
  for (auto* v : {&tr.f1, &tr.f2, &tr.f3}) smooth(*v, 0.02, fs);
  smooth(tr.noise_fc, 0.01, fs);
  smooth(tr.f0, 0.05, fs);

  std::array<Resonator, 4> formants;
  Resonator nasal_pole;
  BandPass frication;
  BandPass breath;
  breath.set(3000.0, 3000.0, fs);
  double tilt = 0.0, tilt2 = 0.0;
  const double tilt_pole = std::exp(-2.0 * kPi * 150.0 / fs);
  double phase = 0.0;
  double jitter = 0.0;
  double prev_out = 0.0;

  // Voiced and noise paths are rendered separately and mixed by level, so
  // the noise levels above are relative to a full-gain vowel.
  std::vector<double> voiced_path(length), noise_path(length);
  for (std::size_t n = 0; n < length; ++n) {
    if (n % kBlock == 0) {
      formants[0].set(tr.f1[n], 80.0 + 40.0 * tr.nasal[n], fs);
      formants[1].set(tr.f2[n], 100.0 + 150.0 * tr.nasal[n], fs);
      formants[2].set(tr.f3[n], 150.0, fs);
      formants[3].set(3500.0 * formant_scale, 250.0, fs);
      nasal_pole.set(250.0, 100.0, fs);
      frication.set(tr.noise_fc[n], tr.noise_bw[n], fs);
      jitter = 0.98 * jitter + 0.02 * rng.normal();
    }
    const double f0 = tr.f0[n] * (1.0 + 0.01 * std::sin(2.0 * kPi * 5.0 * n / fs) + 0.02 * jitter);
    phase += f0 / fs;
    double pulse = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      pulse = 1.0;
    }
    // Glottal source rolls off at 12 dB/octave.
    tilt = (1.0 - tilt_pole) * pulse + tilt_pole * tilt;
    tilt2 = (1.0 - tilt_pole) * tilt + tilt_pole * tilt2;
    double voiced = tr.voice[n] * tilt2;
    for (auto& r : formants) voiced = r(voiced);
    voiced = (1.0 - tr.nasal[n]) * voiced + tr.nasal[n] * nasal_pole(voiced);
    // Lip radiation: first difference.
    voiced_path[n] = voiced - prev_out;
    prev_out = voiced;

    const double pitch_sync = 0.6 + 0.4 * std::cos(2.0 * kPi * phase);
    noise_path[n] = tr.noise[n] * frication(rng.normal()) +
                    kBreathLevel * tr.voice[n] * pitch_sync * breath(rng.normal());
  }

  double active_power = 0.0, active_gain = 0.0;
  std::size_t active = 0;
  for (std::size_t n = 0; n < length; ++n) {
    if (tr.voice[n] < 0.05) continue;
    active_power += voiced_path[n] * voiced_path[n];
    active_gain += tr.voice[n];
    ++active;
  }
  const double voiced_scale =
      active > 0 && active_power > 0.0 ? (active_gain / active) / std::sqrt(active_power / active) : 0.0;

  AudioSignal out;
  out.sample_rate_hz = cfg.sample_rate_hz;
  out.samples.resize(length);
  for (std::size_t n = 0; n < length; ++n) out.samples[n] = voiced_scale * voiced_path[n] + noise_path[n];

  AudioSignal normalized = normalize_rms(out, cfg.target_dbfs);
  const double floor = std::pow(10.0, cfg.noise_floor_dbfs / 20.0);
  for (double& s : normalized.samples) s += floor * rng.normal();
  return normalized;
}

AudioSignal white_noise(std::size_t length, int sample_rate_hz, double rms_level,
                        std::uint64_t seed) {
  detail::SplitMix rng(detail::SplitMix::mix(seed ^ 0xa5a5a5a5deadbeefull));
  AudioSignal out;
  out.sample_rate_hz = sample_rate_hz;
  out.samples.resize(length);
  for (double& s : out.samples) s = rng.normal();
  const double level = rms(out.samples);
  if (level > 0.0)
    for (double& s : out.samples) s *= rms_level / level;
  return out;
}

AudioSignal add_noise_at_snr(const AudioSignal& clean, double snr_db, std::uint64_t seed) {
  const double noise_rms = rms(clean.samples) * std::pow(10.0, -snr_db / 20.0);
  const AudioSignal noise = white_noise(clean.size(), clean.sample_rate_hz, noise_rms, seed);
  AudioSignal out = clean;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += noise.samples[i];
  return out;
}

}  // namespace cicoder
