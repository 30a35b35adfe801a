#pragma once

// Deterministic synthetic PTL recordings and camera frames.
//
// Audio: red = 2.0 kHz 50 ms pulses once per second; green = 2.5 kHz 30 ms
// pulses eight times per second, optionally preceded by a 400 ms rising chirp
// (the sound played when the light switches). White noise is added at the
// requested SNR relative to the tone. Robot motion adds 2 Hz footstep bursts
// in the 100-400 Hz band plus broadband motor noise.
//
// Frames: a dark housing on a grey background with one lit, saturated disc;
// an optional grey occluder covers part of the housing from the left.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ptl/audio_dsp.hpp"
#include "ptl/dataset_io.hpp"
#include "ptl/error.hpp"
#include "ptl/label.hpp"
#include "ptl/vision.hpp"

namespace ptl {

struct AudioSynthOptions {
  double tone_amplitude = 0.25;
  bool transition = false;          // green only: start with the switching chirp
  double footstep_gain = 3.0;       // burst peak relative to tone amplitude
  double motor_level_db = 8.0;      // motor noise rms relative to tone rms
  double motor_level_spread_db = 6.0;  // per-recording jitter of the motor level
};

struct FrameSynthOptions {
  double position_jitter = 0.10;  // max housing offset as a fraction of the image size
  double noise_sigma = 4.0;       // camera noise, 8-bit units
  std::uint64_t noise_seed = 0;   // 0: derive the noise from the frame seed
};

namespace detail {

inline std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

/// Raised-cosine edges of `ramp` samples on a pulse of `len` samples.
inline double pulse_envelope(std::size_t i, std::size_t len, std::size_t ramp) noexcept {
  if (ramp == 0) return 1.0;
  if (i < ramp) return 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(ramp));
  if (i + ramp >= len)
    return 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(len - 1 - i) / static_cast<double>(ramp));
  return 1.0;
}

}  // namespace detail

struct PulsePattern {
  double tone_hz;
  double pulse_ms;
  double period_ms;
};

inline PulsePattern pulse_pattern(Label label) {
  if (label == Label::Red) return {2000.0, 50.0, 1000.0};
  if (label == Label::Green) return {2500.0, 30.0, 125.0};
  throw Error(Errc::invalid_config, "audio can only be synthesised for red or green");
}

inline AudioClip synth_audio(Label label, double duration_ms, int sample_rate, double snr_db, bool motion_noise,
                             std::uint64_t seed, const AudioSynthOptions& opt = {}) {
  if (!(duration_ms >= 250.0)) throw Error(Errc::invalid_config, "duration must be >= 250 ms");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw Error(Errc::invalid_config, "SNR must be a number or +inf");
  if (sample_rate < 8000) throw Error(Errc::invalid_config, "sample rate must be >= 8000 Hz");
  const PulsePattern pat = pulse_pattern(label);

  auto rng = detail::seeded(seed, 0xa0d10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double sr = sample_rate;
  const std::size_t n = samples_for_ms(duration_ms, sample_rate);
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.assign(n, 0.0);
  const double amp = opt.tone_amplitude;

  std::size_t pattern_start = 0;
  if (label == Label::Green && opt.transition) {
    // Linear chirp 600 -> 1400 Hz over 400 ms.
    const std::size_t len = std::min(n, samples_for_ms(400.0, sample_rate));
    const double f0 = 600.0, f1 = 1400.0, dur = 0.4;
    const std::size_t ramp = samples_for_ms(5.0, sample_rate);
    for (std::size_t i = 0; i < len; ++i) {
      const double t = static_cast<double>(i) / sr;
      const double phase = 2.0 * std::numbers::pi * (f0 * t + 0.5 * (f1 - f0) / dur * t * t);
      clip.samples[i] += amp * detail::pulse_envelope(i, len, ramp) * std::sin(phase);
    }
    pattern_start = len;
  }

  // Pulse train with a random phase so that recordings do not line up.
  const double period = pat.period_ms / 1000.0 * sr;
  const std::size_t pulse_len = samples_for_ms(pat.pulse_ms, sample_rate);
  const std::size_t ramp = samples_for_ms(3.0, sample_rate);
  const double offset = unit(rng) * period;
  const double tone_phase = unit(rng) * 2.0 * std::numbers::pi;
  for (double start = static_cast<double>(pattern_start) + offset - period; start < static_cast<double>(n);
       start += period) {
    const auto s0 = static_cast<long long>(std::llround(start));
    for (std::size_t i = 0; i < pulse_len; ++i) {
      const long long at = s0 + static_cast<long long>(i);
      if (at < static_cast<long long>(pattern_start) || at >= static_cast<long long>(n)) continue;
      const double t = static_cast<double>(at) / sr;
      clip.samples[static_cast<std::size_t>(at)] +=
          amp * detail::pulse_envelope(i, pulse_len, ramp) * std::sin(2.0 * std::numbers::pi * pat.tone_hz * t + tone_phase);
    }
  }

  const double tone_rms = amp / std::numbers::sqrt2;
  if (std::isfinite(snr_db)) {
    const double sigma = tone_rms * std::pow(10.0, -snr_db / 20.0);
    for (auto& s : clip.samples) s += sigma * gauss(rng);
  }

  if (motion_noise) {
    // Footsteps: 80 ms bursts at 2 Hz built from random 100-400 Hz partials.
    const std::size_t burst_len = samples_for_ms(80.0, sample_rate);
    const double step_period = 0.5 * sr;
    const double step_offset = unit(rng) * step_period;
    for (double start = step_offset - step_period; start < static_cast<double>(n); start += step_period) {
      constexpr int kPartials = 12;
      std::array<double, kPartials> freq{}, phase{};
      for (int k = 0; k < kPartials; ++k) {
        freq[k] = 100.0 + 300.0 * unit(rng);
        phase[k] = 2.0 * std::numbers::pi * unit(rng);
      }
      const double gain = opt.footstep_gain * amp * (0.6 + 0.8 * unit(rng)) / std::sqrt(static_cast<double>(kPartials));
      const auto s0 = static_cast<long long>(std::llround(start));
      for (std::size_t i = 0; i < burst_len; ++i) {
        const long long at = s0 + static_cast<long long>(i);
        if (at < 0 || at >= static_cast<long long>(n)) continue;
        const double t = static_cast<double>(i) / sr;
        const double env = std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(burst_len));
        double v = 0.0;
        for (int k = 0; k < kPartials; ++k) v += std::sin(2.0 * std::numbers::pi * freq[k] * t + phase[k]);
        clip.samples[static_cast<std::size_t>(at)] += gain * env * v;
      }
    }
    // Motors: continuous broadband noise.
    const double level_db = opt.motor_level_db + opt.motor_level_spread_db * (2.0 * unit(rng) - 1.0);
    const double sigma = tone_rms * std::pow(10.0, level_db / 20.0);
    for (auto& s : clip.samples) s += sigma * gauss(rng);
  }
  // Recorder gain: loud recordings are scaled down so they fit the 16-bit range.
  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::fabs(s));
  if (peak > 0.99)
    for (auto& s : clip.samples) s *= 0.99 / peak;
  return clip;
}

/// Inverse of rgb_to_hsv on the [0,180) hue scale.
inline Rgb hsv_to_rgb(double h, double s, double v) noexcept {
  const double hh = std::fmod(std::fmod(h * 2.0, 360.0) + 360.0, 360.0) / 60.0;
  const double sat = s / 255.0;
  const double c = v * sat;
  const double x = c * (1.0 - std::fabs(std::fmod(hh, 2.0) - 1.0));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hh)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  auto to8 = [](double u) { return static_cast<std::uint8_t>(std::clamp(std::lround(u), 0l, 255l)); };
  return {to8(r + m), to8(g + m), to8(b + m)};
}

inline constexpr double kSynthGreenHue = 90.0;
inline constexpr double kSynthRedHue = 175.0;

struct SynthFrame {
  ImageRGB image;
  BoundingBox truth;  // housing extent
};

/// `jitter` perturbs the lamp hue uniformly within +-jitter bins.
inline SynthFrame synth_frame(Label label, int width, int height, double occlusion_fraction, double jitter,
                              std::uint64_t seed, const FrameSynthOptions& opt = {}) {
  if (width < 64 || height < 64) throw Error(Errc::invalid_config, "frames must be at least 64x64");
  if (!(occlusion_fraction >= 0.0 && occlusion_fraction <= 1.0))
    throw Error(Errc::invalid_config, "occlusion fraction must lie in [0, 1]");
  if (label != Label::Red && label != Label::Green) throw Error(Errc::invalid_config, "frame label must be red or green");
  if (!(jitter >= 0.0)) throw Error(Errc::invalid_config, "hue jitter must be non-negative");

  auto rng = detail::seeded(seed, 0xf4a3e);
  auto noise_rng = detail::seeded(opt.noise_seed != 0 ? opt.noise_seed : seed, 0x5e75);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, opt.noise_sigma);

  SynthFrame out;
  ImageRGB& img = out.image;
  img = ImageRGB(width, height, Rgb{110, 110, 110});

  const int hw = std::max(8, static_cast<int>(std::lround(0.28 * width)));
  const int hh = std::max(16, static_cast<int>(std::lround(0.56 * height)));
  const double jx = opt.position_jitter * width * (2.0 * unit(rng) - 1.0);
  const double jy = opt.position_jitter * height * (2.0 * unit(rng) - 1.0);
  const int x0 = std::clamp(static_cast<int>(std::lround((width - hw) / 2.0 + jx)), 0, width - hw);
  const int y0 = std::clamp(static_cast<int>(std::lround((height - hh) / 2.0 + jy)), 0, height - hh);
  for (int y = y0; y < y0 + hh; ++y)
    for (int x = x0; x < x0 + hw; ++x) img.set(x, y, Rgb{35, 35, 35});

  const double hue = (label == Label::Red ? kSynthRedHue : kSynthGreenHue) + jitter * (2.0 * unit(rng) - 1.0);
  const Rgb lamp = hsv_to_rgb(hue, 235.0, 235.0);
  const double r = 0.36 * hw;
  const double ccx = x0 + hw / 2.0;
  const double ccy = y0 + (label == Label::Red ? 0.25 : 0.75) * hh;
  for (int y = y0; y < y0 + hh; ++y)
    for (int x = x0; x < x0 + hw; ++x) {
      const double dx = x + 0.5 - ccx, dy = y + 0.5 - ccy;
      if (dx * dx + dy * dy <= r * r) img.set(x, y, lamp);
    }

  const int cover = static_cast<int>(std::lround(occlusion_fraction * hw));
  for (int y = y0; y < y0 + hh; ++y)
    for (int x = x0; x < x0 + cover; ++x) img.set(x, y, Rgb{128, 128, 128});

  for (auto& byte : img.data)
    byte = static_cast<std::uint8_t>(std::clamp(std::lround(byte + gauss(noise_rng)), 0l, 255l));

  out.truth = from_pixels(PixelRect{x0, y0, x0 + hw, y0 + hh}, width, height);
  out.truth.label = label;
  out.truth.confidence = 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Corpus generation

struct OcclusionRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct CorpusConfig {
  std::array<int, 3> windows_per_condition{100, 100, 100};  // clean, occluded, moving
  double snr_db = 10.0;
  double fps = 30.0;
  std::uint64_t seed = 0;
  double window_ms = 250.0;
  int sample_rate = 44100;
  int windows_per_session = 8;
  int frame_width = 64;
  int frame_height = 64;
  double hue_jitter = 3.0;
  double transition_probability = 0.25;
  std::array<OcclusionRange, 3> occlusion{OcclusionRange{0.0, 0.0}, OcclusionRange{1.0, 1.0},
                                          OcclusionRange{0.0, 0.8}};
  double moving_position_jitter = 0.10;  // camera shake per frame while moving
  AudioSynthOptions audio{};
};

inline void validate(const CorpusConfig& cfg) {
  for (int n : cfg.windows_per_condition)
    if (n <= 0) throw Error(Errc::invalid_config, "window counts must be positive");
  if (!(cfg.fps > 0) || !(cfg.window_ms >= 250.0) || cfg.windows_per_session < 1)
    throw Error(Errc::invalid_config, "invalid fps, window length or session length");
  for (const auto& o : cfg.occlusion)
    if (!(o.lo >= 0 && o.lo <= o.hi && o.hi <= 1.0)) throw Error(Errc::invalid_config, "invalid occlusion range");
}

/// Writes audio/<session>.wav, frames/<session>_fNNNN.ppm and manifest.jsonl
/// under `out_dir` and returns the corpus. Each session is one continuous
/// recording of a single light state; only frames that fall inside a window's
/// first floor(fps * window) frame slots are stored.
inline Corpus synth_corpus(const CorpusConfig& cfg, const std::string& out_dir) {
  validate(cfg);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "audio", ec);
  if (!ec) fs::create_directories(fs::path(out_dir) / "frames", ec);
  if (ec) throw Error(Errc::io_error, "cannot create corpus directories under " + out_dir + ": " + ec.message());

  Corpus corpus;
  corpus.root = out_dir;
  corpus.window_ms = cfg.window_ms;
  corpus.fps = cfg.fps;
  corpus.sample_rate = cfg.sample_rate;

  const int frames_per_window = static_cast<int>(std::floor(cfg.fps * cfg.window_ms / 1000.0 + 1e-9));
  std::uint64_t stream = 0;
  for (std::size_t ci = 0; ci < kConditions.size(); ++ci) {
    const Condition cond = kConditions[ci];
    const bool moving = cond == Condition::moving;
    const int total = cfg.windows_per_condition[ci];
    const int n_sessions = (total + cfg.windows_per_session - 1) / cfg.windows_per_session;
    for (int s = 0; s < n_sessions; ++s) {
      const int n_windows = std::min(cfg.windows_per_session, total - s * cfg.windows_per_session);
      const Label label = (s % 2 == 0) ? Label::Red : Label::Green;
      char name[64];
      std::snprintf(name, sizeof name, "%s_s%03d", std::string(to_string(cond)).c_str(), s);
      const std::string session = name;

      auto rng = detail::seeded(cfg.seed, ++stream);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      AudioSynthOptions aopt = cfg.audio;
      aopt.transition = label == Label::Green && unit(rng) < cfg.transition_probability;
      const AudioClip audio =
          synth_audio(label, n_windows * cfg.window_ms, cfg.sample_rate, cfg.snr_db, moving, rng(), aopt);
      const std::string audio_rel = "audio/" + session + ".wav";
      write_wav(audio, corpus.resolve(audio_rel));

      const std::uint64_t stationary_frame_seed = rng();
      for (int w = 0; w < n_windows; ++w) {
        const auto& occ = cfg.occlusion[ci];
        const double occlusion = occ.lo + (occ.hi - occ.lo) * unit(rng);
        CorpusItem item;
        char id[96];
        std::snprintf(id, sizeof id, "%s_w%02d", session.c_str(), w);
        item.id = id;
        item.label = label;
        item.condition = cond;
        item.session = session;
        item.audio = audio_rel;
        item.offset_ms = w * cfg.window_ms;
        const int first = static_cast<int>(std::ceil(item.offset_ms * cfg.fps / 1000.0 - 1e-9));
        for (int f = 0; f < frames_per_window; ++f) {
          const int frame_index = first + f;
          // A stationary camera keeps the same geometry; only sensor noise changes.
          FrameSynthOptions fopt;
          fopt.position_jitter = moving ? cfg.moving_position_jitter : 0.10;
          const std::uint64_t frame_seed = rng() | 1u;
          fopt.noise_seed = frame_seed;
          const SynthFrame frame = synth_frame(label, cfg.frame_width, cfg.frame_height, occlusion, cfg.hue_jitter,
                                               moving ? frame_seed : stationary_frame_seed, fopt);
          char fname[128];
          std::snprintf(fname, sizeof fname, "frames/%s_f%04d.ppm", session.c_str(), frame_index);
          write_image(frame.image, corpus.resolve(fname));
          item.frames.emplace_back(fname);
        }
        corpus.items.push_back(std::move(item));
      }
    }
  }
  write_manifest(corpus, corpus.resolve("manifest.jsonl"));
  return corpus;
}

}  // namespace ptl
