#pragma once

// MFCC feature extraction for short audio windows.
//
// Pipeline per analysis window: Hann taper, radix-2 FFT, power spectrum,
// triangular mel filterbank (HTK mel scale), natural log with a floor, and an
// orthonormal DCT-II. Coefficient c0 is dropped; a clip is summarised by the
// mean of its per-window cepstra (and optionally of their regression deltas).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ptl/error.hpp"

namespace ptl {

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 44100;

  double duration_ms() const noexcept {
    return sample_rate > 0 ? 1000.0 * static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

enum class DeltaMode { none, delta, delta_delta };

enum class FeatureLayout { mfcc, mfcc_delta, mfcc_delta_delta, fused };

inline std::string to_string(DeltaMode m) {
  switch (m) {
    case DeltaMode::none: return "none";
    case DeltaMode::delta: return "delta";
    case DeltaMode::delta_delta: return "delta_delta";
  }
  return "none";
}

inline FeatureLayout layout_for(DeltaMode m) noexcept {
  switch (m) {
    case DeltaMode::none: return FeatureLayout::mfcc;
    case DeltaMode::delta: return FeatureLayout::mfcc_delta;
    case DeltaMode::delta_delta: return FeatureLayout::mfcc_delta_delta;
  }
  return FeatureLayout::mfcc;
}

/// Dimension implied by a layout for `n_mfcc` cepstral coefficients.
inline std::size_t layout_dimension(FeatureLayout layout, std::size_t n_mfcc) noexcept {
  switch (layout) {
    case FeatureLayout::mfcc: return n_mfcc;
    case FeatureLayout::mfcc_delta: return 2 * n_mfcc;
    case FeatureLayout::mfcc_delta_delta: return 3 * n_mfcc;
    case FeatureLayout::fused: return n_mfcc + 2;
  }
  return n_mfcc;
}

struct FeatureVector {
  std::vector<double> values;
  FeatureLayout layout = FeatureLayout::mfcc;

  std::size_t size() const noexcept { return values.size(); }
};

struct MfccConfig {
  int n_mfcc = 24;
  double analysis_window_ms = 25.0;
  double hop_ms = 10.0;
  int n_mels = 40;
  int fft_size = 0;  // 0 selects the next power of two >= window length
  double log_floor = 1e-10;
  DeltaMode include_deltas = DeltaMode::none;
  int delta_half_window = 2;
};

inline std::size_t samples_for_ms(double ms, int sample_rate) {
  return static_cast<std::size_t>(std::llround(ms * sample_rate / 1000.0));
}

inline std::size_t next_pow2(std::size_t n) noexcept {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

inline double hz_to_mel(double hz) noexcept { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) noexcept { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace detail {

/// In-place iterative radix-2 FFT. `twiddles` holds exp(-2*pi*i*k/n), k < n/2.
inline void fft_inplace(std::span<std::complex<double>> data,
                        std::span<const std::complex<double>> twiddles) {
  const std::size_t n = data.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const auto t = twiddles[k * stride] * data[start + k + half];
        const auto u = data[start + k];
        data[start + k] = u + t;
        data[start + k + half] = u - t;
      }
    }
  }
}

inline std::vector<std::complex<double>> make_twiddles(std::size_t n) {
  std::vector<std::complex<double>> tw(n / 2);
  for (std::size_t k = 0; k < tw.size(); ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    tw[k] = {std::cos(angle), std::sin(angle)};
  }
  return tw;
}

}  // namespace detail

/// Orthonormal DCT-II rows 1..n_out applied to `input` (row 0 is skipped).
/// Constant input maps to zeros up to rounding.
class CepstralTransform {
 public:
  CepstralTransform(std::size_t n_in, std::size_t n_out) : n_in_(n_in), n_out_(n_out), basis_(n_in * n_out) {
    const double scale = std::sqrt(2.0 / static_cast<double>(n_in));
    for (std::size_t k = 0; k < n_out; ++k) {
      for (std::size_t m = 0; m < n_in; ++m) {
        // Reduce the argument before calling cos so every row stays accurate.
        const std::size_t phase = (k + 1) * (2 * m + 1) % (4 * n_in);
        basis_[k * n_in + m] =
            scale * std::cos(std::numbers::pi * static_cast<double>(phase) / (2.0 * static_cast<double>(n_in)));
      }
    }
  }

  std::size_t inputs() const noexcept { return n_in_; }
  std::size_t outputs() const noexcept { return n_out_; }

  void apply(std::span<const double> in, std::span<double> out) const {
    for (std::size_t k = 0; k < n_out_; ++k) {
      double acc = 0.0;
      const double* row = basis_.data() + k * n_in_;
      for (std::size_t m = 0; m < n_in_; ++m) acc += row[m] * in[m];
      out[k] = acc;
    }
  }

  std::vector<double> apply(std::span<const double> in) const {
    std::vector<double> out(n_out_);
    apply(in, out);
    return out;
  }

 private:
  std::size_t n_in_;
  std::size_t n_out_;
  std::vector<double> basis_;
};

/// Triangular filters with edges equally spaced on the mel scale between 0 Hz
/// and Nyquist. Weights are evaluated at each bin's centre frequency.
inline std::vector<std::vector<double>> mel_filterbank(int n_mels, std::size_t fft_size, int sample_rate) {
  const std::size_t n_bins = fft_size / 2 + 1;
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));

  std::vector<std::vector<double>> bank(static_cast<std::size_t>(n_mels), std::vector<double>(n_bins, 0.0));
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t b = 0; b < n_bins; ++b) {
      const double f = static_cast<double>(b) * sample_rate / static_cast<double>(fft_size);
      double w = 0.0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      bank[m][b] = w;
    }
  }
  return bank;
}

inline void validate(const MfccConfig& cfg, int sample_rate) {
  auto fail = [](const std::string& msg) { throw Error(Errc::invalid_config, msg); };
  if (sample_rate < 8000) fail("sample rate must be >= 8000 Hz, got " + std::to_string(sample_rate));
  if (cfg.n_mels < 2) fail("n_mels must be >= 2");
  if (cfg.n_mfcc < 1 || cfg.n_mfcc >= cfg.n_mels)
    fail("n_mfcc must lie in [1, n_mels), got " + std::to_string(cfg.n_mfcc));
  if (!(cfg.analysis_window_ms > 0.0) || !(cfg.hop_ms > 0.0)) fail("analysis window and hop must be positive");
  if (!(cfg.log_floor > 0.0)) fail("log_floor must be positive");
  if (cfg.delta_half_window < 1) fail("delta half window must be >= 1");
  const std::size_t win = samples_for_ms(cfg.analysis_window_ms, sample_rate);
  const std::size_t hop = samples_for_ms(cfg.hop_ms, sample_rate);
  if (win < 2 || hop < 1) fail("analysis window or hop shorter than one sample");
  if (cfg.fft_size != 0) {
    const auto n = static_cast<std::size_t>(cfg.fft_size);
    if (cfg.fft_size < 0 || next_pow2(n) != n) fail("fft_size must be a power of two");
    if (n < win) fail("fft_size smaller than the analysis window");
  }
}

/// Regression deltas with boundary replication:
///   d_t = sum_{n=1..M} n (c_{t+n} - c_{t-n}) / (2 sum n^2)
/// `order` 2 applies the formula twice.
inline std::vector<std::vector<double>> compute_deltas(const std::vector<std::vector<double>>& frames, int order,
                                                       int half_window) {
  if (order != 1 && order != 2) throw Error(Errc::invalid_config, "delta order must be 1 or 2");
  if (half_window < 1) throw Error(Errc::invalid_config, "delta half window must be >= 1");
  const auto needed = static_cast<std::size_t>(2 * half_window + 1);
  if (frames.size() < needed)
    throw Error(Errc::too_few_frames, "need " + std::to_string(needed) + " frames, got " + std::to_string(frames.size()));
  const std::size_t dim = frames.front().size();
  for (const auto& f : frames)
    if (f.size() != dim) throw Error(Errc::dimension_mismatch, "delta input frames differ in length");

  double denom = 0.0;
  for (int n = 1; n <= half_window; ++n) denom += static_cast<double>(n * n);
  denom *= 2.0;

  const auto t_max = static_cast<std::ptrdiff_t>(frames.size()) - 1;
  std::vector<std::vector<double>> out(frames.size(), std::vector<double>(dim, 0.0));
  for (std::ptrdiff_t t = 0; t <= t_max; ++t) {
    auto& d = out[static_cast<std::size_t>(t)];
    for (int n = 1; n <= half_window; ++n) {
      const auto& ahead = frames[static_cast<std::size_t>(std::min(t + n, t_max))];
      const auto& behind = frames[static_cast<std::size_t>(std::max<std::ptrdiff_t>(t - n, 0))];
      for (std::size_t j = 0; j < dim; ++j) d[j] += n * (ahead[j] - behind[j]);
    }
    for (auto& v : d) v /= denom;
  }
  return order == 1 ? out : compute_deltas(out, 1, half_window);
}

namespace detail {

inline std::vector<double> column_mean(const std::vector<std::vector<double>>& frames, std::size_t keep) {
  std::vector<double> mean(keep, 0.0);
  for (const auto& f : frames)
    for (std::size_t j = 0; j < keep; ++j) mean[j] += f[j];
  for (auto& v : mean) v /= static_cast<double>(frames.size());
  return mean;
}

}  // namespace detail

/// Clip-level summary of per-window cepstra: mean of c1..cN, followed by the
/// mean deltas (and delta-deltas) when requested. Only the first `n_keep`
/// coefficients of each frame are used, which lets one extraction at a large
/// N serve every smaller N.
inline FeatureVector summarize_cepstra(const std::vector<std::vector<double>>& frames, std::size_t n_keep,
                                       DeltaMode deltas, int half_window) {
  if (frames.empty()) throw Error(Errc::clip_too_short, "no analysis windows");
  if (frames.front().size() < n_keep) throw Error(Errc::dimension_mismatch, "requested more coefficients than extracted");
  std::vector<std::vector<double>> trimmed;
  const std::vector<std::vector<double>>* src = &frames;
  if (frames.front().size() != n_keep) {
    trimmed.reserve(frames.size());
    for (const auto& f : frames) trimmed.emplace_back(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(n_keep));
    src = &trimmed;
  }

  FeatureVector fv;
  fv.layout = layout_for(deltas);
  fv.values = detail::column_mean(*src, n_keep);
  if (deltas != DeltaMode::none) {
    const auto d1 = compute_deltas(*src, 1, half_window);
    const auto m1 = detail::column_mean(d1, n_keep);
    fv.values.insert(fv.values.end(), m1.begin(), m1.end());
    if (deltas == DeltaMode::delta_delta) {
      const auto m2 = detail::column_mean(compute_deltas(d1, 1, half_window), n_keep);
      fv.values.insert(fv.values.end(), m2.begin(), m2.end());
    }
  }
  return fv;
}

/// Precomputed analysis state for one (config, sample rate) pair. Immutable
/// after construction, so one instance may be shared across threads.
class MfccExtractor {
 public:
  MfccExtractor(const MfccConfig& cfg, int sample_rate)
      : cfg_(cfg),
        sample_rate_(sample_rate),
        window_len_((validate(cfg, sample_rate), samples_for_ms(cfg.analysis_window_ms, sample_rate))),
        hop_len_(samples_for_ms(cfg.hop_ms, sample_rate)),
        fft_size_(cfg.fft_size > 0 ? static_cast<std::size_t>(cfg.fft_size) : next_pow2(window_len_)),
        window_(window_len_),
        twiddles_(detail::make_twiddles(fft_size_)),
        filterbank_(mel_filterbank(cfg.n_mels, fft_size_, sample_rate)),
        dct_(static_cast<std::size_t>(cfg.n_mels), static_cast<std::size_t>(cfg.n_mfcc)) {
    // Symmetric Hann window.
    for (std::size_t i = 0; i < window_len_; ++i)
      window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                        static_cast<double>(window_len_ - 1));
  }

  const MfccConfig& config() const noexcept { return cfg_; }
  int sample_rate() const noexcept { return sample_rate_; }
  std::size_t window_length() const noexcept { return window_len_; }
  std::size_t hop_length() const noexcept { return hop_len_; }
  std::size_t fft_size() const noexcept { return fft_size_; }

  std::size_t frame_count(std::size_t n_samples) const noexcept {
    return n_samples < window_len_ ? 0 : 1 + (n_samples - window_len_) / hop_len_;
  }

  /// Log mel energies of every analysis window.
  std::vector<std::vector<double>> log_mel_frames(const AudioClip& clip) const {
    check_clip(clip);
    const std::size_t n_frames = frame_count(clip.samples.size());
    const std::size_t n_bins = fft_size_ / 2 + 1;
    std::vector<std::complex<double>> buf(fft_size_);
    std::vector<double> power(n_bins);
    std::vector<std::vector<double>> out(n_frames, std::vector<double>(filterbank_.size()));
    for (std::size_t f = 0; f < n_frames; ++f) {
      const double* x = clip.samples.data() + f * hop_len_;
      std::fill(buf.begin(), buf.end(), std::complex<double>{});
      for (std::size_t i = 0; i < window_len_; ++i) buf[i] = x[i] * window_[i];
      detail::fft_inplace(buf, twiddles_);
      for (std::size_t b = 0; b < n_bins; ++b) power[b] = std::norm(buf[b]);
      for (std::size_t m = 0; m < filterbank_.size(); ++m) {
        double e = 0.0;
        const auto& w = filterbank_[m];
        for (std::size_t b = 0; b < n_bins; ++b) e += w[b] * power[b];
        out[f][m] = std::log(std::max(e, cfg_.log_floor));
      }
    }
    return out;
  }

  /// Cepstra c1..cN for every analysis window.
  std::vector<std::vector<double>> cepstra(const AudioClip& clip) const {
    auto mel = log_mel_frames(clip);
    std::vector<std::vector<double>> out;
    out.reserve(mel.size());
    for (const auto& m : mel) out.push_back(dct_.apply(m));
    return out;
  }

  FeatureVector features(const AudioClip& clip) const {
    return summarize_cepstra(cepstra(clip), static_cast<std::size_t>(cfg_.n_mfcc), cfg_.include_deltas,
                             cfg_.delta_half_window);
  }

 private:
  void check_clip(const AudioClip& clip) const {
    if (clip.sample_rate != sample_rate_)
      throw Error(Errc::invalid_config, "clip sample rate " + std::to_string(clip.sample_rate) +
                                            " differs from extractor rate " + std::to_string(sample_rate_));
    if (clip.samples.size() < window_len_)
      throw Error(Errc::clip_too_short, "clip has " + std::to_string(clip.samples.size()) +
                                            " samples, analysis window needs " + std::to_string(window_len_));
    if (cfg_.include_deltas != DeltaMode::none) {
      const auto needed = static_cast<std::size_t>(2 * cfg_.delta_half_window + 1);
      if (frame_count(clip.samples.size()) < needed)
        throw Error(Errc::clip_too_short, "clip yields too few analysis windows for deltas");
    }
  }

  MfccConfig cfg_;
  int sample_rate_;
  std::size_t window_len_;
  std::size_t hop_len_;
  std::size_t fft_size_;
  std::vector<double> window_;
  std::vector<std::complex<double>> twiddles_;
  std::vector<std::vector<double>> filterbank_;
  CepstralTransform dct_;
};

/// Clip-level MFCC vector (c0 excluded). Throws `invalid_config` for a bad
/// configuration and `clip_too_short` when the clip cannot hold one window.
inline FeatureVector compute_mfcc(const AudioClip& clip, const MfccConfig& cfg) {
  return MfccExtractor(cfg, clip.sample_rate).features(clip);
}

/// Non-overlapping consecutive clips of exactly `frame_ms`; the trailing
/// remainder is dropped.
inline std::vector<AudioClip> segment_stream(std::span<const double> samples, int sample_rate, double frame_ms) {
  if (!(frame_ms > 0.0)) throw Error(Errc::invalid_config, "frame_ms must be positive");
  std::vector<AudioClip> clips;
  const std::size_t len = samples_for_ms(frame_ms, sample_rate);
  if (len == 0) return clips;
  for (std::size_t start = 0; start + len <= samples.size(); start += len)
    clips.push_back(AudioClip{{samples.begin() + static_cast<std::ptrdiff_t>(start),
                               samples.begin() + static_cast<std::ptrdiff_t>(start + len)},
                              sample_rate});
  return clips;
}

}  // namespace ptl
