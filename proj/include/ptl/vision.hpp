#pragma once

// Hue-based traffic light state from detector boxes.
//
// Hue uses the half-degree scale [0, 180) so that ranges such as 170-180 can
// be written directly. Pixels count towards a colour only when their hue bin
// falls inside the colour's range and they pass the saturation/value gates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptl/error.hpp"
#include "ptl/label.hpp"

namespace ptl {

inline constexpr int kHueBins = 180;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

struct Hsv {
  double h = 0.0;  // [0, 180)
  double s = 0.0;  // [0, 255]
  double v = 0.0;  // [0, 255]
};

/// Row-major 8-bit RGB image.
struct ImageRGB {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // 3 bytes per pixel

  ImageRGB() = default;
  ImageRGB(int w, int h, Rgb fill = {}) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3) {
    for (std::size_t i = 0; i < data.size(); i += 3) {
      data[i] = fill.r;
      data[i + 1] = fill.g;
      data[i + 2] = fill.b;
    }
  }

  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  bool empty() const noexcept { return pixel_count() == 0; }

  Rgb at(int x, int y) const noexcept {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {data[i], data[i + 1], data[i + 2]};
  }
  void set(int x, int y, Rgb p) noexcept {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    data[i] = p.r;
    data[i + 1] = p.g;
    data[i + 2] = p.b;
  }
  Rgb pixel(std::size_t idx) const noexcept { return {data[3 * idx], data[3 * idx + 1], data[3 * idx + 2]}; }

  friend bool operator==(const ImageRGB&, const ImageRGB&) = default;
};

/// Normalised detector box: centre, size, optional class and confidence.
struct BoundingBox {
  double cx = 0.5, cy = 0.5, w = 0.0, h = 0.0;
  std::optional<Label> label;
  double confidence = 1.0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline bool is_valid(const BoundingBox& b, double tol = 1e-9) noexcept {
  return b.w > 0.0 && b.h > 0.0 && b.cx - b.w / 2 >= -tol && b.cx + b.w / 2 <= 1.0 + tol &&
         b.cy - b.h / 2 >= -tol && b.cy + b.h / 2 <= 1.0 + tol && b.confidence >= 0.0 && b.confidence <= 1.0;
}

/// Inclusive range of hue bins.
struct HueRange {
  int lo = 0;
  int hi = 0;

  bool contains(int bin) const noexcept { return bin >= lo && bin <= hi; }
  friend bool operator==(const HueRange&, const HueRange&) = default;
};

inline bool is_valid(const HueRange& r) noexcept { return r.lo >= 0 && r.lo <= r.hi && r.hi <= kHueBins; }
inline bool overlaps(const HueRange& a, const HueRange& b) noexcept { return a.lo <= b.hi && b.lo <= a.hi; }

inline constexpr HueRange kDefaultGreenHue{75, 100};
inline constexpr HueRange kDefaultRedHue{170, 180};

struct PixelGates {
  int min_sat = 80;
  int min_val = 80;
};

/// Per-frame colour evidence. Undetected frames are encoded (0, 0).
struct VisionFeatures {
  double p_red = 0.0;
  double p_green = 0.0;
  bool detected = false;

  friend bool operator==(const VisionFeatures&, const VisionFeatures&) = default;
};

inline Hsv rgb_to_hsv(Rgb px) noexcept {
  const double r = px.r, g = px.g, b = px.b;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.0 ? 255.0 * delta / mx : 0.0;
  if (delta <= 0.0) return out;
  double deg;
  if (mx == r) deg = 60.0 * (g - b) / delta;
  else if (mx == g) deg = 120.0 + 60.0 * (b - r) / delta;
  else deg = 240.0 + 60.0 * (r - g) / delta;
  if (deg < 0.0) deg += 360.0;
  out.h = deg / 2.0;
  if (out.h >= kHueBins) out.h -= kHueBins;
  return out;
}

inline int hue_bin(double h) noexcept { return std::clamp(static_cast<int>(std::floor(h)), 0, kHueBins - 1); }

using HueHistogram = std::array<std::size_t, kHueBins>;

inline HueHistogram hue_histogram(const ImageRGB& region) {
  if (region.empty()) throw Error(Errc::empty_region, "hue histogram of an empty region");
  HueHistogram counts{};
  for (std::size_t i = 0; i < region.pixel_count(); ++i) ++counts[hue_bin(rgb_to_hsv(region.pixel(i)).h)];
  return counts;
}

/// Percentages from raw counts; zero evidence yields (0, 0).
inline VisionFeatures percentages_from_counts(std::size_t red, std::size_t green) noexcept {
  VisionFeatures f;
  f.detected = true;
  const std::size_t total = red + green;
  if (total == 0) return f;
  f.p_red = 100.0 * static_cast<double>(red) / static_cast<double>(total);
  f.p_green = 100.0 * static_cast<double>(green) / static_cast<double>(total);
  return f;
}

inline VisionFeatures pixel_percentages(const ImageRGB& region, HueRange red, HueRange green, PixelGates gates = {}) {
  if (!is_valid(red) || !is_valid(green)) throw Error(Errc::invalid_config, "hue range must satisfy 0 <= lo <= hi <= 180");
  if (overlaps(red, green)) throw Error(Errc::overlapping_ranges, "red and green hue ranges overlap");
  if (region.empty()) throw Error(Errc::empty_region, "pixel percentages of an empty region");
  std::size_t n_red = 0, n_green = 0;
  for (std::size_t i = 0; i < region.pixel_count(); ++i) {
    const Hsv hsv = rgb_to_hsv(region.pixel(i));
    if (hsv.s < gates.min_sat || hsv.v < gates.min_val) continue;
    const int bin = hue_bin(hsv.h);
    if (red.contains(bin)) ++n_red;
    else if (green.contains(bin)) ++n_green;
  }
  return percentages_from_counts(n_red, n_green);
}

/// Three-way decision: Unavailable when nothing was detected or the two
/// percentages tie, otherwise the larger colour.
inline Label classify_hue(const VisionFeatures& f) noexcept {
  if (!f.detected || f.p_red == f.p_green) return Label::Unavailable;
  return f.p_red > f.p_green ? Label::Red : Label::Green;
}

/// Pixel rectangle [x0, x1) x [y0, y1) covered by a normalised box.
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
};

inline PixelRect to_pixels(const BoundingBox& box, int width, int height) noexcept {
  constexpr double eps = 1e-9;
  PixelRect r;
  r.x0 = std::clamp(static_cast<int>(std::floor((box.cx - box.w / 2) * width + eps)), 0, width);
  r.x1 = std::clamp(static_cast<int>(std::ceil((box.cx + box.w / 2) * width - eps)), 0, width);
  r.y0 = std::clamp(static_cast<int>(std::floor((box.cy - box.h / 2) * height + eps)), 0, height);
  r.y1 = std::clamp(static_cast<int>(std::ceil((box.cy + box.h / 2) * height - eps)), 0, height);
  return r;
}

inline BoundingBox from_pixels(const PixelRect& r, int width, int height) noexcept {
  BoundingBox b;
  b.cx = (r.x0 + r.x1) / 2.0 / width;
  b.cy = (r.y0 + r.y1) / 2.0 / height;
  b.w = static_cast<double>(r.width()) / width;
  b.h = static_cast<double>(r.height()) / height;
  return b;
}

inline ImageRGB crop(const ImageRGB& image, const PixelRect& r) {
  ImageRGB out(std::max(r.width(), 0), std::max(r.height(), 0));
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.set(x, y, image.at(r.x0 + x, r.y0 + y));
  return out;
}

inline ImageRGB crop(const ImageRGB& image, const BoundingBox& box) {
  return crop(image, to_pixels(box, image.width, image.height));
}

struct BlobDetectorParams {
  PixelGates gates{};
  std::size_t min_area = 16;  // smaller components are treated as sensor noise
};

/// Largest 4-connected component of saturated, bright pixels. Confidence is
/// the component's fill ratio of its bounding rectangle.
inline std::vector<BoundingBox> detect_blobs(const ImageRGB& image, const BlobDetectorParams& params = {}) {
  std::vector<BoundingBox> out;
  if (image.empty()) return out;
  const std::size_t n = image.pixel_count();
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Hsv hsv = rgb_to_hsv(image.pixel(i));
    mask[i] = hsv.s >= params.gates.min_sat && hsv.v >= params.gates.min_val;
  }

  std::vector<std::uint32_t> stack;
  std::size_t best_count = 0;
  PixelRect best{};
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (mask[seed] != 1) continue;
    mask[seed] = 2;
    stack.assign(1, static_cast<std::uint32_t>(seed));
    std::size_t count = 0;
    PixelRect rect{image.width, image.height, 0, 0};
    while (!stack.empty()) {
      const std::uint32_t idx = stack.back();
      stack.pop_back();
      ++count;
      const int x = static_cast<int>(idx % image.width);
      const int y = static_cast<int>(idx / image.width);
      rect.x0 = std::min(rect.x0, x);
      rect.y0 = std::min(rect.y0, y);
      rect.x1 = std::max(rect.x1, x + 1);
      rect.y1 = std::max(rect.y1, y + 1);
      auto visit = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= image.width || ny >= image.height) return;
        const std::size_t j = static_cast<std::size_t>(ny) * image.width + nx;
        if (mask[j] == 1) {
          mask[j] = 2;
          stack.push_back(static_cast<std::uint32_t>(j));
        }
      };
      visit(x - 1, y);
      visit(x + 1, y);
      visit(x, y - 1);
      visit(x, y + 1);
    }
    if (count > best_count) {
      best_count = count;
      best = rect;
    }
  }
  if (best_count == 0 || best_count < params.min_area) return out;
  BoundingBox box = from_pixels(best, image.width, image.height);
  box.confidence = static_cast<double>(best_count) / (static_cast<double>(best.width()) * best.height());
  out.push_back(box);
  return out;
}

/// Vision evidence for one video frame.
struct FrameObservation {
  VisionFeatures features;
  double confidence = 0.0;  // detection confidence of the box used, 0 when none
  Label hue_label = Label::Unavailable;
};

struct HueClassifierConfig {
  HueRange red = kDefaultRedHue;
  HueRange green = kDefaultGreenHue;
  PixelGates gates{};
};

/// Uses the most confident box (first on ties); no box gives an undetected frame.
inline FrameObservation observe_frame(const ImageRGB& image, std::span<const BoundingBox> boxes,
                                      const HueClassifierConfig& cfg) {
  FrameObservation obs;
  if (boxes.empty()) return obs;
  const BoundingBox* best = &boxes.front();
  for (const auto& b : boxes)
    if (b.confidence > best->confidence) best = &b;
  const ImageRGB region = crop(image, *best);
  if (region.empty()) return obs;
  obs.features = pixel_percentages(region, cfg.red, cfg.green, cfg.gates);
  obs.confidence = best->confidence;
  obs.hue_label = classify_hue(obs.features);
  return obs;
}

struct LabeledRegion {
  ImageRGB region;
  Label label = Label::Red;
};

struct HueCalibration {
  HueRange green;
  HueRange red;
  std::array<double, kHueBins> green_histogram{};
  std::array<double, kHueBins> red_histogram{};
};

namespace detail {

inline HueRange grow_range(const std::array<double, kHueBins>& hist, double peak_fraction) {
  const auto peak_it = std::max_element(hist.begin(), hist.end());
  const int peak = static_cast<int>(peak_it - hist.begin());
  const double threshold = peak_fraction * *peak_it;
  HueRange r{peak, peak};
  while (r.lo > 0 && hist[r.lo - 1] >= threshold) --r.lo;
  while (r.hi < kHueBins - 1 && hist[r.hi + 1] >= threshold) ++r.hi;
  return r;
}

}  // namespace detail

/// Averages per-region hue histograms for each colour, then grows a
/// contiguous range around the peak bin while bins stay at or above
/// `peak_fraction` of the peak. With `balance`, the larger class is cut down to
/// the first N regions where N is the smaller class's count.
inline HueCalibration calibrate_hue_ranges(std::span<const LabeledRegion> regions, bool balance,
                                           double peak_fraction = 0.10) {
  if (!(peak_fraction > 0.0 && peak_fraction <= 1.0))
    throw Error(Errc::invalid_config, "peak_fraction must lie in (0, 1]");
  std::vector<const ImageRGB*> reds, greens;
  for (const auto& r : regions) {
    if (r.region.empty()) continue;
    if (r.label == Label::Red) reds.push_back(&r.region);
    else if (r.label == Label::Green) greens.push_back(&r.region);
  }
  if (reds.empty()) throw Error(Errc::missing_label, "no red regions for hue calibration");
  if (greens.empty()) throw Error(Errc::missing_label, "no green regions for hue calibration");
  if (balance) {
    const std::size_t n = std::min(reds.size(), greens.size());
    reds.resize(n);
    greens.resize(n);
  }

  auto average = [](const std::vector<const ImageRGB*>& imgs) {
    std::array<double, kHueBins> mean{};
    for (const ImageRGB* img : imgs) {
      const HueHistogram h = hue_histogram(*img);
      for (int b = 0; b < kHueBins; ++b) mean[b] += static_cast<double>(h[b]);
    }
    for (auto& v : mean) v /= static_cast<double>(imgs.size());
    return mean;
  };

  HueCalibration cal;
  cal.green_histogram = average(greens);
  cal.red_histogram = average(reds);
  cal.green = detail::grow_range(cal.green_histogram, peak_fraction);
  cal.red = detail::grow_range(cal.red_histogram, peak_fraction);
  if (overlaps(cal.green, cal.red))
    throw Error(Errc::overlapping_ranges, "calibrated ranges overlap: green " + std::to_string(cal.green.lo) + "-" +
                                              std::to_string(cal.green.hi) + ", red " + std::to_string(cal.red.lo) +
                                              "-" + std::to_string(cal.red.hi));
  return cal;
}

}  // namespace ptl
