#pragma once

// Audio-video synchronisation and the two fusion strategies: feature-level
// (MFCC vector + averaged [P_red, P_green] into one forest) and decision-level
// (summed per-label confidences of the unimodal pipelines).

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ptl/audio_dsp.hpp"
#include "ptl/classifiers.hpp"
#include "ptl/error.hpp"
#include "ptl/label.hpp"
#include "ptl/vision.hpp"

namespace ptl {

/// Indices of the frames analysed for one window. Of the
/// floor(fps * window / 1000) frames inside the window only the first `pool`
/// are considered; every other one of those is taken, at most `max_frames`.
inline std::vector<int> select_frames(double fps, double window_ms, int max_frames = 4, int pool = 7) {
  if (!(fps > 0.0) || !(window_ms > 0.0)) throw Error(Errc::invalid_config, "fps and window length must be positive");
  if (max_frames < 0 || pool < 0) throw Error(Errc::invalid_config, "frame caps must be non-negative");
  const auto available = static_cast<int>(std::floor(fps * window_ms / 1000.0 + 1e-9));
  const int usable = std::min(available, pool);
  std::vector<int> idx;
  for (int i = 0; i < usable && static_cast<int>(idx.size()) < max_frames; i += 2) idx.push_back(i);
  return idx;
}

struct VisionSummary {
  double p_red = 0.0;
  double p_green = 0.0;
  bool any_detection = false;

  friend bool operator==(const VisionSummary&, const VisionSummary&) = default;
};

/// Arithmetic mean over all selected frames; undetected frames count as (0, 0).
inline VisionSummary average_vision_features(std::span<const VisionFeatures> per_frame) {
  VisionSummary s;
  if (per_frame.empty()) return s;
  for (const auto& f : per_frame) {
    s.p_red += f.p_red;
    s.p_green += f.p_green;
    s.any_detection = s.any_detection || f.detected;
  }
  s.p_red /= static_cast<double>(per_frame.size());
  s.p_green /= static_cast<double>(per_frame.size());
  return s;
}

inline VisionSummary average_vision_features(std::span<const FrameObservation> per_frame) {
  std::vector<VisionFeatures> f;
  f.reserve(per_frame.size());
  for (const auto& o : per_frame) f.push_back(o.features);
  return average_vision_features(f);
}

/// Window-level vision-only decision.
inline Label vision_window_label(const VisionSummary& s) noexcept {
  return classify_hue(VisionFeatures{s.p_red, s.p_green, s.any_detection});
}

/// Audio features first, then [avg P_red, avg P_green].
inline FeatureVector build_fused_vector(const FeatureVector& mfcc, const VisionSummary& vision, std::size_t n_mfcc) {
  if (mfcc.size() != n_mfcc)
    throw Error(Errc::dimension_mismatch, "expected " + std::to_string(n_mfcc) + " audio features, got " +
                                              std::to_string(mfcc.size()));
  FeatureVector out;
  out.layout = FeatureLayout::fused;
  out.values.reserve(n_mfcc + 2);
  out.values = mfcc.values;
  out.values.push_back(vision.p_red);
  out.values.push_back(vision.p_green);
  return out;
}

/// One vision training row; no label means the frame(s) showed no PTL.
struct VisionRow {
  VisionSummary features;
  std::optional<Label> label;
};

/// Pairs every audio row with a vision row drawn uniformly from the rows of
/// the same label together with all no-PTL rows, so that absent vision
/// appears alongside both audio classes.
inline LabeledDataset pair_fusion_rows(const LabeledDataset& audio, std::span<const VisionRow> vision, std::uint64_t seed) {
  validate(audio);
  if (vision.empty()) throw Error(Errc::empty_dataset, "vision dataset has no rows");
  std::set<int> audio_labels(audio.labels.begin(), audio.labels.end());
  std::set<int> vision_labels;
  std::vector<std::size_t> none_rows;
  for (std::size_t i = 0; i < vision.size(); ++i) {
    if (vision[i].label) vision_labels.insert(label_id(*vision[i].label));
    else none_rows.push_back(i);
  }
  for (int l : audio_labels)
    if (!vision_labels.count(l))
      throw Error(Errc::missing_label, "label '" + audio.label_names.at(static_cast<std::size_t>(l)) +
                                           "' present in audio data only");
  for (int l : vision_labels)
    if (!audio_labels.count(l))
      throw Error(Errc::missing_label, "label id " + std::to_string(l) + " present in vision data only");

  std::vector<std::vector<std::size_t>> pools(audio.n_labels());
  for (std::size_t i = 0; i < vision.size(); ++i)
    if (vision[i].label) pools.at(static_cast<std::size_t>(label_id(*vision[i].label))).push_back(i);
  for (auto& p : pools) p.insert(p.end(), none_rows.begin(), none_rows.end());

  std::mt19937_64 rng(seed);
  LabeledDataset fused;
  fused.label_names = audio.label_names;
  for (std::size_t i = 0; i < audio.size(); ++i) {
    const auto& pool = pools[static_cast<std::size_t>(audio.labels[i])];
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const VisionRow& v = vision[pool[pick(rng)]];
    std::vector<double> row = audio.rows[i];
    row.push_back(v.features.p_red);
    row.push_back(v.features.p_green);
    fused.add(std::move(row), audio.labels[i]);
  }
  return fused;
}

inline ForestModel fusion_train(const LabeledDataset& audio, std::span<const VisionRow> vision, std::uint64_t pairing_seed,
                                const ForestParams& params = {}) {
  return rf_train(pair_fusion_rows(audio, vision, pairing_seed), params);
}

/// Per-label totals (red, green): audio confidence plus vision credit. Each
/// detected frame credits its box confidence to its own hue label; a label's
/// vision credit is the mean over the frames crediting it. Without detections
/// only the audio confidences remain.
inline std::array<double, 2> decision_level_scores(std::span<const FrameObservation> frames, const Prediction& audio) {
  std::array<double, 2> totals{0.0, 0.0};
  for (std::size_t l = 0; l < 2 && l < audio.confidences.size(); ++l) totals[l] = audio.confidences[l];
  std::array<double, 2> credit{0.0, 0.0};
  std::array<int, 2> contributors{0, 0};
  for (const auto& f : frames) {
    if (!f.features.detected || (f.hue_label != Label::Red && f.hue_label != Label::Green)) continue;
    credit[static_cast<std::size_t>(label_id(f.hue_label))] += f.confidence;
    ++contributors[static_cast<std::size_t>(label_id(f.hue_label))];
  }
  for (std::size_t l = 0; l < 2; ++l)
    if (contributors[l] > 0) totals[l] += credit[l] / contributors[l];
  return totals;
}

/// Argmax of the decision-level totals; Red wins ties.
inline Label decision_level_fuse(std::span<const FrameObservation> frames, const Prediction& audio) {
  const auto totals = decision_level_scores(frames, audio);
  return totals[1] > totals[0] ? Label::Green : Label::Red;
}

}  // namespace ptl
