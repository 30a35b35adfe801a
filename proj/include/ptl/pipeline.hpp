#pragma once

// Window-level inference: loads a corpus window, extracts audio and vision
// evidence once, and classifies it with any of the four pipelines.

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptl/audio_dsp.hpp"
#include "ptl/classifiers.hpp"
#include "ptl/dataset_io.hpp"
#include "ptl/detect.hpp"
#include "ptl/fusion.hpp"
#include "ptl/label.hpp"
#include "ptl/model_io.hpp"
#include "ptl/vision.hpp"

namespace ptl {

enum class Mode { audio, vision, feature, decision };

inline std::string_view to_string(Mode m) noexcept {
  switch (m) {
    case Mode::audio: return "audio";
    case Mode::vision: return "vision";
    case Mode::feature: return "feature";
    case Mode::decision: return "decision";
  }
  return "audio";
}

inline std::optional<Mode> parse_mode(std::string_view s) noexcept {
  for (Mode m : {Mode::audio, Mode::vision, Mode::feature, Mode::decision})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

inline std::optional<DeltaMode> parse_delta(std::string_view s) noexcept {
  if (s == "none") return DeltaMode::none;
  if (s == "d" || s == "delta") return DeltaMode::delta;
  if (s == "dd" || s == "delta_delta") return DeltaMode::delta_delta;
  return std::nullopt;
}

enum class ClassifierKind { random_forest, knn };

inline std::string_view to_string(ClassifierKind k) noexcept {
  return k == ClassifierKind::random_forest ? "rf" : "knn";
}

inline std::optional<ClassifierKind> parse_classifier(std::string_view s) noexcept {
  if (s == "rf") return ClassifierKind::random_forest;
  if (s == "knn") return ClassifierKind::knn;
  return std::nullopt;
}

/// How a stored model expects its input features to be computed. Persisted
/// in the model's metadata.
struct FeatureSpec {
  MfccConfig mfcc{};
  double frame_ms = 250.0;
  int sample_rate = 44100;
  bool fused = false;
};

inline std::map<std::string, std::string> to_meta(const FeatureSpec& s) {
  return {{"features", s.fused ? "fused" : "mfcc"},
          {"n_mfcc", std::to_string(s.mfcc.n_mfcc)},
          {"delta", to_string(s.mfcc.include_deltas)},
          {"frame_ms", std::to_string(static_cast<long long>(std::llround(s.frame_ms)))},
          {"sample_rate", std::to_string(s.sample_rate)}};
}

inline FeatureSpec feature_spec_of(const StoredModel& m) {
  FeatureSpec s;
  try {
    const std::string kind = m.meta_or("features", "mfcc");
    if (kind != "mfcc" && kind != "fused") throw Error(Errc::malformed_input, "unknown feature kind '" + kind + "'");
    s.fused = kind == "fused";
    s.mfcc.n_mfcc = std::stoi(m.meta_or("n_mfcc", "24"));
    const auto d = parse_delta(m.meta_or("delta", "none"));
    if (!d) throw Error(Errc::malformed_input, "unknown delta mode in model metadata");
    s.mfcc.include_deltas = *d;
    s.frame_ms = std::stod(m.meta_or("frame_ms", "250"));
    s.sample_rate = std::stoi(m.meta_or("sample_rate", "44100"));
  } catch (const std::logic_error&) {
    throw Error(Errc::malformed_input, "unparseable model metadata");
  }
  const std::size_t audio_dim = layout_dimension(layout_for(s.mfcc.include_deltas), static_cast<std::size_t>(s.mfcc.n_mfcc));
  if (m.dim() != audio_dim + (s.fused ? 2 : 0))
    throw Error(Errc::dimension_mismatch, "model dimension " + std::to_string(m.dim()) + " disagrees with its metadata");
  return s;
}

struct WindowEvidence {
  FeatureVector audio;
  std::vector<FrameObservation> frames;  // selected frames only
  VisionSummary vision;
};

/// Observes the selected frames of a window.
inline std::vector<FrameObservation> observe_frames(std::span<const std::string> frame_paths, double fps,
                                                    double window_ms, const FrameDetector& detector,
                                                    const HueClassifierConfig& hue) {
  std::vector<FrameObservation> out;
  for (int idx : select_frames(fps, window_ms)) {
    if (static_cast<std::size_t>(idx) >= frame_paths.size()) break;
    const std::string& path = frame_paths[static_cast<std::size_t>(idx)];
    const ImageRGB img = read_image(path);
    const auto boxes = detector.detect(img, frame_id_for(path));
    out.push_back(observe_frame(img, boxes, hue));
  }
  return out;
}

/// Extracts evidence for corpus windows, caching each session recording.
class EvidenceExtractor {
 public:
  EvidenceExtractor(const Corpus& corpus, const FeatureSpec& spec, const FrameDetector& detector,
                    HueClassifierConfig hue = {})
      : corpus_(corpus), spec_(spec), mfcc_(spec.mfcc, corpus.sample_rate), detector_(detector), hue_(hue) {
    if (spec.sample_rate != corpus.sample_rate)
      throw Error(Errc::invalid_config, "model expects " + std::to_string(spec.sample_rate) + " Hz audio, corpus has " +
                                            std::to_string(corpus.sample_rate) + " Hz");
  }

  AudioClip window_audio(const CorpusItem& item) {
    const std::string path = corpus_.resolve(item.audio);
    auto it = cache_.find(path);
    if (it == cache_.end()) {
      if (cache_.size() > 64) cache_.clear();
      it = cache_.emplace(path, read_wav(path)).first;
    }
    return slice_clip(it->second, item.offset_ms, spec_.frame_ms);
  }

  FeatureVector audio_features(const CorpusItem& item) { return mfcc_.features(window_audio(item)); }

  std::vector<FrameObservation> frames(const CorpusItem& item) {
    std::vector<std::string> paths;
    paths.reserve(item.frames.size());
    for (const auto& f : item.frames) paths.push_back(corpus_.resolve(f));
    return observe_frames(paths, corpus_.fps, corpus_.window_ms, detector_, hue_);
  }

  WindowEvidence operator()(const CorpusItem& item, bool with_audio = true, bool with_vision = true) {
    WindowEvidence ev;
    if (with_audio) ev.audio = audio_features(item);
    if (with_vision) {
      ev.frames = frames(item);
      ev.vision = average_vision_features(ev.frames);
    }
    return ev;
  }

 private:
  const Corpus& corpus_;
  FeatureSpec spec_;
  MfccExtractor mfcc_;
  const FrameDetector& detector_;
  HueClassifierConfig hue_;
  std::map<std::string, AudioClip> cache_;
};

/// Label plus the per-label scores behind it (red, green).
struct WindowDecision {
  Label label = Label::Unavailable;
  std::array<double, 2> scores{0.0, 0.0};
};

/// `model` is the audio model for audio/decision, the fused model for
/// feature mode, and unused for vision.
inline WindowDecision classify_window(Mode mode, const StoredModel* model, const WindowEvidence& ev) {
  WindowDecision d;
  auto require_model = [&]() -> const StoredModel& {
    if (!model) throw Error(Errc::invalid_config, std::string(to_string(mode)) + " mode needs a model");
    return *model;
  };
  switch (mode) {
    case Mode::vision:
      d.label = vision_window_label(ev.vision);
      d.scores = {ev.vision.p_red, ev.vision.p_green};
      break;
    case Mode::audio: {
      const Prediction p = predict(require_model(), ev.audio.values);
      d.label = label_from_id(p.label);
      d.scores = {p.confidences.at(0), p.confidences.at(1)};
      break;
    }
    case Mode::feature: {
      const StoredModel& m = require_model();
      const FeatureVector fused = build_fused_vector(ev.audio, ev.vision, ev.audio.size());
      const Prediction p = predict(m, fused.values);
      d.label = label_from_id(p.label);
      d.scores = {p.confidences.at(0), p.confidences.at(1)};
      break;
    }
    case Mode::decision: {
      const Prediction p = predict(require_model(), ev.audio.values);
      d.scores = decision_level_scores(ev.frames, p);
      d.label = decision_level_fuse(ev.frames, p);
      break;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Training-set builders

/// Recordings referenced by the corpus items, in first-seen order.
struct Recording {
  std::string session;
  std::string audio;  // relative path
  Label label = Label::Red;
  Condition condition = Condition::clean;
};

inline std::vector<Recording> recordings_of(std::span<const CorpusItem> items) {
  std::vector<Recording> out;
  std::map<std::string, std::size_t> seen;
  for (const auto& it : items) {
    auto [pos, fresh] = seen.emplace(it.session, out.size());
    if (fresh) {
      out.push_back({it.session, it.audio, it.label, it.condition});
    } else if (out[pos->second].label != it.label || out[pos->second].audio != it.audio) {
      throw Error(Errc::malformed_input, "session '" + it.session + "' mixes labels or recordings");
    }
  }
  return out;
}

inline LabeledDataset light_dataset() {
  LabeledDataset d;
  d.label_names = {"red", "green"};
  return d;
}

/// Audio training rows: every recording cut into consecutive `frame_ms`
/// clips, each summarised with `extractor`.
inline LabeledDataset audio_dataset(const Corpus& corpus, std::span<const Recording> recordings,
                                    const MfccExtractor& extractor, double frame_ms) {
  LabeledDataset data = light_dataset();
  for (const auto& rec : recordings) {
    const AudioClip full = read_wav(corpus.resolve(rec.audio));
    for (const auto& clip : segment_stream(full.samples, full.sample_rate, frame_ms))
      data.add(extractor.features(clip).values, label_id(rec.label));
  }
  return data;
}

/// One vision row per window; windows without any detection become no-PTL rows.
inline std::vector<VisionRow> vision_rows(const Corpus& corpus, const FrameDetector& detector,
                                          const HueClassifierConfig& hue) {
  std::vector<VisionRow> rows;
  rows.reserve(corpus.items.size());
  for (const auto& item : corpus.items) {
    std::vector<std::string> paths;
    for (const auto& f : item.frames) paths.push_back(corpus.resolve(f));
    const auto obs = observe_frames(paths, corpus.fps, corpus.window_ms, detector, hue);
    VisionRow row;
    row.features = average_vision_features(obs);
    if (row.features.any_detection) row.label = item.label;
    rows.push_back(row);
  }
  return rows;
}

/// Detected regions of clean windows, labelled with the window truth, for
/// hue calibration.
inline std::vector<LabeledRegion> calibration_regions(const Corpus& corpus, const FrameDetector& detector,
                                                      std::optional<Condition> condition = Condition::clean) {
  std::vector<LabeledRegion> out;
  for (const auto& item : corpus.items) {
    if (condition && item.condition != *condition) continue;
    for (const auto& f : item.frames) {
      const std::string path = corpus.resolve(f);
      const ImageRGB img = read_image(path);
      const auto boxes = detector.detect(img, frame_id_for(path));
      if (boxes.empty()) continue;
      const BoundingBox* best = &boxes.front();
      for (const auto& b : boxes)
        if (b.confidence > best->confidence) best = &b;
      ImageRGB region = crop(img, *best);
      if (!region.empty()) out.push_back({std::move(region), item.label});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model training

inline StoredModel train_audio_model(const Corpus& corpus, const FeatureSpec& spec, ClassifierKind kind,
                                     const ForestParams& forest = {}, int k = 5) {
  if (spec.fused) throw Error(Errc::invalid_config, "audio model cannot use fused features");
  if (spec.sample_rate != corpus.sample_rate)
    throw Error(Errc::invalid_config, "corpus sample rate differs from the feature spec");
  const MfccExtractor extractor(spec.mfcc, spec.sample_rate);
  const auto recs = recordings_of(corpus.items);
  const LabeledDataset data = audio_dataset(corpus, recs, extractor, spec.frame_ms);
  StoredModel m;
  if (kind == ClassifierKind::random_forest) m.classifier = rf_train(data, forest);
  else m.classifier = knn_train(data, k);
  m.meta = to_meta(spec);
  m.meta["classifier"] = std::string(to_string(kind));
  return m;
}

/// Feature-level model: audio rows from `audio_corpus` paired with window
/// vision rows from `vision_corpus`.
inline StoredModel train_fusion_model(const Corpus& audio_corpus, const Corpus& vision_corpus, FeatureSpec spec,
                                      const FrameDetector& detector, const HueClassifierConfig& hue,
                                      std::uint64_t pairing_seed, const ForestParams& forest = {}) {
  spec.fused = false;
  if (spec.sample_rate != audio_corpus.sample_rate)
    throw Error(Errc::invalid_config, "corpus sample rate differs from the feature spec");
  const MfccExtractor extractor(spec.mfcc, spec.sample_rate);
  const auto recs = recordings_of(audio_corpus.items);
  const LabeledDataset audio = audio_dataset(audio_corpus, recs, extractor, spec.frame_ms);
  const auto vision = vision_rows(vision_corpus, detector, hue);
  StoredModel m;
  m.classifier = fusion_train(audio, vision, pairing_seed, forest);
  spec.fused = true;
  m.meta = to_meta(spec);
  m.meta["classifier"] = "rf";
  return m;
}

}  // namespace ptl
