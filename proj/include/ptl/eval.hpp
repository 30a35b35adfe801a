#pragma once

// Per-condition accuracy reports and the MFCC/frame-length/classifier grid.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ptl/audio_dsp.hpp"
#include "ptl/classifiers.hpp"
#include "ptl/dataset_io.hpp"
#include "ptl/error.hpp"
#include "ptl/label.hpp"
#include "ptl/pipeline.hpp"

namespace ptl {

/// Counts behind one report row. Unavailable outputs are wrong answers.
struct EvalRow {
  std::string method;
  std::string condition;
  std::size_t n_green = 0;
  std::size_t n_red = 0;
  std::size_t correct_green = 0;
  std::size_t correct_red = 0;
  std::size_t unavailable = 0;
  double mean_ms = 0.0;

  std::size_t total() const noexcept { return n_green + n_red; }
  std::size_t correct() const noexcept { return correct_green + correct_red; }
  static double ratio(std::size_t a, std::size_t b) noexcept { return b == 0 ? 0.0 : static_cast<double>(a) / b; }
  double green_accuracy() const noexcept { return ratio(correct_green, n_green); }
  double red_accuracy() const noexcept { return ratio(correct_red, n_red); }
  double overall_accuracy() const noexcept { return ratio(correct(), total()); }
};

struct Report {
  std::vector<EvalRow> rows;
};

/// Scores `classify(item) -> Label` on every item matching `condition`
/// (all items when empty). Throws `empty_dataset` when nothing matches.
template <class Classify>
EvalRow evaluate(std::span<const CorpusItem> items, std::optional<Condition> condition, Classify&& classify,
                 std::string method) {
  EvalRow row;
  row.method = std::move(method);
  row.condition = condition ? std::string(to_string(*condition)) : "all";
  double elapsed_ms = 0.0;
  for (const auto& item : items) {
    if (condition && item.condition != *condition) continue;
    const auto t0 = std::chrono::steady_clock::now();
    const Label predicted = classify(item);
    elapsed_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = predicted == item.label;
    if (predicted == Label::Unavailable) ++row.unavailable;
    if (item.label == Label::Green) {
      ++row.n_green;
      row.correct_green += ok;
    } else {
      ++row.n_red;
      row.correct_red += ok;
    }
  }
  if (row.total() == 0) throw Error(Errc::empty_dataset, "no windows match condition '" + row.condition + "'");
  row.mean_ms = elapsed_ms / static_cast<double>(row.total());
  return row;
}

/// Models used by `evaluate_corpus`: the audio model serves audio and
/// decision modes, the fused model serves feature mode.
struct ModelSet {
  const StoredModel* audio = nullptr;
  const StoredModel* fused = nullptr;
};

inline const StoredModel* model_for(Mode mode, const ModelSet& models) {
  switch (mode) {
    case Mode::vision: return nullptr;
    case Mode::feature:
      if (!models.fused) throw Error(Errc::invalid_config, "feature mode needs a fused model");
      return models.fused;
    default:
      if (!models.audio) throw Error(Errc::invalid_config, std::string(to_string(mode)) + " mode needs an audio model");
      return models.audio;
  }
}

/// One row per (mode, condition), modes outermost. An empty condition means
/// the whole corpus.
inline Report evaluate_corpus(const Corpus& corpus, std::span<const Mode> modes,
                              std::span<const std::optional<Condition>> conditions, const ModelSet& models,
                              const FrameDetector& detector, const HueClassifierConfig& hue = {}) {
  Report report;
  for (Mode mode : modes) {
    const StoredModel* model = model_for(mode, models);
    FeatureSpec spec;
    spec.sample_rate = corpus.sample_rate;
    if (model) spec = feature_spec_of(*model);
    EvidenceExtractor extract(corpus, spec, detector, hue);
    const bool audio = mode != Mode::vision;
    const bool vision = mode != Mode::audio;
    for (const auto& cond : conditions) {
      report.rows.push_back(evaluate(
          corpus.items, cond,
          [&](const CorpusItem& item) { return classify_window(mode, model, extract(item, audio, vision)).label; },
          std::string(to_string(mode))));
    }
  }
  return report;
}

enum class ReportFormat { csv, markdown };

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace detail

/// CSV carries the raw counts; markdown is the per-method accuracy table
/// (method, green, red, overall). Timing is opt-in since it varies run to run.
inline std::string emit_report(const Report& report, ReportFormat format, bool include_timing = false) {
  std::string out;
  if (format == ReportFormat::csv) {
    out = "method,condition,n_green,n_red,correct_green,correct_red,unavailable,green_accuracy,red_accuracy,"
          "overall_accuracy";
    out += include_timing ? ",mean_ms\n" : "\n";
    for (const auto& r : report.rows) {
      out += r.method + "," + r.condition + "," + std::to_string(r.n_green) + "," + std::to_string(r.n_red) + "," +
             std::to_string(r.correct_green) + "," + std::to_string(r.correct_red) + "," +
             std::to_string(r.unavailable) + "," + detail::fixed(r.green_accuracy(), 6) + "," +
             detail::fixed(r.red_accuracy(), 6) + "," + detail::fixed(r.overall_accuracy(), 6);
      if (include_timing) out += "," + detail::fixed(r.mean_ms, 3);
      out += "\n";
    }
    return out;
  }
  out = "| Classification Method | Green Light Accuracy | Red Light Accuracy | Overall Accuracy |\n"
        "|---|---|---|---|\n";
  for (const auto& r : report.rows) {
    std::string name = r.method;
    if (!r.condition.empty() && r.condition != "all") name += " (" + r.condition + ")";
    out += "| " + name + " | " + detail::fixed(100.0 * r.green_accuracy(), 1) + "% | " +
           detail::fixed(100.0 * r.red_accuracy(), 1) + "% | " + detail::fixed(100.0 * r.overall_accuracy(), 1) +
           "% |\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid search

struct GridConfig {
  std::vector<ClassifierKind> classifiers{ClassifierKind::random_forest, ClassifierKind::knn};
  std::vector<int> n_mfcc{10, 12, 14, 16, 18, 20, 24, 28};
  std::vector<double> frame_ms{250, 500, 750, 1000};
  std::vector<DeltaMode> deltas{DeltaMode::none};
  double test_fraction = 0.30;
  std::uint64_t seed = 0;
  ForestParams forest{};
  int k = 5;
};

struct GridCell {
  ClassifierKind classifier = ClassifierKind::random_forest;
  DeltaMode delta = DeltaMode::none;
  double frame_ms = 250;
  int n_mfcc = 24;
  std::size_t feature_dim = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t correct = 0;

  double accuracy() const noexcept { return n_test == 0 ? 0.0 : static_cast<double>(correct) / n_test; }
};

struct GridReport {
  std::vector<GridCell> cells;  // best first

  const GridCell& best() const {
    if (cells.empty()) throw Error(Errc::empty_dataset, "empty grid");
    return cells.front();
  }
};

namespace detail {

inline std::string cell_name(ClassifierKind c, DeltaMode d, double frame_ms, int n) {
  return std::string(to_string(c)) + "/" + to_string(d) + "/" + fixed(frame_ms, 0) + "ms/N=" + std::to_string(n);
}

}  // namespace detail

/// Trains and tests every (classifier, delta mode, frame length, MFCC count)
/// cell. Recordings, not clips, are split 70/30 so clips of one recording
/// never straddle the split. Cells are sorted by accuracy, then by their
/// coordinates, so the best cell is reproducible for a seed.
inline GridReport grid_search(const Corpus& corpus, const GridConfig& cfg) {
  if (cfg.classifiers.empty() || cfg.n_mfcc.empty() || cfg.frame_ms.empty() || cfg.deltas.empty())
    throw Error(Errc::invalid_config, "grid axes must be non-empty");
  const auto recs = recordings_of(corpus.items);
  if (recs.empty()) throw Error(Errc::empty_dataset, "corpus has no recordings");
  auto [train_recs, test_recs] = split_dataset<Recording>(recs, cfg.test_fraction, cfg.seed,
                                                          [](const Recording& r) { return label_id(r.label); });
  if (train_recs.empty() || test_recs.empty()) throw Error(Errc::empty_dataset, "split left one side empty");

  const int n_max = *std::max_element(cfg.n_mfcc.begin(), cfg.n_mfcc.end());
  MfccConfig base;
  base.n_mfcc = n_max;

  // Per-clip cepstra at the largest N; smaller N are prefixes.
  struct Clip {
    std::vector<std::vector<double>> cepstra;
    int label;
  };
  auto extract = [&](const std::vector<Recording>& side, const MfccExtractor& ex, double frame_ms) {
    std::vector<Clip> clips;
    for (const auto& rec : side) {
      const AudioClip full = read_wav(corpus.resolve(rec.audio));
      for (const auto& clip : segment_stream(full.samples, full.sample_rate, frame_ms))
        clips.push_back({ex.cepstra(clip), label_id(rec.label)});
    }
    return clips;
  };

  GridReport report;
  const MfccExtractor extractor(base, corpus.sample_rate);
  for (double frame_ms : cfg.frame_ms) {
    const auto train_clips = extract(train_recs, extractor, frame_ms);
    const auto test_clips = extract(test_recs, extractor, frame_ms);
    for (DeltaMode delta : cfg.deltas) {
      for (int n : cfg.n_mfcc) {
        auto build = [&](const std::vector<Clip>& clips) {
          LabeledDataset d = light_dataset();
          for (const auto& c : clips)
            d.add(summarize_cepstra(c.cepstra, static_cast<std::size_t>(n), delta, base.delta_half_window).values,
                  c.label);
          return d;
        };
        for (ClassifierKind kind : cfg.classifiers) {
          GridCell cell{kind, delta, frame_ms, n};
          try {
            if (n < 1 || n > n_max) throw Error(Errc::invalid_config, "MFCC count out of range");
            const LabeledDataset train = build(train_clips);
            const LabeledDataset test = build(test_clips);
            if (train.empty() || test.empty())
              throw Error(Errc::empty_dataset, "frame length leaves no training or test clips");
            cell.feature_dim = train.dim();
            cell.n_train = train.size();
            cell.n_test = test.size();
            Classifier model;
            if (kind == ClassifierKind::random_forest) {
              ForestParams fp = cfg.forest;
              fp.seed = cfg.seed;
              model = rf_train(train, fp);
            } else {
              model = knn_train(train, std::min<int>(cfg.k, static_cast<int>(train.size())));
            }
            for (std::size_t i = 0; i < test.size(); ++i)
              cell.correct += predict(model, test.rows[i]).label == test.labels[i];
          } catch (const Error& e) {
            throw Error(e.code(), "grid cell " + detail::cell_name(kind, delta, frame_ms, n) + ": " + e.what());
          }
          report.cells.push_back(cell);
        }
      }
    }
  }
  std::stable_sort(report.cells.begin(), report.cells.end(), [](const GridCell& a, const GridCell& b) {
    // Compare exact fractions to keep the order independent of rounding.
    const auto lhs = static_cast<unsigned long long>(a.correct) * b.n_test;
    const auto rhs = static_cast<unsigned long long>(b.correct) * a.n_test;
    if (lhs != rhs) return lhs > rhs;
    return std::make_tuple(static_cast<int>(a.classifier), static_cast<int>(a.delta), a.frame_ms, a.n_mfcc) <
           std::make_tuple(static_cast<int>(b.classifier), static_cast<int>(b.delta), b.frame_ms, b.n_mfcc);
  });
  return report;
}

inline std::string emit_grid_csv(const GridReport& report) {
  std::string out = "classifier,delta,frame_ms,n_mfcc,feature_dim,n_train,n_test,accuracy\n";
  for (const auto& c : report.cells) {
    out += std::string(to_string(c.classifier)) + "," + to_string(c.delta) + "," + detail::fixed(c.frame_ms, 0) + "," +
           std::to_string(c.n_mfcc) + "," + std::to_string(c.feature_dim) + "," + std::to_string(c.n_train) + "," +
           std::to_string(c.n_test) + "," + detail::fixed(c.accuracy(), 6) + "\n";
  }
  return out;
}

}  // namespace ptl
