#pragma once

// Command-line front end. `run` is callable in-process so tests can drive it.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ptl/ptl.hpp"

namespace ptl::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

inline int exit_code_for(Errc c) noexcept {
  switch (c) {
    case Errc::invalid_config: return kUsage;
    case Errc::invariant: return kInternal;
    default: return kData;
  }
}

inline HueRange parse_hue_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(Errc::invalid_config, "hue range must look like LO:HI, got '" + text + "'");
  HueRange r;
  try {
    r.lo = std::stoi(text.substr(0, colon));
    r.hi = std::stoi(text.substr(colon + 1));
  } catch (const std::logic_error&) {
    throw Error(Errc::invalid_config, "hue range must look like LO:HI, got '" + text + "'");
  }
  if (!is_valid(r)) throw Error(Errc::invalid_config, "hue range '" + text + "' is outside [0, 180]");
  return r;
}

inline std::string format_range(const HueRange& r) { return std::to_string(r.lo) + ":" + std::to_string(r.hi); }

struct HueFlags {
  std::string green = format_range(kDefaultGreenHue);
  std::string red = format_range(kDefaultRedHue);

  void attach(CLI::App* app) {
    app->add_option("--hue-green", green, "Green hue range LO:HI on the [0,180) scale")->capture_default_str();
    app->add_option("--hue-red", red, "Red hue range LO:HI on the [0,180) scale")->capture_default_str();
  }

  HueClassifierConfig config() const {
    HueClassifierConfig c;
    c.green = parse_hue_range(green);
    c.red = parse_hue_range(red);
    if (overlaps(c.green, c.red)) throw Error(Errc::overlapping_ranges, "green and red hue ranges overlap");
    return c;
  }
};

/// Blob detector unless a detections file is given.
class DetectorHolder {
 public:
  explicit DetectorHolder(const std::string& detections_path) {
    if (detections_path.empty()) {
      detector_ = std::make_unique<BlobDetector>();
    } else {
      records_ = read_detections(detections_path);
      detector_ = std::make_unique<ExternalDetector>(records_);
    }
  }
  const FrameDetector& get() const { return *detector_; }

 private:
  std::vector<FrameDetections> records_;
  std::unique_ptr<FrameDetector> detector_;
};

inline std::optional<Condition> parse_condition_filter(const std::string& s) {
  if (s == "all") return std::nullopt;
  if (auto c = parse_condition(s)) return *c;
  throw Error(Errc::invalid_config, "unknown condition '" + s + "'");
}

inline void write_output(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") out << text;
  else write_text(path, text);
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pedestrian traffic light classification from audio and video"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled corpus");
  std::string synth_out;
  int windows = 100;
  CorpusConfig synth_cfg;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--windows-per-condition", windows, "Windows per condition")->capture_default_str();
  synth->add_option("--snr-db", synth_cfg.snr_db, "Tone-to-noise ratio in dB")->capture_default_str();
  synth->add_option("--fps", synth_cfg.fps, "Video frame rate")->capture_default_str();
  synth->add_option("--seed", synth_cfg.seed, "Random seed")->capture_default_str();
  synth->add_option("--window-ms", synth_cfg.window_ms, "Window length in ms")->capture_default_str();
  synth->add_option("--sample-rate", synth_cfg.sample_rate, "Audio sample rate")->capture_default_str();

  // calibrate-hue
  auto* calib = app.add_subcommand("calibrate-hue", "Derive hue ranges from labelled clean windows");
  std::string calib_corpus, calib_detections, calib_condition = "clean";
  double peak_fraction = 0.10;
  bool balance = false;
  calib->add_option("--corpus", calib_corpus, "Corpus manifest")->required();
  calib->add_option("--peak-fraction", peak_fraction, "Histogram peak fraction kept")->capture_default_str();
  calib->add_flag("--balance", balance, "Shrink the wider range to the narrower width");
  calib->add_option("--condition", calib_condition, "clean|occluded|moving|all")->capture_default_str();
  calib->add_option("--detections", calib_detections, "Detections file (default: blob detector)");

  // train-audio
  auto* train_audio = app.add_subcommand("train-audio", "Train an audio-only classifier");
  std::string ta_corpus, ta_model = "rf", ta_delta = "none", ta_out;
  FeatureSpec ta_spec;
  ForestParams ta_forest;
  int ta_k = 5;
  train_audio->add_option("--corpus", ta_corpus, "Corpus manifest")->required();
  train_audio->add_option("--model", ta_model, "rf|knn")->capture_default_str();
  train_audio->add_option("--n-mfcc", ta_spec.mfcc.n_mfcc, "MFCC count")->capture_default_str();
  train_audio->add_option("--frame-ms", ta_spec.frame_ms, "Clip length in ms")->capture_default_str();
  train_audio->add_option("--delta", ta_delta, "none|d|dd")->capture_default_str();
  train_audio->add_option("--seed", ta_forest.seed, "Random seed")->capture_default_str();
  train_audio->add_option("--trees", ta_forest.n_trees, "Forest size")->capture_default_str();
  train_audio->add_option("--k", ta_k, "Neighbours for knn")->capture_default_str();
  train_audio->add_option("--out", ta_out, "Output model file")->required();

  // train-fusion
  auto* train_fusion = app.add_subcommand("train-fusion", "Train the feature-level fusion classifier");
  std::string tf_audio, tf_vision, tf_out, tf_detections;
  FeatureSpec tf_spec;
  ForestParams tf_forest;
  HueFlags tf_hue;
  train_fusion->add_option("--audio-corpus", tf_audio, "Corpus supplying audio rows")->required();
  train_fusion->add_option("--vision-corpus", tf_vision, "Corpus supplying vision rows")->required();
  train_fusion->add_option("--seed", tf_forest.seed, "Random seed")->capture_default_str();
  train_fusion->add_option("--n-mfcc", tf_spec.mfcc.n_mfcc, "MFCC count")->capture_default_str();
  train_fusion->add_option("--trees", tf_forest.n_trees, "Forest size")->capture_default_str();
  train_fusion->add_option("--detections", tf_detections, "Detections file for the vision corpus");
  train_fusion->add_option("--out", tf_out, "Output model file")->required();
  tf_hue.attach(train_fusion);

  // classify
  auto* classify = app.add_subcommand("classify", "Classify one window");
  std::string cl_model, cl_window, cl_detections, cl_mode = "decision";
  std::vector<std::string> cl_frames;
  double cl_fps = 30.0;
  HueFlags cl_hue;
  classify->add_option("--model", cl_model, "Model file (audio model; fused model for feature mode)");
  classify->add_option("--window", cl_window, "Window audio (WAV)");
  classify->add_option("--frames", cl_frames, "Window frames (PPM), in time order");
  classify->add_option("--detections", cl_detections, "Detections file (default: blob detector)");
  classify->add_option("--mode", cl_mode, "audio|vision|feature|decision")->capture_default_str();
  classify->add_option("--fps", cl_fps, "Frame rate of --frames")->capture_default_str();
  cl_hue.attach(classify);

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a pipeline on a labelled corpus");
  std::string ev_model, ev_corpus, ev_condition = "all", ev_mode = "decision", ev_report = "md", ev_out, ev_detections;
  bool ev_timing = false;
  HueFlags ev_hue;
  evaluate_cmd->add_option("--model", ev_model, "Model file (audio model; fused model for feature mode)");
  evaluate_cmd->add_option("--corpus", ev_corpus, "Corpus manifest")->required();
  evaluate_cmd->add_option("--condition", ev_condition, "clean|occluded|moving|all|each")->capture_default_str();
  evaluate_cmd->add_option("--mode", ev_mode, "audio|vision|feature|decision")->capture_default_str();
  evaluate_cmd->add_option("--report", ev_report, "csv|md")->capture_default_str();
  evaluate_cmd->add_option("--out", ev_out, "Write the report here instead of stdout");
  evaluate_cmd->add_option("--detections", ev_detections, "Detections file (default: blob detector)");
  evaluate_cmd->add_flag("--timing", ev_timing, "Include mean per-window wall time");
  ev_hue.attach(evaluate_cmd);

  // grid-search
  auto* grid = app.add_subcommand("grid-search", "Cross-compare classifiers, MFCC counts and clip lengths");
  std::string gs_corpus, gs_out, gs_delta = "none";
  GridConfig gs_cfg;
  grid->add_option("--corpus", gs_corpus, "Corpus manifest")->required();
  grid->add_option("--out", gs_out, "Output CSV")->required();
  grid->add_option("--seed", gs_cfg.seed, "Random seed")->capture_default_str();
  grid->add_option("--delta", gs_delta, "none|d|dd|all")->capture_default_str();
  grid->add_option("--trees", gs_cfg.forest.n_trees, "Forest size")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kUsage;
  }

  try {
    if (*synth) {
      if (windows <= 0) throw Error(Errc::invalid_config, "--windows-per-condition must be positive");
      synth_cfg.windows_per_condition = {windows, windows, windows};
      const Corpus c = synth_corpus(synth_cfg, synth_out);
      out << "wrote " << c.items.size() << " windows to " << (std::filesystem::path(synth_out) / "manifest.jsonl").string()
          << "\n";
    } else if (*calib) {
      const Corpus c = read_manifest(calib_corpus);
      const DetectorHolder det(calib_detections);
      const auto regions = calibration_regions(c, det.get(), parse_condition_filter(calib_condition));
      const HueCalibration cal = calibrate_hue_ranges(regions, balance, peak_fraction);
      out << "green " << format_range(cal.green) << "\nred " << format_range(cal.red) << "\n";
    } else if (*train_audio) {
      const auto kind = parse_classifier(ta_model);
      if (!kind) throw Error(Errc::invalid_config, "--model must be rf or knn");
      const auto delta = parse_delta(ta_delta);
      if (!delta) throw Error(Errc::invalid_config, "--delta must be none, d or dd");
      ta_spec.mfcc.include_deltas = *delta;
      const Corpus c = read_manifest(ta_corpus);
      ta_spec.sample_rate = c.sample_rate;
      const StoredModel m = train_audio_model(c, ta_spec, *kind, ta_forest, ta_k);
      save_model_file(m, ta_out);
      out << "trained " << ta_model << " on " << m.dim() << "-dimensional features; saved " << ta_out << "\n";
    } else if (*train_fusion) {
      const HueClassifierConfig hue = tf_hue.config();
      const Corpus ac = read_manifest(tf_audio);
      const Corpus vc = read_manifest(tf_vision);
      const DetectorHolder det(tf_detections);
      tf_spec.sample_rate = ac.sample_rate;
      const StoredModel m = train_fusion_model(ac, vc, tf_spec, det.get(), hue, tf_forest.seed, tf_forest);
      save_model_file(m, tf_out);
      out << "trained fusion model on " << m.dim() << "-dimensional features; saved " << tf_out << "\n";
    } else if (*classify) {
      const auto mode = parse_mode(cl_mode);
      if (!mode) throw Error(Errc::invalid_config, "--mode must be audio, vision, feature or decision");
      const HueClassifierConfig hue = cl_hue.config();
      std::optional<StoredModel> model;
      if (*mode != Mode::vision) {
        if (cl_model.empty()) throw Error(Errc::invalid_config, "--model is required for " + cl_mode + " mode");
        if (cl_window.empty()) throw Error(Errc::invalid_config, "--window is required for " + cl_mode + " mode");
        model = load_model_file(cl_model);
      }
      const bool needs_frames = *mode != Mode::audio;
      if (needs_frames && cl_frames.empty()) throw Error(Errc::invalid_config, "--frames is required for " + cl_mode + " mode");
      WindowEvidence ev;
      if (model) {
        const FeatureSpec spec = feature_spec_of(*model);
        const AudioClip clip = slice_clip(read_wav(cl_window), 0.0, spec.frame_ms);
        ev.audio = MfccExtractor(spec.mfcc, clip.sample_rate).features(clip);
      }
      if (needs_frames) {
        const DetectorHolder det(cl_detections);
        ev.frames = observe_frames(cl_frames, cl_fps, 1000.0 * static_cast<double>(cl_frames.size()) / cl_fps,
                                   det.get(), hue);
        ev.vision = average_vision_features(ev.frames);
      }
      const WindowDecision d = classify_window(*mode, model ? &*model : nullptr, ev);
      out << "label: " << to_string(d.label) << "\n";
      out << "red: " << detail::fixed(d.scores[0], 4) << "\n";
      out << "green: " << detail::fixed(d.scores[1], 4) << "\n";
    } else if (*evaluate_cmd) {
      const auto mode = parse_mode(ev_mode);
      if (!mode) throw Error(Errc::invalid_config, "--mode must be audio, vision, feature or decision");
      ReportFormat fmt;
      if (ev_report == "csv") fmt = ReportFormat::csv;
      else if (ev_report == "md" || ev_report == "markdown") fmt = ReportFormat::markdown;
      else throw Error(Errc::invalid_config, "--report must be csv or md");
      std::vector<std::optional<Condition>> conditions;
      if (ev_condition == "each") {
        for (Condition c : kConditions) conditions.emplace_back(c);
      } else {
        conditions.push_back(parse_condition_filter(ev_condition));
      }
      const HueClassifierConfig hue = ev_hue.config();
      std::optional<StoredModel> model;
      if (*mode != Mode::vision) {
        if (ev_model.empty()) throw Error(Errc::invalid_config, "--model is required for " + ev_mode + " mode");
        model = load_model_file(ev_model);
      }
      ModelSet models;
      if (*mode == Mode::feature) models.fused = model ? &*model : nullptr;
      else models.audio = model ? &*model : nullptr;
      const Corpus c = read_manifest(ev_corpus);
      const DetectorHolder det(ev_detections);
      const Mode modes[] = {*mode};
      const Report r = evaluate_corpus(c, modes, conditions, models, det.get(), hue);
      write_output(emit_report(r, fmt, ev_timing), ev_out, out);
    } else if (*grid) {
      if (gs_delta == "all") {
        gs_cfg.deltas = {DeltaMode::none, DeltaMode::delta, DeltaMode::delta_delta};
      } else {
        const auto d = parse_delta(gs_delta);
        if (!d) throw Error(Errc::invalid_config, "--delta must be none, d, dd or all");
        gs_cfg.deltas = {*d};
      }
      const Corpus c = read_manifest(gs_corpus);
      const GridReport r = grid_search(c, gs_cfg);
      write_text(gs_out, emit_grid_csv(r));
      const GridCell& b = r.best();
      out << "cells: " << r.cells.size() << "\n";
      out << "best: " << to_string(b.classifier) << " delta=" << to_string(b.delta)
          << " frame_ms=" << detail::fixed(b.frame_ms, 0) << " n_mfcc=" << b.n_mfcc
          << " accuracy=" << detail::fixed(b.accuracy(), 6) << "\n";
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}

}  // namespace ptl::cli
