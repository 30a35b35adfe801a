// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any fails. Run from a Release build; the runtime bounds
// are part of the criteria.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "ptl/ptl.hpp"
#include "ptl_cli.hpp"

using namespace ptl;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

// ---------------------------------------------------------------------------

Outcome mfcc_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const AudioClip clip{testutil::random_signal(samples_for_ms(250, 44100), seed), 44100};
    const double err = oracle::relative_error(compute_mfcc(clip, {}).values, oracle::mfcc_frames_mean(clip.samples, {}));
    worst = std::max(worst, err);
    o.require(err <= 1e-6, "seed " + std::to_string(seed) + " rel err " + fmt("%.3g", err));
  }
  const double secs = seconds_since(t0);
  o.require(secs < 10.0, "took " + fmt("%.1f", secs) + " s");
  if (o.pass) o.detail = "max rel err " + fmt("%.2g", worst) + ", " + fmt("%.1f", secs) + " s";
  return o;
}

Outcome accuracy_orderings() {
  Outcome o;
  const auto t0 = Clock::now();
  testutil::TempDir dir("acc2");
  const std::array<Mode, 4> modes{Mode::audio, Mode::vision, Mode::feature, Mode::decision};
  const std::array<std::optional<Condition>, 3> conds{Condition::clean, Condition::occluded, Condition::moving};
  std::string summary;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    CorpusConfig train_cfg;
    train_cfg.seed = 1000 + seed;
    train_cfg.windows_per_condition = {200, 200, 200};
    CorpusConfig test_cfg;
    test_cfg.seed = seed;
    test_cfg.windows_per_condition = {400, 400, 400};
    test_cfg.snr_db = train_cfg.snr_db = 10.0;
    const std::string tag = std::to_string(seed);
    const Corpus train = synth_corpus(train_cfg, dir / ("train" + tag));
    const Corpus test = synth_corpus(test_cfg, dir / ("test" + tag));

    ForestParams fp;
    fp.seed = seed;
    const BlobDetector det;
    const StoredModel audio = train_audio_model(train, {}, ClassifierKind::random_forest, fp);
    const StoredModel fused = train_fusion_model(train, train, {}, det, {}, seed, fp);
    const Report r = evaluate_corpus(test, modes, conds, ModelSet{&audio, &fused}, det);

    // rows: mode-major, condition-minor
    auto acc = [&](Mode m, int c) { return r.rows[static_cast<std::size_t>(m) * 3 + static_cast<std::size_t>(c)].overall_accuracy(); };
    const std::string s = "seed " + tag + ": ";
    // a. clean
    {
      const double a = acc(Mode::audio, 0), v = acc(Mode::vision, 0), f = acc(Mode::feature, 0);
      o.require(f >= std::max(a, v) - 0.01, s + "clean feature " + fmt("%.3f", f) + " < max(audio, vision) - 1pt");
      o.require(a >= 0.9 && v >= 0.9 && f >= 0.9, s + "clean accuracy below 90%");
    }
    // b. full occlusion
    {
      const double a = acc(Mode::audio, 1), v = acc(Mode::vision, 1), f = acc(Mode::feature, 1),
                   d = acc(Mode::decision, 1);
      o.require(v <= 0.10, s + "occluded vision " + fmt("%.3f", v) + " > 10%");
      o.require(a >= 0.9 && d >= 0.9, s + "occluded audio/decision below 90%");
      o.require(d >= f, s + "occluded decision " + fmt("%.3f", d) + " < feature " + fmt("%.3f", f));
    }
    // c. moving
    {
      const double a = acc(Mode::audio, 2), v = acc(Mode::vision, 2), f = acc(Mode::feature, 2);
      o.require(f >= a && f >= v, s + "moving feature " + fmt("%.3f", f) + " below a unimodal pipeline");
    }
    summary += (seed > 1 ? " | " : "") + s;
    for (int c = 0; c < 3; ++c) {
      summary += std::string(to_string(kConditions[static_cast<std::size_t>(c)])) + " A/V/F/D=";
      for (Mode m : modes) summary += fmt("%.1f", 100 * acc(m, c)) + (m == Mode::decision ? " " : "/");
    }
  }
  const double secs = seconds_since(t0);
  o.require(secs < 300.0, "took " + fmt("%.0f", secs) + " s");
  std::cout << "  accuracies (%): " << summary << "\n";
  if (o.pass) o.detail = "orderings hold on 3 seeds, " + fmt("%.0f", secs) + " s";
  return o;
}

Outcome hue_rule() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> pct(0.0, 100.0);
  std::uniform_int_distribution<int> coin(0, 3);
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 10000; ++i) {
    VisionFeatures f;
    f.detected = coin(rng) != 0;
    f.p_red = pct(rng);
    f.p_green = coin(rng) == 0 ? f.p_red : pct(rng) * (100.0 - f.p_red) / 100.0;
    if (coin(rng) == 0) f.p_red = f.p_green = 0.0;
    const Label got = classify_hue(f);
    Label want;
    if (!f.detected) want = Label::Unavailable;
    else if (f.p_red > f.p_green) want = Label::Red;
    else if (f.p_green > f.p_red) want = Label::Green;
    else want = Label::Unavailable;
    if (got != Label::Red && got != Label::Green && got != Label::Unavailable) {
      o.require(false, "outcome outside the three labels");
      break;
    }
    if (got != want) {
      o.require(false, "mismatch at sample " + std::to_string(i));
      break;
    }
    ++counts[got == Label::Red ? 0 : got == Label::Green ? 1 : 2];
  }
  if (o.pass)
    o.detail = "10000 samples: red " + std::to_string(counts[0]) + ", green " + std::to_string(counts[1]) +
               ", unavailable " + std::to_string(counts[2]);
  return o;
}

Outcome frames_and_fused_length() {
  Outcome o;
  const auto idx = select_frames(30.0, 250.0);
  o.require(idx == std::vector<int>{0, 2, 4, 6}, "select_frames(30, 250) differs from {0,2,4,6}");
  const AudioClip clip{testutil::random_signal(samples_for_ms(250, 44100), 3), 44100};
  const FeatureVector m = compute_mfcc(clip, {});
  const FeatureVector fused = build_fused_vector(m, VisionSummary{35, 15, true}, 24);
  o.require(fused.size() == 26, "fused vector has " + std::to_string(fused.size()) + " entries");
  if (o.pass) o.detail = "frames {0,2,4,6}, fused length 26";
  return o;
}

Outcome grid() {
  Outcome o;
  const auto t0 = Clock::now();
  testutil::TempDir dir("acc5");
  CorpusConfig cfg;
  cfg.seed = 5;
  const Corpus corpus = synth_corpus(cfg, dir / "c");
  GridConfig g;
  g.seed = 17;
  const GridReport a = grid_search(corpus, g);
  const GridReport b = grid_search(corpus, g);
  o.require(a.cells.size() == 64, std::to_string(a.cells.size()) + " cells");
  for (const auto& c : a.cells)
    if (!(c.accuracy() >= 0.0 && c.accuracy() <= 1.0)) o.require(false, "accuracy outside [0, 1]");
  o.require(emit_grid_csv(a) == emit_grid_csv(b), "grid differs between runs with one seed");
  const double secs = seconds_since(t0);
  o.require(secs < 600.0, "took " + fmt("%.0f", secs) + " s");
  if (o.pass) {
    const GridCell& best = a.best();
    o.detail = "64 cells, best " + std::string(to_string(best.classifier)) + "/" + fmt("%.0f", best.frame_ms) +
               "ms/N=" + std::to_string(best.n_mfcc) + " at " + fmt("%.1f", 100 * best.accuracy()) + "%, " +
               fmt("%.0f", secs) + " s";
  }
  return o;
}

template <class F>
bool throws_ptl_error(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return std::string(e.what()).size() > 0;
  } catch (...) {
    return false;
  }
  return false;
}

// Parses or fails with a ptl::Error; anything else is a defect.
template <class F>
bool parses_or_diagnoses(F&& f) {
  try {
    f();
  } catch (const Error&) {
  } catch (...) {
    return false;
  }
  return true;
}

Outcome bit_exact_io() {
  Outcome o;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t wav_files = 0, det_files = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::int16_t> pcm(1 + rng() % 5000);
    for (auto& s : pcm) s = static_cast<std::int16_t>(rng());
    const int rate = trial % 2 ? 44100 : 16000;
    const auto file = encode_pcm16(pcm, 1, rate);
    const AudioClip clip = decode_wav(file);
    o.require(encode_wav(clip) == file, "WAV round trip differs (trial " + std::to_string(trial) + ")");
    ++wav_files;

    std::vector<FrameDetections> recs(rng() % 6);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      recs[i].frame = "f" + std::to_string(trial) + "_" + std::to_string(i);
      for (std::size_t k = rng() % 4; k > 0; --k) {
        BoundingBox b;
        b.w = 0.01 + 0.5 * u(rng);
        b.h = 0.01 + 0.5 * u(rng);
        b.cx = b.w / 2 + (1 - b.w) * u(rng);
        b.cy = b.h / 2 + (1 - b.h) * u(rng);
        b.confidence = u(rng);
        b.label = u(rng) < 0.5 ? Label::Red : Label::Green;
        recs[i].boxes.push_back(b);
      }
    }
    const std::string text = encode_detections(recs);
    const auto back = parse_detections(text);
    o.require(back == recs && encode_detections(back) == text,
              "detections round trip differs (trial " + std::to_string(trial) + ")");
    ++det_files;
  }

  // Hand-written malformed fixtures.
  auto bytes = [](std::string_view s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };
  const std::int16_t tiny[] = {1, -1, 2, -2};
  const auto good_wav = encode_pcm16(tiny, 1, 8000);
  const auto good_ppm = encode_ppm(ImageRGB(3, 2, Rgb{1, 2, 3}));
  std::vector<std::function<void()>> fixtures{
      [&] { decode_wav(bytes("")); },
      [&] { decode_wav(bytes("RIFF")); },
      [&] { decode_wav(bytes("RIFX\x24\0\0\0WAVE")); },
      [&] { decode_wav(std::vector<std::uint8_t>(good_wav.begin(), good_wav.end() - 1)); },
      [&] { decode_wav(std::vector<std::uint8_t>(good_wav.begin(), good_wav.begin() + 44)); },
      [&] { decode_ppm(bytes("P3\n1 1\n255\n0 0 0\n")); },
      [&] { decode_ppm(bytes("P6\n0 1\n255\n")); },
      [&] { decode_ppm(bytes("P6\n2 2\n65535\n")); },
      [&] { decode_ppm(std::vector<std::uint8_t>(good_ppm.begin(), good_ppm.end() - 1)); },
      [&] { parse_detections("{not json"); },
      [&] { parse_detections(R"({"frame":"a"})"); },
      [&] { parse_detections(R"({"frame":"a","boxes":[{"label":"red","confidence":1.5,"cx":0.5,"cy":0.5,"w":0.1,"h":0.1}]})"); },
      [&] { parse_detections(R"({"frame":"a","boxes":[{"label":"red","confidence":0.5,"cx":0.99,"cy":0.5,"w":0.5,"h":0.1}]})"); },
      [&] { parse_yolo_annotation("0 0.5 0.5 0.1\n"); },
      [&] { parse_yolo_annotation("7 0.5 0.5 0.1 0.1\n"); },
      [&] { parse_yolo_annotation("0 0.5 0.5 -0.1 0.1\n"); },
      [&] { parse_manifest("", ".", false); },
      [&] { parse_manifest("{\"format\":\"other\"}\n", ".", false); },
      [&] { load_model(bytes("PTLM")); },
  };
  std::size_t diagnosed = 0;
  for (std::size_t i = 0; i < fixtures.size(); ++i) {
    if (throws_ptl_error(fixtures[i])) ++diagnosed;
    else o.require(false, "fixture " + std::to_string(i) + " not diagnosed");
  }

  // Random single-byte corruptions must never escape as anything but a diagnostic.
  std::vector<FrameDetections> one{{"f", {BoundingBox{0.5, 0.5, 0.2, 0.2, Label::Red, 0.9}}}};
  const std::string good_det = encode_detections(one);
  std::size_t mutations = 0;
  for (int i = 0; i < 3000; ++i) {
    auto w = good_wav;
    w[rng() % w.size()] = static_cast<std::uint8_t>(rng());
    auto p = good_ppm;
    p[rng() % p.size()] = static_cast<std::uint8_t>(rng());
    std::string d = good_det;
    d[rng() % d.size()] = static_cast<char>(rng());
    const bool ok = parses_or_diagnoses([&] { decode_wav(w); }) && parses_or_diagnoses([&] { decode_ppm(p); }) &&
                    parses_or_diagnoses([&] { parse_detections(d); });
    if (!ok) {
      o.require(false, "mutation " + std::to_string(i) + " escaped without a diagnostic");
      break;
    }
    mutations += 3;
  }
  if (o.pass)
    o.detail = std::to_string(wav_files) + " WAV and " + std::to_string(det_files) + " detection round trips, " +
               std::to_string(diagnosed) + " fixtures diagnosed, " + std::to_string(mutations) + " mutations survived";
  return o;
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "ptl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = ptl::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << "  " << args[1] << ": " << err.str();
  if (out_text) *out_text = out.str();
  return code;
}

std::string end_to_end(const testutil::TempDir& dir, const std::string& tag) {
  const std::string root = dir / tag;
  const std::string manifest = root + "/corpus/manifest.jsonl";
  if (cli({"synth", "--out", root + "/corpus", "--windows-per-condition", "48", "--seed", "77"}) ||
      cli({"train-audio", "--corpus", manifest, "--seed", "77", "--trees", "40", "--out", root + "/audio.ptlm"}) ||
      cli({"train-fusion", "--audio-corpus", manifest, "--vision-corpus", manifest, "--seed", "77", "--trees", "40",
           "--out", root + "/fused.ptlm"}))
    return {};
  std::string report;
  for (const char* mode : {"audio", "vision", "decision", "feature"}) {
    const std::string model = std::string(mode) == "feature" ? "/fused.ptlm" : "/audio.ptlm";
    std::string text;
    if (cli({"evaluate", "--model", root + model, "--corpus", manifest, "--condition", "each", "--mode", mode,
             "--report", "csv"},
            &text))
      return {};
    report += text;
  }
  return report;
}

Outcome determinism() {
  Outcome o;
  testutil::TempDir dir("acc7");
  const std::string a = end_to_end(dir, "run1");
  const std::string b = end_to_end(dir, "run2");
  o.require(!a.empty(), "pipeline failed");
  o.require(a == b, "reports differ between identical runs");
  o.require(read_bytes(dir / "run1/audio.ptlm") == read_bytes(dir / "run2/audio.ptlm") &&
                read_bytes(dir / "run1/fused.ptlm") == read_bytes(dir / "run2/fused.ptlm"),
            "models differ between identical runs");
  if (o.pass) o.detail = "reports and models byte-identical (" + std::to_string(a.size()) + " report bytes)";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1 mfcc-oracle", mfcc_oracle},
      {"2 accuracy-orderings", accuracy_orderings},
      {"3 hue-rule-exhaustive", hue_rule},
      {"4 frames-and-fused-length", frames_and_fused_length},
      {"5 grid-search", grid},
      {"6 bit-exact-io", bit_exact_io},
      {"7 end-to-end-determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
