#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "ptl_cli.hpp"

using namespace ptl;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "ptl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

/// One small corpus plus an audio model, built through the CLI itself.
struct Workspace {
  testutil::TempDir dir{"cli"};
  std::string corpus = dir / "c/manifest.jsonl";
  std::string model = dir / "audio.ptlm";

  Workspace() {
    const CliResult s = run({"synth", "--out", dir / "c", "--windows-per-condition", "16", "--seed", "5"});
    EXPECT_EQ(s.code, 0) << s.err;
    const CliResult t = run({"train-audio", "--corpus", corpus, "--trees", "20", "--seed", "2", "--out", model});
    EXPECT_EQ(t.code, 0) << t.err;
  }
};

const Workspace& workspace() {
  static const Workspace w;
  return w;
}

}  // namespace

TEST(Cli, UsageErrors) {
  CliResult r = run({"evaluate", "--bogus"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--corpus"), std::string::npos);  // usage text follows the error
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"classify", "--mode", "sideways"}).code, 1);
  EXPECT_EQ(run({"synth", "--out", "x", "--windows-per-condition", "0"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"train-audio", "--help"}).code, 0);
}

TEST(Cli, DataErrorsExitTwo) {
  testutil::TempDir dir("cli_missing");
  const CliResult r = run({"evaluate", "--corpus", dir / "nope.jsonl", "--mode", "vision"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(run({"classify", "--model", dir / "nope.ptlm", "--window", dir / "x.wav"}).code, 2);
}

TEST(Cli, ClassifyOccludedWindow) {
  const auto& w = workspace();
  const Corpus c = read_manifest(w.corpus);
  const CorpusItem* item = nullptr;
  for (const auto& it : c.items)
    if (it.condition == Condition::occluded) {
      item = &it;
      break;
    }
  ASSERT_NE(item, nullptr);
  const AudioClip clip = slice_clip(read_wav(c.resolve(item->audio)), item->offset_ms, c.window_ms);
  const std::string wav = w.dir / "window.wav";
  write_wav(clip, wav);
  std::vector<std::string> common{"--window", wav, "--frames"};
  for (const auto& f : item->frames) common.push_back(c.resolve(f));

  auto with = [&](std::vector<std::string> head) {
    head.insert(head.end(), common.begin(), common.end());
    return run(head);
  };
  const CliResult audio = with({"classify", "--model", w.model, "--mode", "audio"});
  const CliResult decision = with({"classify", "--model", w.model, "--mode", "decision"});
  const CliResult vision = with({"classify", "--mode", "vision"});
  ASSERT_EQ(audio.code, 0) << audio.err;
  ASSERT_EQ(decision.code, 0) << decision.err;
  ASSERT_EQ(vision.code, 0) << vision.err;
  // Nothing is visible, so decision fusion reduces to the audio answer.
  EXPECT_EQ(audio.out.substr(0, audio.out.find('\n')), decision.out.substr(0, decision.out.find('\n')));
  EXPECT_EQ(audio.out, decision.out);
  EXPECT_EQ(vision.out.substr(0, vision.out.find('\n')), "label: unavailable");
}

TEST(Cli, EvaluateReportsAreReproducible) {
  const auto& w = workspace();
  const std::vector<std::string> args{"evaluate", "--model", w.model, "--corpus", w.corpus, "--condition", "each",
                                      "--mode", "decision", "--report", "md"};
  const CliResult a = run(args), b = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(std::count(a.out.begin(), a.out.end(), '\n'), 5);  // header, rule, 3 conditions

  const CliResult csv = run({"evaluate", "--corpus", w.corpus, "--mode", "vision", "--report", "csv",
                             "--out", w.dir / "r.csv"});
  ASSERT_EQ(csv.code, 0) << csv.err;
  EXPECT_EQ(read_text(w.dir / "r.csv").rfind("method,condition,", 0), 0u);
}

TEST(Cli, CalibrateAndGridSearch) {
  const auto& w = workspace();
  const CliResult cal = run({"calibrate-hue", "--corpus", w.corpus});
  ASSERT_EQ(cal.code, 0) << cal.err;
  EXPECT_EQ(cal.out.rfind("green ", 0), 0u);
  EXPECT_NE(cal.out.find("\nred "), std::string::npos);

  const CliResult g = run({"grid-search", "--corpus", w.corpus, "--out", w.dir / "grid.csv", "--trees", "5"});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_EQ(g.out.rfind("cells: 64\n", 0), 0u);
}
