#pragma once

// Small synthetic corpora shared by the tests of one binary; generated once.

#include "oracles.hpp"
#include "ptl/synth.hpp"

namespace testutil {

struct SmallCorpora {
  TempDir dir{"corpora"};
  ptl::Corpus train;
  ptl::Corpus test;

  SmallCorpora() {
    ptl::CorpusConfig cfg;
    cfg.windows_per_condition = {48, 48, 48};
    cfg.seed = 101;
    train = ptl::synth_corpus(cfg, dir / "train");
    cfg.seed = 202;
    cfg.windows_per_condition = {32, 32, 32};
    test = ptl::synth_corpus(cfg, dir / "test");
  }
};

inline const SmallCorpora& small_corpora() {
  static const SmallCorpora c;
  return c;
}

}  // namespace testutil
