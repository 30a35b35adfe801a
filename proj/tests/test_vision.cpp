#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "oracles.hpp"
#include "ptl/detect.hpp"
#include "ptl/synth.hpp"
#include "ptl/vision.hpp"

using namespace ptl;

namespace {

ImageRGB random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> byte(0, 255);
  ImageRGB img(w, h);
  for (auto& b : img.data) b = static_cast<std::uint8_t>(byte(rng));
  return img;
}

/// Image whose first `red` pixels are saturated red, next `green` saturated
/// green, rest grey.
ImageRGB counted(int red, int green, int total) {
  ImageRGB img(total, 1, Rgb{120, 120, 120});
  for (int i = 0; i < red; ++i) img.set(i, 0, {250, 5, 20});
  for (int i = red; i < red + green; ++i) img.set(i, 0, {0, 230, 140});
  return img;
}

}  // namespace

TEST(Hsv, Examples) {
  Hsv h = rgb_to_hsv({255, 0, 0});
  EXPECT_DOUBLE_EQ(h.h, 0.0);
  EXPECT_DOUBLE_EQ(h.s, 255.0);
  EXPECT_DOUBLE_EQ(h.v, 255.0);
  h = rgb_to_hsv({0, 255, 0});
  EXPECT_DOUBLE_EQ(h.h, 60.0);
  h = rgb_to_hsv({128, 128, 128});
  EXPECT_DOUBLE_EQ(h.h, 0.0);
  EXPECT_DOUBLE_EQ(h.s, 0.0);
  EXPECT_DOUBLE_EQ(h.v, 128.0);
}

TEST(Hsv, CornersAndRandomPixelsMatchHexcone) {
  std::vector<Rgb> px;
  for (int c = 0; c < 8; ++c)
    px.push_back({static_cast<std::uint8_t>(c & 1 ? 255 : 0), static_cast<std::uint8_t>(c & 2 ? 255 : 0),
                  static_cast<std::uint8_t>(c & 4 ? 255 : 0)});
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int i = 0; i < 1000; ++i)
    px.push_back({static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)),
                  static_cast<std::uint8_t>(byte(rng))});
  for (const Rgb& p : px) {
    const Hsv got = rgb_to_hsv(p);
    const oracle::Hsv want = oracle::hsv(p.r, p.g, p.b);
    EXPECT_NEAR(got.h, want.h, 1e-9) << int(p.r) << "," << int(p.g) << "," << int(p.b);
    EXPECT_NEAR(got.s, want.s, 1e-9);
    EXPECT_NEAR(got.v, want.v, 1e-9);
    EXPECT_GE(got.h, 0.0);
    EXPECT_LT(got.h, 180.0);
  }
}

TEST(HueHistogram, Examples) {
  auto red = hue_histogram(ImageRGB(2, 2, {255, 0, 0}));
  EXPECT_EQ(red[0], 4u);
  EXPECT_EQ(std::accumulate(red.begin(), red.end(), std::size_t{0}), 4u);
  EXPECT_EQ(hue_histogram(ImageRGB(2, 2, {0, 255, 0}))[60], 4u);
  EXPECT_THROW(hue_histogram(ImageRGB{}), Error);
}

TEST(HueHistogram, MatchesBruteForceOnRandomRegions) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ImageRGB img = random_image(7 + static_cast<int>(seed % 5), 5, seed);
    std::array<std::size_t, 180> want{};
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const Rgb p = img.at(x, y);
        ++want[static_cast<std::size_t>(std::floor(oracle::hsv(p.r, p.g, p.b).h))];
      }
    EXPECT_EQ(hue_histogram(img), want) << seed;
  }
}

TEST(PixelPercentages, Examples) {
  VisionFeatures f = pixel_percentages(counted(30, 10, 60), kDefaultRedHue, kDefaultGreenHue);
  EXPECT_DOUBLE_EQ(f.p_red, 75.0);
  EXPECT_DOUBLE_EQ(f.p_green, 25.0);
  f = pixel_percentages(counted(0, 50, 60), kDefaultRedHue, kDefaultGreenHue);
  EXPECT_DOUBLE_EQ(f.p_red, 0.0);
  EXPECT_DOUBLE_EQ(f.p_green, 100.0);
  f = pixel_percentages(counted(0, 0, 60), kDefaultRedHue, kDefaultGreenHue);
  EXPECT_TRUE(f.detected);
  EXPECT_EQ(f.p_red, 0.0);
  EXPECT_EQ(f.p_green, 0.0);
  EXPECT_EQ(classify_hue(f), Label::Unavailable);
}

TEST(PixelPercentages, Errors) {
  EXPECT_THROW(pixel_percentages(ImageRGB{}, kDefaultRedHue, kDefaultGreenHue), Error);
  try {
    pixel_percentages(counted(1, 1, 4), HueRange{80, 120}, HueRange{75, 100});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::overlapping_ranges);
  }
}

TEST(PixelPercentages, SumToHundredOnRandomRegions) {
  int with_evidence = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const VisionFeatures f = pixel_percentages(random_image(9, 9, seed + 500), kDefaultRedHue, kDefaultGreenHue);
    if (f.p_red + f.p_green == 0.0) continue;
    ++with_evidence;
    EXPECT_NEAR(f.p_red + f.p_green, 100.0, 1e-9);
  }
  EXPECT_GT(with_evidence, 100);
}

TEST(PixelPercentages, GatesExcludeDullPixels) {
  ImageRGB img(2, 1);
  img.set(0, 0, {60, 10, 20});   // red hue but v = 60
  img.set(1, 0, {200, 170, 180});  // red hue but s low
  const VisionFeatures f = pixel_percentages(img, kDefaultRedHue, kDefaultGreenHue);
  EXPECT_EQ(f.p_red, 0.0);
}

TEST(ClassifyHue, RuleExamples) {
  EXPECT_EQ(classify_hue({75, 25, true}), Label::Red);
  EXPECT_EQ(classify_hue({50, 50, true}), Label::Unavailable);
  EXPECT_EQ(classify_hue({10, 90, true}), Label::Green);
  EXPECT_EQ(classify_hue({80, 20, false}), Label::Unavailable);
}

TEST(ClassifyHue, SymmetricUnderSwap) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> pct(0, 100);
  for (int i = 0; i < 2000; ++i) {
    const double r = pct(rng), g = pct(rng);
    const Label a = classify_hue({r, g, true});
    const Label b = classify_hue({g, r, true});
    if (a == Label::Unavailable) EXPECT_EQ(b, Label::Unavailable);
    else EXPECT_NE(a, b);
    if (r == g) EXPECT_EQ(a, Label::Unavailable);
  }
}

TEST(BoundingBoxes, PixelMappingRoundTrips) {
  const PixelRect r{10, 20, 30, 44};
  const BoundingBox b = from_pixels(r, 64, 64);
  EXPECT_TRUE(is_valid(b));
  const PixelRect back = to_pixels(b, 64, 64);
  EXPECT_EQ(back.x0, 10);
  EXPECT_EQ(back.y0, 20);
  EXPECT_EQ(back.x1, 30);
  EXPECT_EQ(back.y1, 44);
  EXPECT_FALSE(is_valid(BoundingBox{0.9, 0.9, 0.3, 0.3}));
}

TEST(BlobDetector, FindsSyntheticDisc) {
  const SynthFrame f = synth_frame(Label::Green, 64, 64, 0.0, 0.0, 17);
  const auto boxes = detect_blobs(f.image);
  ASSERT_EQ(boxes.size(), 1u);
  EXPECT_GT(boxes[0].confidence, 0.5);
  // The disc sits inside the housing.
  EXPECT_GE(boxes[0].cx - boxes[0].w / 2, f.truth.cx - f.truth.w / 2 - 1e-9);
  EXPECT_LE(boxes[0].cx + boxes[0].w / 2, f.truth.cx + f.truth.w / 2 + 1e-9);
  const VisionFeatures v = pixel_percentages(crop(f.image, boxes[0]), kDefaultRedHue, kDefaultGreenHue);
  EXPECT_GT(v.p_green, 95.0);
}

TEST(BlobDetector, GreyImageGivesNothing) {
  EXPECT_TRUE(detect_blobs(ImageRGB(64, 64, {128, 128, 128})).empty());
  EXPECT_TRUE(BlobDetector().detect(ImageRGB(64, 64, {30, 30, 30}), "x").empty());
}

TEST(BlobDetector, PicksLargestComponent) {
  ImageRGB img(20, 20, {100, 100, 100});
  for (int y = 2; y < 8; ++y)
    for (int x = 2; x < 8; ++x) img.set(x, y, {250, 10, 10});
  for (int y = 12; y < 15; ++y)
    for (int x = 12; x < 18; ++x) img.set(x, y, {10, 250, 10});
  const auto boxes = detect_blobs(img);
  ASSERT_EQ(boxes.size(), 1u);
  const PixelRect r = to_pixels(boxes[0], 20, 20);
  EXPECT_EQ(r.x0, 2);
  EXPECT_EQ(r.y1, 8);
  EXPECT_DOUBLE_EQ(boxes[0].confidence, 1.0);
}

TEST(ObserveFrame, UsesMostConfidentBox) {
  ImageRGB img(10, 10, {100, 100, 100});
  for (int x = 0; x < 5; ++x) img.set(x, 0, {250, 0, 0});
  for (int x = 5; x < 10; ++x) img.set(x, 9, {0, 250, 200});
  const std::vector<BoundingBox> boxes{from_pixels({0, 0, 5, 1}, 10, 10), from_pixels({5, 9, 10, 10}, 10, 10)};
  auto b = boxes;
  b[0].confidence = 0.4;
  b[1].confidence = 0.8;
  const FrameObservation o = observe_frame(img, b, {});
  EXPECT_EQ(o.hue_label, Label::Green);
  EXPECT_DOUBLE_EQ(o.confidence, 0.8);
  const FrameObservation none = observe_frame(img, {}, {});
  EXPECT_FALSE(none.features.detected);
  EXPECT_EQ(none.hue_label, Label::Unavailable);
}

TEST(ExternalDetector, PassesBoxesThrough) {
  const std::vector<FrameDetections> recs{{"a_f0001", {BoundingBox{0.5, 0.5, 0.2, 0.2, Label::Red, 0.75}}},
                                          {"a_f0002", {}}};
  const ExternalDetector det(recs);
  const auto boxes = det.detect(ImageRGB(4, 4), "a_f0001");
  ASSERT_EQ(boxes.size(), 1u);
  EXPECT_DOUBLE_EQ(boxes[0].confidence, 0.75);
  EXPECT_EQ(boxes[0].label, Label::Red);
  EXPECT_TRUE(det.detect(ImageRGB(4, 4), "a_f0002").empty());
  try {
    det.detect(ImageRGB(4, 4), "missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_frame);
  }
}

TEST(Calibration, SyntheticDiscsGiveDisjointRangesAroundTrueHues) {
  std::vector<LabeledRegion> regions;
  for (std::uint64_t s = 0; s < 20; ++s)
    for (Label l : kLightLabels) {
      const SynthFrame f = synth_frame(l, 64, 64, 0.0, 3.0, s * 2 + (l == Label::Green));
      const auto boxes = detect_blobs(f.image);
      ASSERT_FALSE(boxes.empty());
      regions.push_back({crop(f.image, boxes[0]), l});
    }
  for (bool balance : {false, true}) {
    const HueCalibration cal = calibrate_hue_ranges(regions, balance, 0.10);
    EXPECT_TRUE(cal.green.contains(static_cast<int>(kSynthGreenHue)));
    EXPECT_TRUE(cal.red.contains(static_cast<int>(kSynthRedHue)));
    EXPECT_FALSE(overlaps(cal.green, cal.red));
  }
}

TEST(Calibration, SingleRegionContainsModalHue) {
  ImageRGB g(4, 4, {0, 200, 100});
  ImageRGB r(4, 4, {200, 0, 30});
  const int g_mode = hue_bin(rgb_to_hsv({0, 200, 100}).h);
  const int r_mode = hue_bin(rgb_to_hsv({200, 0, 30}).h);
  const std::vector<LabeledRegion> regions{{g, Label::Green}, {r, Label::Red}};
  const HueCalibration cal = calibrate_hue_ranges(regions, false);
  EXPECT_TRUE(cal.green.contains(g_mode));
  EXPECT_TRUE(cal.red.contains(r_mode));
}

TEST(Calibration, Errors) {
  const std::vector<LabeledRegion> only_red{{ImageRGB(2, 2, {250, 0, 0}), Label::Red}};
  try {
    calibrate_hue_ranges(only_red, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_label);
  }
  // Both classes share one hue: the ranges must collide.
  const std::vector<LabeledRegion> same{{ImageRGB(2, 2, {0, 250, 0}), Label::Red},
                                        {ImageRGB(2, 2, {0, 250, 0}), Label::Green}};
  try {
    calibrate_hue_ranges(same, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::overlapping_ranges);
  }
  EXPECT_THROW(calibrate_hue_ranges(only_red, false, 0.0), Error);
}
