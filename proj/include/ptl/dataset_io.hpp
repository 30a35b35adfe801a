#pragma once

// Readers and writers for the on-disk formats: PCM16 WAV, binary PPM (P6),
// YOLO box annotations, JSON-lines detection files and the corpus manifest.
// Every reader reports malformed input with a byte offset or line number.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ptl/audio_dsp.hpp"
#include "ptl/error.hpp"
#include "ptl/label.hpp"
#include "ptl/vision.hpp"

namespace ptl {

// ---------------------------------------------------------------------------
// Raw file helpers

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io_error, "cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io_error, "cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::io_error, "failed writing " + path);
}

inline std::string read_text(const std::string& path) {
  const auto b = read_bytes(path);
  return {b.begin(), b.end()};
}

inline void write_text(const std::string& path, std::string_view text) {
  write_bytes(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

// ---------------------------------------------------------------------------
// WAV (RIFF, PCM16 little-endian)

namespace detail {

inline std::uint32_t rd_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}
inline std::uint16_t rd_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | b[at + 1] << 8);
}
inline void wr_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void wr_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void wr_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace detail

inline std::int16_t to_pcm16(double x) noexcept {
  const double s = std::round(x * 32768.0);
  return static_cast<std::int16_t>(std::clamp(s, -32768.0, 32767.0));
}

/// Canonical 44-byte-header PCM16 file from interleaved samples.
inline std::vector<std::uint8_t> encode_pcm16(std::span<const std::int16_t> interleaved, int channels, int sample_rate) {
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  detail::wr_tag(out, "RIFF");
  detail::wr_u32(out, 36 + data_bytes);
  detail::wr_tag(out, "WAVE");
  detail::wr_tag(out, "fmt ");
  detail::wr_u32(out, 16);
  detail::wr_u16(out, 1);
  detail::wr_u16(out, static_cast<std::uint16_t>(channels));
  detail::wr_u32(out, static_cast<std::uint32_t>(sample_rate));
  detail::wr_u32(out, static_cast<std::uint32_t>(sample_rate * channels * 2));
  detail::wr_u16(out, static_cast<std::uint16_t>(channels * 2));
  detail::wr_u16(out, 16);
  detail::wr_tag(out, "data");
  detail::wr_u32(out, data_bytes);
  for (std::int16_t s : interleaved) detail::wr_u16(out, static_cast<std::uint16_t>(s));
  return out;
}

/// Mono PCM16; samples saturate at the int16 limits.
inline std::vector<std::uint8_t> encode_wav(const AudioClip& clip) {
  std::vector<std::int16_t> pcm(clip.samples.size());
  std::transform(clip.samples.begin(), clip.samples.end(), pcm.begin(), to_pcm16);
  return encode_pcm16(pcm, 1, clip.sample_rate);
}

inline AudioClip decode_wav(std::span<const std::uint8_t> b) {
  auto bad = [](std::size_t at, const std::string& msg) {
    return Error(Errc::malformed_input, "WAV byte " + std::to_string(at) + ": " + msg);
  };
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0) throw bad(0, "missing RIFF tag");
  if (std::memcmp(b.data() + 8, "WAVE", 4) != 0) throw bad(8, "missing WAVE tag");

  bool have_fmt = false;
  int channels = 0, sample_rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string_view id(reinterpret_cast<const char*>(b.data() + pos), 4);
    const std::size_t size = detail::rd_u32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + 16 > b.size()) throw bad(pos, "fmt chunk too short");
      const std::uint16_t format = detail::rd_u16(b, body);
      channels = detail::rd_u16(b, body + 2);
      sample_rate = static_cast<int>(detail::rd_u32(b, body + 4));
      const std::uint16_t bits = detail::rd_u16(b, body + 14);
      if (format != 1)
        throw Error(Errc::unsupported_format,
                    "WAV byte " + std::to_string(body) + ": encoding " + std::to_string(format) + " is not PCM");
      if (bits != 16)
        throw Error(Errc::unsupported_format,
                    "WAV byte " + std::to_string(body + 14) + ": " + std::to_string(bits) + "-bit samples, need 16");
      if (channels != 1 && channels != 2)
        throw Error(Errc::unsupported_format,
                    "WAV byte " + std::to_string(body + 2) + ": " + std::to_string(channels) + " channels");
      if (sample_rate <= 0) throw bad(body + 4, "non-positive sample rate");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw bad(pos, "data chunk before fmt chunk");
      if (size == 0) throw bad(pos + 4, "empty data chunk");
      if (body + size > b.size()) throw bad(pos + 4, "data chunk of " + std::to_string(size) + " bytes is truncated");
      const std::size_t frame_bytes = 2 * static_cast<std::size_t>(channels);
      if (size % frame_bytes != 0) throw bad(pos + 4, "data size not a multiple of the frame size");
      AudioClip clip;
      clip.sample_rate = sample_rate;
      clip.samples.resize(size / frame_bytes);
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        double acc = 0.0;
        for (int c = 0; c < channels; ++c)
          acc += static_cast<std::int16_t>(detail::rd_u16(b, body + i * frame_bytes + 2 * static_cast<std::size_t>(c)));
        clip.samples[i] = acc / channels / 32768.0;
      }
      return clip;
    }
    pos = body + size + (size & 1);
  }
  throw bad(pos, have_fmt ? "no data chunk" : "no fmt chunk");
}

inline AudioClip read_wav(const std::string& path) {
  try {
    return decode_wav(read_bytes(path));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

inline void write_wav(const AudioClip& clip, const std::string& path) { write_bytes(path, encode_wav(clip)); }

// ---------------------------------------------------------------------------
// PPM (binary P6, maxval 255)

inline std::vector<std::uint8_t> encode_ppm(const ImageRGB& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data.begin(), img.data.end());
  return out;
}

inline ImageRGB decode_ppm(std::span<const std::uint8_t> b) {
  auto bad = [](std::size_t at, const std::string& msg) {
    return Error(Errc::malformed_input, "PPM byte " + std::to_string(at) + ": " + msg);
  };
  if (b.size() < 2 || b[0] != 'P' || b[1] != '6') throw bad(0, "bad magic, expected P6");
  std::size_t pos = 2;
  auto next_int = [&]() -> long {
    for (;;) {
      while (pos < b.size() && std::isspace(b[pos])) ++pos;
      if (pos < b.size() && b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= b.size() || !std::isdigit(b[pos])) throw bad(pos, "expected a decimal header field");
    long v = 0;
    while (pos < b.size() && std::isdigit(b[pos])) {
      v = v * 10 + (b[pos] - '0');
      if (v > 1'000'000) throw bad(pos, "header value too large");
      ++pos;
    }
    return v;
  };
  const long w = next_int();
  const long h = next_int();
  const std::size_t maxval_at = pos;
  const long maxval = next_int();
  if (w <= 0 || h <= 0) throw bad(maxval_at, "non-positive image size");
  if (maxval != 255)
    throw Error(Errc::unsupported_format, "PPM byte " + std::to_string(maxval_at) + ": maxval " +
                                              std::to_string(maxval) + " unsupported, need 255");
  if (pos >= b.size() || !std::isspace(b[pos])) throw bad(pos, "missing whitespace after header");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  if (b.size() - pos < need)
    throw bad(pos, "truncated payload: " + std::to_string(b.size() - pos) + " of " + std::to_string(need) + " bytes");
  ImageRGB img(static_cast<int>(w), static_cast<int>(h));
  std::copy_n(b.begin() + static_cast<std::ptrdiff_t>(pos), need, img.data.begin());
  return img;
}

inline ImageRGB read_image(const std::string& path) {
  try {
    return decode_ppm(read_bytes(path));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

inline void write_image(const ImageRGB& img, const std::string& path) { write_bytes(path, encode_ppm(img)); }

// ---------------------------------------------------------------------------
// YOLO annotations: "class cx cy w h" per line, class 0 = red, 1 = green

inline std::vector<BoundingBox> parse_yolo_annotation(std::string_view text) {
  std::vector<BoundingBox> boxes;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto bad = [&](const std::string& msg) {
      return Error(Errc::malformed_input, "annotation line " + std::to_string(line_no) + ": " + msg);
    };
    std::istringstream fields(line);
    std::vector<std::string> tok{std::istream_iterator<std::string>(fields), std::istream_iterator<std::string>()};
    if (tok.empty()) continue;
    if (tok.size() != 5) throw bad("expected 5 fields, got " + std::to_string(tok.size()));
    BoundingBox box;
    if (tok[0] == "0") box.label = Label::Red;
    else if (tok[0] == "1") box.label = Label::Green;
    else throw bad("unknown class id '" + tok[0] + "'");
    double v[4];
    for (int i = 0; i < 4; ++i) {
      std::size_t used = 0;
      try {
        v[i] = std::stod(tok[static_cast<std::size_t>(i) + 1], &used);
      } catch (const std::exception&) {
        throw bad("field " + std::to_string(i + 2) + " is not a number");
      }
      if (used != tok[static_cast<std::size_t>(i) + 1].size()) throw bad("field " + std::to_string(i + 2) + " is not a number");
      if (!(v[i] >= 0.0 && v[i] <= 1.0)) throw bad("coordinate outside [0,1]");
    }
    box.cx = v[0];
    box.cy = v[1];
    box.w = v[2];
    box.h = v[3];
    if (!is_valid(box)) throw bad("box exceeds the image or has zero size");
    boxes.push_back(box);
  }
  return boxes;
}

// ---------------------------------------------------------------------------
// Detection files: one JSON object per line,
//   {"frame":"<id>","boxes":[{"label":"red","confidence":0.9,"cx":..,"cy":..,"w":..,"h":..}]}
// "label" is omitted for single-class detections.

struct FrameDetections {
  std::string frame;
  std::vector<BoundingBox> boxes;

  friend bool operator==(const FrameDetections&, const FrameDetections&) = default;
};

inline std::string encode_detections(std::span<const FrameDetections> records) {
  std::string out;
  for (const auto& rec : records) {
    nlohmann::ordered_json j;
    j["frame"] = rec.frame;
    j["boxes"] = nlohmann::ordered_json::array();
    for (const auto& b : rec.boxes) {
      nlohmann::ordered_json jb;
      if (b.label) jb["label"] = std::string(to_string(*b.label));
      jb["confidence"] = b.confidence;
      jb["cx"] = b.cx;
      jb["cy"] = b.cy;
      jb["w"] = b.w;
      jb["h"] = b.h;
      j["boxes"].push_back(std::move(jb));
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<FrameDetections> parse_detections(std::string_view text) {
  std::vector<FrameDetections> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto bad = [&](const std::string& msg) {
      return Error(Errc::malformed_input, "detections line " + std::to_string(line_no) + ": " + msg);
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw bad(e.what());
    }
    FrameDetections rec;
    try {
      rec.frame = j.at("frame").get<std::string>();
      for (const auto& jb : j.at("boxes")) {
        BoundingBox b;
        if (jb.contains("label")) {
          const auto l = parse_label(jb.at("label").get<std::string>());
          if (!l || *l == Label::Unavailable) throw bad("unknown box label");
          b.label = *l;
        }
        b.confidence = jb.at("confidence").get<double>();
        b.cx = jb.at("cx").get<double>();
        b.cy = jb.at("cy").get<double>();
        b.w = jb.at("w").get<double>();
        b.h = jb.at("h").get<double>();
        if (!is_valid(b)) throw bad("box outside the unit square or confidence outside [0,1]");
        rec.boxes.push_back(b);
      }
    } catch (const nlohmann::json::exception& e) {
      throw bad(e.what());
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::vector<FrameDetections> read_detections(const std::string& path) {
  try {
    return parse_detections(read_text(path));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

inline void write_detections(std::span<const FrameDetections> records, const std::string& path) {
  write_text(path, encode_detections(records));
}

// ---------------------------------------------------------------------------
// Corpus manifest (JSON lines). Line 1 is a header:
//   {"format":"ptl-corpus","version":1,"window_ms":250,"fps":30,"sample_rate":44100}
// every further line is one window:
//   {"id":..,"label":"red|green","condition":"clean|occluded|moving","session":..,
//    "audio":"audio/x.wav","offset_ms":..,"frames":["frames/x_f0000.ppm",..]}
// Paths are relative to the manifest's directory.

enum class Condition { clean, occluded, moving };

inline constexpr std::array<Condition, 3> kConditions{Condition::clean, Condition::occluded, Condition::moving};

inline std::string_view to_string(Condition c) noexcept {
  switch (c) {
    case Condition::clean: return "clean";
    case Condition::occluded: return "occluded";
    case Condition::moving: return "moving";
  }
  return "clean";
}

inline std::optional<Condition> parse_condition(std::string_view s) noexcept {
  for (auto c : kConditions)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

struct CorpusItem {
  std::string id;
  Label label = Label::Red;
  Condition condition = Condition::clean;
  std::string session;
  std::string audio;  // relative to the corpus root
  double offset_ms = 0.0;
  std::vector<std::string> frames;

  friend bool operator==(const CorpusItem&, const CorpusItem&) = default;
};

struct Corpus {
  std::string root;  // directory holding the manifest
  double window_ms = 250.0;
  double fps = 30.0;
  int sample_rate = 44100;
  std::vector<CorpusItem> items;

  std::string resolve(const std::string& rel) const { return (std::filesystem::path(root) / rel).string(); }
};

inline std::string encode_manifest(const Corpus& c) {
  nlohmann::ordered_json head;
  head["format"] = "ptl-corpus";
  head["version"] = 1;
  head["window_ms"] = c.window_ms;
  head["fps"] = c.fps;
  head["sample_rate"] = c.sample_rate;
  std::string out = head.dump() + "\n";
  for (const auto& it : c.items) {
    nlohmann::ordered_json j;
    j["id"] = it.id;
    j["label"] = std::string(to_string(it.label));
    j["condition"] = std::string(to_string(it.condition));
    j["session"] = it.session;
    j["audio"] = it.audio;
    j["offset_ms"] = it.offset_ms;
    j["frames"] = it.frames;
    out += j.dump();
    out += '\n';
  }
  return out;
}

/// Parses manifest text. `root` is used to resolve and (optionally) check
/// referenced files.
inline Corpus parse_manifest(std::string_view text, const std::string& root, bool check_files = true) {
  Corpus c;
  c.root = root;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  bool have_header = false;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto bad = [&](const std::string& msg) {
      return Error(Errc::malformed_input, "manifest line " + std::to_string(line_no) + ": " + msg);
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw bad(e.what());
    }
    try {
      if (!have_header) {
        if (j.value("format", std::string()) != "ptl-corpus") throw bad("missing ptl-corpus header");
        if (j.at("version").get<int>() != 1)
          throw Error(Errc::version_mismatch, "manifest line " + std::to_string(line_no) + ": unsupported version");
        c.window_ms = j.at("window_ms").get<double>();
        c.fps = j.at("fps").get<double>();
        c.sample_rate = j.at("sample_rate").get<int>();
        if (!(c.window_ms > 0) || !(c.fps > 0) || c.sample_rate < 8000) throw bad("invalid header values");
        have_header = true;
        continue;
      }
      CorpusItem it;
      it.id = j.at("id").get<std::string>();
      const auto lab = parse_label(j.at("label").get<std::string>());
      if (!lab || *lab == Label::Unavailable) throw bad("label must be red or green");
      it.label = *lab;
      const auto cond = parse_condition(j.at("condition").get<std::string>());
      if (!cond) throw bad("unknown condition");
      it.condition = *cond;
      it.session = j.value("session", it.id);
      it.audio = j.at("audio").get<std::string>();
      it.offset_ms = j.at("offset_ms").get<double>();
      if (!(it.offset_ms >= 0)) throw bad("negative offset");
      it.frames = j.at("frames").get<std::vector<std::string>>();
      if (!ids.insert(it.id).second) throw bad("duplicate id '" + it.id + "'");
      if (check_files) {
        if (!std::filesystem::exists(c.resolve(it.audio))) throw bad("missing audio file " + it.audio);
        for (const auto& f : it.frames)
          if (!std::filesystem::exists(c.resolve(f))) throw bad("missing frame file " + f);
      }
      c.items.push_back(std::move(it));
    } catch (const nlohmann::json::exception& e) {
      throw bad(e.what());
    }
  }
  if (!have_header) throw Error(Errc::malformed_input, "manifest line 1: empty manifest");
  return c;
}

inline Corpus read_manifest(const std::string& path) {
  const auto root = std::filesystem::path(path).parent_path().string();
  try {
    return parse_manifest(read_text(path), root.empty() ? "." : root);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

inline void write_manifest(const Corpus& c, const std::string& path) { write_text(path, encode_manifest(c)); }

/// Audio of one window, cut from its session recording.
inline AudioClip slice_clip(const AudioClip& src, double offset_ms, double length_ms) {
  const std::size_t start = samples_for_ms(offset_ms, src.sample_rate);
  const std::size_t len = samples_for_ms(length_ms, src.sample_rate);
  if (start + len > src.samples.size())
    throw Error(Errc::clip_too_short, "window [" + std::to_string(offset_ms) + " ms, +" + std::to_string(length_ms) +
                                          " ms) exceeds the recording");
  return AudioClip{{src.samples.begin() + static_cast<std::ptrdiff_t>(start),
                    src.samples.begin() + static_cast<std::ptrdiff_t>(start + len)},
                   src.sample_rate};
}

// ---------------------------------------------------------------------------
// Stratified train/test split

/// Seeded, label-stratified split. For every label (in ascending order) the
/// items are shuffled and round(n * test_fraction) of them go to the test
/// side. Both halves keep the input order.
template <class Item, class LabelOf>
std::pair<std::vector<Item>, std::vector<Item>> split_dataset(std::span<const Item> items, double test_fraction,
                                                              std::uint64_t seed, LabelOf label_of) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error(Errc::invalid_config, "test fraction must lie in (0, 1)");
  std::map<decltype(label_of(items[0])), std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < items.size(); ++i) by_label[label_of(items[i])].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<char> is_test(items.size(), 0);
  for (auto& [label, idx] : by_label) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(idx.size()) * test_fraction));
    for (std::size_t i = 0; i < n_test; ++i) is_test[idx[i]] = 1;
  }
  std::pair<std::vector<Item>, std::vector<Item>> out;
  for (std::size_t i = 0; i < items.size(); ++i) (is_test[i] ? out.second : out.first).push_back(items[i]);
  return out;
}

inline std::pair<Corpus, Corpus> split_dataset(const Corpus& corpus, double test_fraction, std::uint64_t seed) {
  auto [train, test] = split_dataset<CorpusItem>(corpus.items, test_fraction, seed,
                                                 [](const CorpusItem& it) { return label_id(it.label); });
  Corpus a = corpus, b = corpus;
  a.items = std::move(train);
  b.items = std::move(test);
  return {std::move(a), std::move(b)};
}

}  // namespace ptl
