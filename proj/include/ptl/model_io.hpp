#pragma once

// Binary model container.
//
//   offset  field
//   0       magic "PTLM"
//   4       u8  format version (kModelFormatVersion)
//   5       u8  kind: 1 = forest, 2 = k-NN
//   6       u32 feature dimension
//   10      u32 label count, then per label: u16 length + UTF-8 bytes
//           u32 metadata entry count, then per entry: key and value strings
//           kind-specific payload
//   end-8   u64 FNV-1a hash of every preceding byte
//
// Integers are little-endian; reals are IEEE-754 binary64 bit patterns.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ptl/classifiers.hpp"
#include "ptl/error.hpp"

namespace ptl {

inline constexpr std::uint8_t kModelFormatVersion = 1;

using Classifier = std::variant<ForestModel, KnnModel>;

/// A trained classifier plus free-form string metadata (feature settings).
struct StoredModel {
  Classifier classifier;
  std::map<std::string, std::string> meta;

  std::size_t dim() const {
    return std::visit([](const auto& m) { return m.dim; }, classifier);
  }
  const std::vector<std::string>& label_names() const {
    return std::visit([](const auto& m) -> const std::vector<std::string>& { return m.label_names; }, classifier);
  }
  std::string meta_or(const std::string& key, const std::string& fallback) const {
    auto it = meta.find(key);
    return it == meta.end() ? fallback : it->second;
  }
};

inline Prediction predict(const Classifier& c, std::span<const double> x) {
  return std::visit(
      [&](const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, ForestModel>) return rf_predict(m, x);
        else return knn_predict(m, x);
      },
      c);
}

inline Prediction predict(const StoredModel& m, std::span<const double> x) { return predict(m.classifier, x); }

inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    if (s.size() > 0xffff) throw Error(Errc::invalid_config, "string too long for model header");
    u16(static_cast<std::uint16_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t>& bytes() noexcept { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::size_t n = u16();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  /// Guards element counts read from the stream against the bytes left.
  std::size_t count(std::size_t min_bytes_each) {
    const std::size_t n = u32();
    if (min_bytes_each > 0 && n > remaining() / min_bytes_each)
      throw Error(Errc::corrupt_payload, "element count " + std::to_string(n) + " at byte " +
                                             std::to_string(pos_ - 4) + " exceeds payload");
    return n;
  }
  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n)
      throw Error(Errc::corrupt_payload, "truncated at byte " + std::to_string(pos_) + " (need " + std::to_string(n) +
                                             " bytes, " + std::to_string(remaining()) + " left)");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline void write_forest(ByteWriter& w, const ForestModel& m) {
  w.u32(static_cast<std::uint32_t>(m.params.n_trees));
  w.u32(static_cast<std::uint32_t>(m.params.max_depth));
  w.u64(m.params.seed);
  w.u8(m.params.bootstrap ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(m.params.max_features));
  w.u32(static_cast<std::uint32_t>(m.trees.size()));
  for (const auto& t : m.trees) {
    w.u32(static_cast<std::uint32_t>(t.nodes.size()));
    for (const auto& n : t.nodes) {
      w.i32(n.feature);
      if (n.is_leaf()) {
        for (double p : n.distribution) w.f64(p);
      } else {
        w.f64(n.threshold);
        w.u32(n.left);
        w.u32(n.right);
      }
    }
  }
}

inline ForestModel read_forest(ByteReader& r, std::size_t dim, std::vector<std::string> labels) {
  ForestModel m;
  m.dim = dim;
  m.label_names = std::move(labels);
  m.params.n_trees = static_cast<int>(r.u32());
  m.params.max_depth = static_cast<int>(r.u32());
  m.params.seed = r.u64();
  m.params.bootstrap = r.u8() != 0;
  m.params.max_features = static_cast<int>(r.u32());
  const std::size_t n_trees = r.count(4);
  if (n_trees == 0) throw Error(Errc::corrupt_payload, "forest without trees");
  m.trees.resize(n_trees);
  for (auto& t : m.trees) {
    const std::size_t n_nodes = r.count(4);
    if (n_nodes == 0) throw Error(Errc::corrupt_payload, "tree without nodes at byte " + std::to_string(r.pos()));
    t.nodes.resize(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
      auto& n = t.nodes[i];
      const std::size_t at = r.pos();
      n.feature = r.i32();
      if (n.feature < 0) {
        n.feature = -1;
        n.distribution.resize(m.label_names.size());
        for (auto& p : n.distribution) p = r.f64();
      } else {
        n.threshold = r.f64();
        n.left = r.u32();
        n.right = r.u32();
        // Children always follow their parent, which also rules out cycles.
        if (static_cast<std::size_t>(n.feature) >= dim || n.left <= i || n.right <= i || n.left >= n_nodes ||
            n.right >= n_nodes)
          throw Error(Errc::corrupt_payload, "invalid tree node at byte " + std::to_string(at));
      }
    }
  }
  return m;
}

inline void write_knn(ByteWriter& w, const KnnModel& m) {
  w.u32(static_cast<std::uint32_t>(m.k));
  w.u32(static_cast<std::uint32_t>(m.rows.size()));
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    for (double v : m.rows[i]) w.f64(v);
    w.u32(static_cast<std::uint32_t>(m.labels[i]));
  }
}

inline KnnModel read_knn(ByteReader& r, std::size_t dim, std::vector<std::string> labels) {
  KnnModel m;
  m.dim = dim;
  m.label_names = std::move(labels);
  m.k = static_cast<int>(r.u32());
  const std::size_t n = r.count(8 * dim + 4);
  if (m.k < 1 || static_cast<std::size_t>(m.k) > n) throw Error(Errc::corrupt_payload, "k inconsistent with rows");
  m.rows.assign(n, std::vector<double>(dim));
  m.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : m.rows[i]) v = r.f64();
    m.labels[i] = static_cast<int>(r.u32());
    if (static_cast<std::size_t>(m.labels[i]) >= m.label_names.size())
      throw Error(Errc::corrupt_payload, "row label out of range at byte " + std::to_string(r.pos() - 4));
  }
  return m;
}

}  // namespace detail

inline std::vector<std::uint8_t> save_model(const StoredModel& model) {
  detail::ByteWriter w;
  w.raw("PTLM", 4);
  w.u8(kModelFormatVersion);
  w.u8(std::holds_alternative<ForestModel>(model.classifier) ? 1 : 2);
  w.u32(static_cast<std::uint32_t>(model.dim()));
  const auto& labels = model.label_names();
  w.u32(static_cast<std::uint32_t>(labels.size()));
  for (const auto& l : labels) w.str(l);
  w.u32(static_cast<std::uint32_t>(model.meta.size()));
  for (const auto& [k, v] : model.meta) {
    w.str(k);
    w.str(v);
  }
  std::visit(
      [&](const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, ForestModel>) detail::write_forest(w, m);
        else detail::write_knn(w, m);
      },
      model.classifier);
  const std::uint64_t hash = fnv1a(w.bytes());
  w.u64(hash);
  return std::move(w.bytes());
}

inline StoredModel load_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), "PTLM", 4) != 0)
    throw Error(Errc::corrupt_payload, "missing PTLM magic at byte 0");
  if (bytes[4] != kModelFormatVersion)
    throw Error(Errc::version_mismatch, "model format version " + std::to_string(bytes[4]) + ", expected " +
                                            std::to_string(kModelFormatVersion) + " (byte 4)");
  if (bytes.size() < 14) throw Error(Errc::corrupt_payload, "truncated header");
  const auto body = bytes.first(bytes.size() - 8);
  detail::ByteReader tail(bytes.last(8));
  if (fnv1a(body) != tail.u64())
    throw Error(Errc::corrupt_payload, "checksum mismatch over bytes 0-" + std::to_string(body.size()));

  detail::ByteReader r(body);
  r.u32();  // magic
  r.u8();   // version
  const std::uint8_t kind = r.u8();
  const std::size_t dim = r.u32();
  if (dim == 0) throw Error(Errc::corrupt_payload, "zero feature dimension");
  const std::size_t n_labels = r.count(2);
  std::vector<std::string> labels(n_labels);
  for (auto& l : labels) l = r.str();
  if (labels.empty()) throw Error(Errc::corrupt_payload, "empty label set");

  StoredModel out;
  const std::size_t n_meta = r.count(4);
  for (std::size_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    out.meta[std::move(k)] = r.str();
  }
  if (kind == 1) out.classifier = detail::read_forest(r, dim, std::move(labels));
  else if (kind == 2) out.classifier = detail::read_knn(r, dim, std::move(labels));
  else throw Error(Errc::corrupt_payload, "unknown model kind " + std::to_string(kind) + " at byte 5");
  if (r.remaining() != 0)
    throw Error(Errc::corrupt_payload, std::to_string(r.remaining()) + " trailing bytes after payload");
  return out;
}

inline void save_model_file(const StoredModel& model, const std::string& path) {
  const auto bytes = save_model(model);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io_error, "cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::io_error, "failed writing " + path);
}

inline StoredModel load_model_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io_error, "cannot open model " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return load_model(bytes);
}

}  // namespace ptl
