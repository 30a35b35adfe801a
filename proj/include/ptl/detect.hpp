#pragma once

// Pluggable PTL detectors: a saturated-blob detector for synthetic footage
// and a pass-through for detections computed elsewhere.

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ptl/dataset_io.hpp"
#include "ptl/error.hpp"
#include "ptl/vision.hpp"

namespace ptl {

class FrameDetector {
 public:
  virtual ~FrameDetector() = default;
  virtual std::vector<BoundingBox> detect(const ImageRGB& image, std::string_view frame_id) const = 0;
};

class BlobDetector final : public FrameDetector {
 public:
  explicit BlobDetector(BlobDetectorParams params = {}) : params_(params) {}
  std::vector<BoundingBox> detect(const ImageRGB& image, std::string_view) const override {
    return detect_blobs(image, params_);
  }

 private:
  BlobDetectorParams params_;
};

/// Looks boxes up by frame id in a detections file.
class ExternalDetector final : public FrameDetector {
 public:
  explicit ExternalDetector(std::span<const FrameDetections> records) {
    for (const auto& r : records) by_frame_[r.frame] = r.boxes;
  }
  std::vector<BoundingBox> detect(const ImageRGB&, std::string_view frame_id) const override {
    auto it = by_frame_.find(std::string(frame_id));
    if (it == by_frame_.end()) throw Error(Errc::missing_frame, "no detections for frame '" + std::string(frame_id) + "'");
    return it->second;
  }

 private:
  std::map<std::string, std::vector<BoundingBox>, std::less<>> by_frame_;
};

/// Frame id used to key external detections: the file name without extension.
inline std::string frame_id_for(const std::string& path) { return std::filesystem::path(path).stem().string(); }

}  // namespace ptl
