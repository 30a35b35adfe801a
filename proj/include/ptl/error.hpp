#pragma once

#include <stdexcept>
#include <string>

namespace ptl {

/// Error categories. The CLI maps `invariant` to exit code 3 and every other
/// category to exit code 2.
enum class Errc {
  invalid_config,
  clip_too_short,
  too_few_frames,
  empty_region,
  dimension_mismatch,
  empty_dataset,
  missing_label,
  overlapping_ranges,
  version_mismatch,
  corrupt_payload,
  unsupported_format,
  malformed_input,
  missing_frame,
  io_error,
  invariant,
};

inline const char* errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::invalid_config: return "invalid config";
    case Errc::clip_too_short: return "clip too short";
    case Errc::too_few_frames: return "too few frames";
    case Errc::empty_region: return "empty region";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::empty_dataset: return "empty dataset";
    case Errc::missing_label: return "missing label";
    case Errc::overlapping_ranges: return "overlapping ranges";
    case Errc::version_mismatch: return "version mismatch";
    case Errc::corrupt_payload: return "corrupt payload";
    case Errc::unsupported_format: return "unsupported format";
    case Errc::malformed_input: return "malformed input";
    case Errc::missing_frame: return "missing frame";
    case Errc::io_error: return "i/o error";
    case Errc::invariant: return "invariant violation";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ptl
