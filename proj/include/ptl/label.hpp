#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "ptl/error.hpp"

namespace ptl {

/// Traffic light state. The numeric values double as classifier label ids,
/// so Red is always label 0 and wins every tie-break.
enum class Label : int { Red = 0, Green = 1, Unavailable = 2 };

inline constexpr std::array<Label, 2> kLightLabels{Label::Red, Label::Green};

inline constexpr int label_id(Label l) noexcept { return static_cast<int>(l); }

inline std::string_view to_string(Label l) noexcept {
  switch (l) {
    case Label::Red: return "red";
    case Label::Green: return "green";
    case Label::Unavailable: return "unavailable";
  }
  return "unavailable";
}

inline std::optional<Label> parse_label(std::string_view s) noexcept {
  if (s == "red") return Label::Red;
  if (s == "green") return Label::Green;
  if (s == "unavailable") return Label::Unavailable;
  return std::nullopt;
}

inline Label label_from_id(int id) {
  if (id < 0 || id > 2) throw Error(Errc::invariant, "label id out of range: " + std::to_string(id));
  return static_cast<Label>(id);
}

}  // namespace ptl
