#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "airware/error.hpp"

namespace airware {

// Integer values are the confusion-matrix indices; never reorder.
enum class Gesture : std::uint8_t {
  FlickLeft = 0,
  FlickRight,
  FlickUp,
  FlickDown,
  PanLeft,
  PanRight,
  PanUp,
  PanDown,
  SliceLeft,
  SliceRight,
  ZoomIn,
  ZoomOut,
  Whip,
  Snap,
  MagicWand,
  Click,
  DoubleClick,
  Tap,
  DoubleTap,
  Circle,
  Erase,
};

inline constexpr std::size_t kGestureCount = 21;

inline constexpr std::array<std::string_view, kGestureCount> kGestureNames = {
    "flick-left", "flick-right", "flick-up",     "flick-down", "pan-left",   "pan-right", "pan-up",
    "pan-down",   "slice-left",  "slice-right",  "zoom-in",    "zoom-out",   "whip",      "snap",
    "magic-wand", "click",       "double-click", "tap",        "double-tap", "circle",    "erase",
};

constexpr int code(Gesture g) { return static_cast<int>(g); }

constexpr std::string_view to_string(Gesture g) { return kGestureNames[static_cast<std::size_t>(g)]; }

inline Gesture gesture_from_code(int c) {
  require(c >= 0 && c < static_cast<int>(kGestureCount), ErrorCode::InvalidArgument,
          "gesture code out of range: " + std::to_string(c));
  return static_cast<Gesture>(c);
}

inline std::optional<Gesture> parse_gesture(std::string_view name) {
  for (std::size_t i = 0; i < kGestureCount; ++i)
    if (kGestureNames[i] == name) return static_cast<Gesture>(i);
  return std::nullopt;
}

inline std::vector<Gesture> all_gestures() {
  std::vector<Gesture> out;
  out.reserve(kGestureCount);
  for (std::size_t i = 0; i < kGestureCount; ++i) out.push_back(static_cast<Gesture>(i));
  return out;
}

enum class GestureSetId { Full, Generic, Mapping, Gaming };

constexpr std::string_view to_string(GestureSetId id) {
  switch (id) {
    case GestureSetId::Full: return "full";
    case GestureSetId::Generic: return "generic";
    case GestureSetId::Mapping: return "mapping";
    case GestureSetId::Gaming: return "gaming";
  }
  return "full";
}

inline std::optional<GestureSetId> parse_gesture_set(std::string_view name) {
  for (auto id : {GestureSetId::Full, GestureSetId::Generic, GestureSetId::Mapping, GestureSetId::Gaming})
    if (to_string(id) == name) return id;
  return std::nullopt;
}

/// Application-specific vocabularies, sorted by class code.
inline std::vector<Gesture> gesture_set_members(GestureSetId id) {
  using G = Gesture;
  switch (id) {
    case GestureSetId::Full:
      return all_gestures();
    case GestureSetId::Generic:
      return {G::FlickLeft, G::FlickRight, G::FlickUp, G::FlickDown, G::Snap, G::DoubleTap, G::Erase};
    case GestureSetId::Mapping:
      return {G::PanLeft, G::PanRight, G::PanUp, G::PanDown, G::ZoomIn, G::ZoomOut, G::Erase};
    case GestureSetId::Gaming:
      return {G::SliceLeft, G::SliceRight, G::Whip, G::Snap};
  }
  return {};
}

}  // namespace airware
