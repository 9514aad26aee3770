#pragma once

#include <array>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "airware/config.hpp"
#include "airware/error.hpp"
#include "airware/gesture.hpp"

namespace airware::sim {

enum class Motion { Lateral, Radial, Whip, Snap, Wand, Strike, Circle, Erase };

inline constexpr std::array<std::string_view, 8> kMotionNames = {"lateral", "radial", "whip",   "snap",
                                                                  "wand",    "strike", "circle", "erase"};

constexpr std::string_view to_string(Motion m) { return kMotionNames[static_cast<std::size_t>(m)]; }

/// Kinematic template for one gesture class. Distances in metres, times in
/// seconds, headings in degrees (0 = phone-right, counterclockwise).
struct Archetype {
  Motion motion = Motion::Lateral;
  double heading_deg = 0.0;    // lateral direction; start phase for circles
  double extent_m = 0.1;       // sweep length, radius, strike depth or wand amplitude
  double duration_s = 0.5;     // one repetition
  double effector_area = 1.0;  // (0, 1]; 1 = flat palm
  double rise_m = 0.0;         // end height minus start height
  double arc_m = 0.0;          // mid-sweep dip toward the phone
  int repeats = 1;
  double gap_s = 0.0;  // pause between repetitions
  int strokes = 0;     // direction reversals (erase) or cycles (wand)

  bool operator==(const Archetype&) const = default;
};

using ArchetypeTable = std::array<Archetype, kGestureCount>;

/// Built-in kinematics; data/archetypes.txt holds the same table as text.
inline ArchetypeTable default_archetypes() {
  ArchetypeTable t{};
  auto set = [&](Gesture g, Archetype a) { t[static_cast<std::size_t>(code(g))] = a; };
  using G = Gesture;
  using M = Motion;
  const Archetype flick{M::Lateral, 0, 0.12, 0.15, 0.5, 0.0, 0.02};
  const Archetype pan{M::Lateral, 0, 0.30, 0.80, 1.0};
  auto heading = [](Archetype a, double h) {
    a.heading_deg = h;
    return a;
  };
  set(G::FlickLeft, heading(flick, 180));
  set(G::FlickRight, heading(flick, 0));
  set(G::FlickUp, heading(flick, 90));
  set(G::FlickDown, heading(flick, -90));
  set(G::PanLeft, heading(pan, 180));
  set(G::PanRight, heading(pan, 0));
  set(G::PanUp, heading(pan, 90));
  set(G::PanDown, heading(pan, -90));
  set(G::SliceLeft, {M::Lateral, 210, 0.30, 0.20, 0.4, -0.08});
  set(G::SliceRight, {M::Lateral, -30, 0.30, 0.20, 0.4, -0.08});
  set(G::ZoomIn, {M::Radial, 0, 0.15, 0.50, 1.0, -0.15});
  set(G::ZoomOut, {M::Radial, 0, 0.15, 0.50, 1.0, 0.15});
  set(G::Whip, {M::Whip, 90, 0.15, 0.25, 0.7});
  set(G::Snap, {M::Snap, 0, 0.12, 0.35, 0.6});
  set(G::MagicWand, {M::Wand, 0, 0.015, 1.00, 0.2, 0, 0, 1, 0, 3});
  set(G::Click, {M::Strike, 0, 0.04, 0.20, 0.15});
  set(G::DoubleClick, {M::Strike, 0, 0.04, 0.20, 0.15, 0, 0, 2, 0.3});
  set(G::Tap, {M::Strike, 0, 0.07, 0.30, 1.0});
  set(G::DoubleTap, {M::Strike, 0, 0.07, 0.30, 1.0, 0, 0, 2, 0.3});
  set(G::Circle, {M::Circle, -90, 0.06, 0.90, 1.0});
  set(G::Erase, {M::Erase, 0, 0.10, 1.00, 1.0, 0, 0, 1, 0, 4});
  return t;
}

inline void validate_archetype(const Archetype& a, std::string_view name) {
  const std::string where = "archetype '" + std::string(name) + "': ";
  require(a.extent_m > 0.0, ErrorCode::InvalidArgument, where + "extent_m must be positive");
  require(a.duration_s > 0.0, ErrorCode::InvalidArgument, where + "duration_s must be positive");
  require(a.effector_area > 0.0 && a.effector_area <= 1.0, ErrorCode::InvalidArgument,
          where + "effector_area must lie in (0, 1]");
  require(a.repeats >= 1, ErrorCode::InvalidArgument, where + "repeats must be >= 1");
  require(a.gap_s >= 0.0, ErrorCode::InvalidArgument, where + "gap_s must be >= 0");
  require(a.strokes >= 0, ErrorCode::InvalidArgument, where + "strokes must be >= 0");
}

/// Parses `[gesture-name]` sections of `key = value` lines. Sections not
/// present keep their built-in defaults; unknown names or keys are errors.
inline ArchetypeTable parse_archetypes(std::istream& in) {
  ArchetypeTable t = default_archetypes();
  Archetype* current = nullptr;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = "archetype line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      require(line.back() == ']', ErrorCode::Format, where + "unterminated section");
      section = detail::trim(line.substr(1, line.size() - 2));
      const auto g = parse_gesture(section);
      require(g.has_value(), ErrorCode::Format, where + "unknown gesture '" + section + "'");
      current = &t[static_cast<std::size_t>(code(*g))];
      continue;
    }
    require(current != nullptr, ErrorCode::Format, where + "key outside a section");
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::Format, where + "missing '='");
    const auto key = detail::trim(line.substr(0, eq));
    const auto val = detail::trim(line.substr(eq + 1));
    try {
      if (key == "motion") {
        bool found = false;
        for (std::size_t i = 0; i < kMotionNames.size(); ++i)
          if (kMotionNames[i] == val) {
            current->motion = static_cast<Motion>(i);
            found = true;
          }
        require(found, ErrorCode::Format, where + "unknown motion '" + val + "'");
      } else if (key == "heading_deg") current->heading_deg = std::stod(val);
      else if (key == "extent_m") current->extent_m = std::stod(val);
      else if (key == "duration_s") current->duration_s = std::stod(val);
      else if (key == "effector_area") current->effector_area = std::stod(val);
      else if (key == "rise_m") current->rise_m = std::stod(val);
      else if (key == "arc_m") current->arc_m = std::stod(val);
      else if (key == "repeats") current->repeats = std::stoi(val);
      else if (key == "gap_s") current->gap_s = std::stod(val);
      else if (key == "strokes") current->strokes = std::stoi(val);
      else fail(ErrorCode::Format, where + "unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      fail(ErrorCode::Format, where + "bad value for '" + key + "'");
    }
  }
  for (std::size_t i = 0; i < kGestureCount; ++i) validate_archetype(t[i], kGestureNames[i]);
  return t;
}

inline ArchetypeTable load_archetypes(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open archetype table " + path);
  return parse_archetypes(in);
}

inline std::string format_archetypes(const ArchetypeTable& t) {
  std::ostringstream os;
  for (std::size_t i = 0; i < kGestureCount; ++i) {
    const auto& a = t[i];
    if (i) os << '\n';
    os << '[' << kGestureNames[i] << "]\n"
       << "motion = " << to_string(a.motion) << '\n'
       << "heading_deg = " << a.heading_deg << '\n'
       << "extent_m = " << a.extent_m << '\n'
       << "duration_s = " << a.duration_s << '\n'
       << "effector_area = " << a.effector_area << '\n'
       << "rise_m = " << a.rise_m << '\n'
       << "arc_m = " << a.arc_m << '\n'
       << "repeats = " << a.repeats << '\n'
       << "gap_s = " << a.gap_s << '\n'
       << "strokes = " << a.strokes << '\n';
  }
  return os.str();
}

}  // namespace airware::sim
