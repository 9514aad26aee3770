#pragma once

#include <Eigen/Dense>

#include <array>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "airware/config.hpp"
#include "airware/error.hpp"
#include "airware/gesture.hpp"

namespace airware {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Waveform {
  std::vector<double> samples;
  double sample_rate_hz = 48000.0;
  bool clipped = false;  // set when summation exceeded full scale and the output was rescaled

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

/// One IR proximity notification: speed on the sensor's 0..100 scale and the
/// lateral heading in degrees (0 = toward phone-right, counterclockwise).
struct IrEvent {
  double time_s = 0.0;
  double speed = 0.0;
  double angle_deg = 0.0;

  bool operator==(const IrEvent&) const = default;
};

using IrStream = std::vector<IrEvent>;

/// Per-segment model input: the Doppler band (frames x 2*half_width, carrier
/// bin removed) and the IR channels (frames x {speed, angle}).
struct FeatureTensor {
  Matrix doppler;
  Matrix ir;

  std::size_t frames() const { return static_cast<std::size_t>(doppler.rows()); }
};

enum class Provenance : std::uint8_t { Synthetic = 0, Imported = 1 };
enum class SegmentationMode : std::uint8_t { IrRequired = 0, FreeForm = 1 };

constexpr std::string_view to_string(SegmentationMode m) {
  return m == SegmentationMode::IrRequired ? "ir-required" : "free-form";
}
constexpr std::string_view to_string(Provenance p) { return p == Provenance::Synthetic ? "synthetic" : "imported"; }

inline std::optional<SegmentationMode> parse_segmentation_mode(std::string_view s) {
  if (s == "ir-required") return SegmentationMode::IrRequired;
  if (s == "free-form") return SegmentationMode::FreeForm;
  return std::nullopt;
}

struct SampleRecord {
  int user_id = 0;
  Gesture gesture = Gesture::FlickLeft;
  int rep_index = 0;
  FeatureTensor features;
  Provenance provenance = Provenance::Synthetic;
  SegmentationMode segmentation_mode = SegmentationMode::IrRequired;
};

using ClassCounts = std::array<std::size_t, kGestureCount>;

struct Dataset {
  PipelineConfig config;
  std::vector<SampleRecord> records;

  std::size_t size() const { return records.size(); }

  /// Per-user record counts per class, always derived from the records.
  std::map<int, ClassCounts> manifest() const {
    std::map<int, ClassCounts> out;
    for (const auto& r : records) {
      auto [it, inserted] = out.try_emplace(r.user_id);
      if (inserted) it->second.fill(0);
      ++it->second[static_cast<std::size_t>(code(r.gesture))];
    }
    return out;
  }

  std::vector<int> users() const {
    std::set<int> s;
    for (const auto& r : records) s.insert(r.user_id);
    return {s.begin(), s.end()};
  }

  std::vector<Gesture> classes() const {
    std::set<int> s;
    for (const auto& r : records) s.insert(code(r.gesture));
    std::vector<Gesture> out;
    for (int c : s) out.push_back(static_cast<Gesture>(c));
    return out;
  }

  Dataset subset(const std::vector<std::size_t>& indices) const {
    Dataset out{config, {}};
    out.records.reserve(indices.size());
    for (auto i : indices) out.records.push_back(records.at(i));
    return out;
  }
};

/// Throws Format when feature shapes disagree with the config or a
/// (user, gesture, rep) key repeats.
inline void check_dataset(const Dataset& ds) {
  const auto frames = static_cast<Eigen::Index>(ds.config.frames_per_segment());
  const auto cols = static_cast<Eigen::Index>(2 * ds.config.band_half_width);
  std::set<std::tuple<int, int, int>> keys;
  for (const auto& r : ds.records) {
    require(r.features.doppler.rows() == frames && r.features.doppler.cols() == cols, ErrorCode::Format,
            "doppler dims do not match dataset config");
    require(r.features.ir.rows() == frames && r.features.ir.cols() == 2, ErrorCode::Format,
            "ir dims do not match dataset config");
    require(keys.emplace(r.user_id, code(r.gesture), r.rep_index).second, ErrorCode::Format,
            "duplicate record key (user " + std::to_string(r.user_id) + ", " + std::string(to_string(r.gesture)) +
                ", rep " + std::to_string(r.rep_index) + ")");
  }
}

/// Keeps only records whose class is in `members`.
inline Dataset filter_classes(const Dataset& ds, const std::vector<Gesture>& members) {
  Dataset out{ds.config, {}};
  for (const auto& r : ds.records)
    if (std::find(members.begin(), members.end(), r.gesture) != members.end()) out.records.push_back(r);
  return out;
}

}  // namespace airware
