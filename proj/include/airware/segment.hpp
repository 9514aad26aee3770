#pragma once

#include <algorithm>
#include <cmath>
#include <string_view>
#include <vector>

#include "airware/config.hpp"
#include "airware/dataset.hpp"
#include "airware/dsp.hpp"

namespace airware::seg {

enum class TriggerKind { Ir, Energy };

constexpr std::string_view to_string(TriggerKind k) { return k == TriggerKind::Ir ? "ir" : "energy"; }

struct SegmentTrigger {
  double time_s = 0.0;
  TriggerKind kind = TriggerKind::Ir;

  bool operator==(const SegmentTrigger&) const = default;
};

struct Segment {
  SegmentTrigger trigger;
  double start_s = 0.0;         // stream time of the first segment sample
  std::vector<double> samples;  // exactly cfg.segment_samples() long
  IrStream ir;                  // times relative to start_s
};

/// Cuts [t - half, t + half) around the trigger, zero-padding past either
/// end of the stream.
inline Segment extract_segment(const Waveform& wave, const IrStream& ir, const SegmentTrigger& trigger,
                               const PipelineConfig& cfg) {
  const auto length = cfg.segment_samples();
  const double sr = wave.sample_rate_hz;
  const long start = std::lround((trigger.time_s - cfg.buffer_half_len_s) * sr);
  Segment seg;
  seg.trigger = trigger;
  seg.start_s = static_cast<double>(start) / sr;
  seg.samples.assign(length, 0.0);
  const long n = static_cast<long>(wave.samples.size());
  for (std::size_t i = 0; i < length; ++i) {
    const long src = start + static_cast<long>(i);
    if (src >= 0 && src < n) seg.samples[i] = wave.samples[static_cast<std::size_t>(src)];
  }
  const double end_s = seg.start_s + static_cast<double>(length) / sr;
  for (const auto& e : ir)
    if (e.time_s >= seg.start_s && e.time_s < end_s) seg.ir.push_back({e.time_s - seg.start_s, e.speed, e.angle_deg});
  return seg;
}

/// Greedy clustering: the earliest unclaimed trigger opens a window of
/// `merge_s`; everything inside it collapses into one trigger. Within a
/// cluster the first IR trigger wins over energy triggers.
inline std::vector<SegmentTrigger> merge_triggers(std::vector<SegmentTrigger> triggers, double merge_s) {
  std::stable_sort(triggers.begin(), triggers.end(), [](const SegmentTrigger& a, const SegmentTrigger& b) {
    if (a.time_s != b.time_s) return a.time_s < b.time_s;
    return a.kind == TriggerKind::Ir && b.kind != TriggerKind::Ir;
  });
  std::vector<SegmentTrigger> out;
  std::size_t i = 0;
  while (i < triggers.size()) {
    const double anchor = triggers[i].time_s;
    std::size_t j = i;
    const SegmentTrigger* chosen = nullptr;
    for (; j < triggers.size() && triggers[j].time_s <= anchor + merge_s; ++j)
      if (!chosen && triggers[j].kind == TriggerKind::Ir) chosen = &triggers[j];
    out.push_back(chosen ? *chosen : triggers[i]);
    i = j;
  }
  return out;
}

inline std::vector<SegmentTrigger> ir_triggers(const IrStream& ir) {
  std::vector<SegmentTrigger> t;
  t.reserve(ir.size());
  for (const auto& e : ir) t.push_back({e.time_s, TriggerKind::Ir});
  return t;
}

/// One fixed-length segment per cluster of IR activations.
inline std::vector<Segment> segment_by_ir(const Waveform& wave, const IrStream& ir, const PipelineConfig& cfg) {
  std::vector<Segment> out;
  for (const auto& t : merge_triggers(ir_triggers(ir), cfg.buffer_half_len_s))
    out.push_back(extract_segment(wave, ir, t, cfg));
  return out;
}

/// Fires when the mean dB level of the two bins beside the carrier rises at
/// least `threshold_db` above the median of the preceding (up to) ten
/// frames. After a trigger, frames within `refractory_s` are ignored.
inline std::vector<SegmentTrigger> detect_energy_event(const dsp::Spectrogram& spec, double threshold_db,
                                                       double refractory_s) {
  require(spec.frames() >= 2, ErrorCode::TooShort, "energy detection needs at least two frames");
  const auto c = static_cast<Eigen::Index>(spec.carrier_bin);
  require(c >= 1 && c + 1 < static_cast<Eigen::Index>(spec.bins()), ErrorCode::BandOutOfRange,
          "carrier neighbours outside spectrum");
  constexpr std::size_t kBaselineFrames = 10;

  std::vector<double> level(spec.frames());
  for (std::size_t i = 0; i < level.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    level[i] = 0.5 * (spec.magnitudes_db(r, c - 1) + spec.magnitudes_db(r, c + 1));
  }

  std::vector<SegmentTrigger> out;
  double blocked_until = -1.0;
  std::vector<double> window;
  for (std::size_t i = 1; i < level.size(); ++i) {
    const double t = spec.frame_time(i);
    if (t < blocked_until) continue;
    const std::size_t from = i > kBaselineFrames ? i - kBaselineFrames : 0;
    window.assign(level.begin() + static_cast<long>(from), level.begin() + static_cast<long>(i));
    const auto mid = window.begin() + static_cast<long>(window.size() / 2);
    std::nth_element(window.begin(), mid, window.end());
    double median = *mid;
    if (window.size() % 2 == 0) median = 0.5 * (median + *std::max_element(window.begin(), mid));
    if (level[i] - median >= threshold_db) {
      out.push_back({t, TriggerKind::Energy});
      blocked_until = t + refractory_s;
    }
  }
  return out;
}

/// Segments around either an IR activation or a Doppler energy rise.
inline std::vector<Segment> segment_freeform(const Waveform& wave, const IrStream& ir, const PipelineConfig& cfg) {
  auto triggers = ir_triggers(ir);
  if (wave.samples.size() >= cfg.stft_window * 2) {
    const auto spec = dsp::stft(wave, cfg);
    const auto energy = detect_energy_event(spec, cfg.energy_threshold_db, 2.0 * cfg.buffer_half_len_s);
    triggers.insert(triggers.end(), energy.begin(), energy.end());
  }
  std::vector<Segment> out;
  for (const auto& t : merge_triggers(std::move(triggers), cfg.buffer_half_len_s))
    out.push_back(extract_segment(wave, ir, t, cfg));
  return out;
}

}  // namespace airware::seg
