#pragma once

// Synthetic gesture generator: hand trajectories rendered into the
// microphone signal (carrier + Doppler-shifted reflection + noise) and into
// IR proximity notifications, then segmented and featurized exactly like
// recorded data would be.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "airware/archetypes.hpp"
#include "airware/config.hpp"
#include "airware/dataset.hpp"
#include "airware/dsp.hpp"
#include "airware/error.hpp"
#include "airware/parallel.hpp"
#include "airware/random.hpp"
#include "airware/segment.hpp"

namespace airware::sim {

using Vec3 = Eigen::Vector3d;

/// Doppler shift of a reflector moving at speed `v` (m/s, positive toward
/// the microphone) at angle `theta` between its motion and the microphone.
inline double doppler_shift(double v, double theta, double f0, double c) {
  require(c > 0.0, ErrorCode::DomainError, "speed of sound must be positive");
  require(std::abs(v) < c, ErrorCode::DomainError, "|v| must be below the speed of sound");
  return f0 * v * std::cos(theta) / c;
}

struct MotionTrajectory {
  double dt = 1e-3;
  double start_s = 0.0;  // stream time of the first sample
  std::vector<Vec3> position;
  std::vector<double> effector_area;

  std::size_t size() const { return position.size(); }
  double duration_s() const { return position.empty() ? 0.0 : static_cast<double>(position.size() - 1) * dt; }
};

struct UserProfile {
  double speed_scale = 1.0;       // [0.5, 2]
  double angle_jitter_deg = 0.0;  // per-repetition heading noise
  double timing_jitter_s = 0.0;   // per-repetition duration noise
  double sloppiness = 0.0;        // diagonal drift of lateral gestures, fraction of 40 degrees
  double handedness = 1.0;        // sign of the drift
  double effector_scale = 1.0;    // hand size relative to the archetype
};

struct AcousticScene {
  double carrier_amp = 0.05;
  double reflection_gain = 0.25;  // amplitude per unit effector area at ref_distance_m
  double noise_std = 1e-3;
  double ref_distance_m = 0.1;
  double distance_exponent = 2.0;
  Vec3 mic_position = Vec3::Zero();
};

struct IrSensorModel {
  Vec3 sensor_position{0.0, 0.10, 0.0};
  double detection_radius_m = 0.10;
  double speed_gain = 60.0;         // 0..100 units per m/s of lateral speed
  double straight_on_path_m = 0.05;  // lateral travel below this reads as straight-on
  double timing_jitter_s = 0.03;     // notification latency noise
  double angle_noise_deg = 5.0;
};

/// Where the hand hovers while gesturing.
struct Placement {
  double center_x = 0.0, center_y = 0.10;
  double spread_m = 0.012;
  double min_height_m = 0.04, max_height_m = 0.07;
  double jitter_scale = 1.0;  // multiplies the profile's angle and timing jitter
};

inline Placement placement_for(SegmentationMode mode, const IrSensorModel& sensor = {}) {
  if (mode == SegmentationMode::IrRequired)
    return {sensor.sensor_position.x(), sensor.sensor_position.y(), 0.012, 0.04, 0.07, 1.0};
  // Users who were never shown the sensor gesture anywhere above the phone.
  return {0.0, 0.07, 0.04, 0.06, 0.18, 1.5};
}

inline UserProfile draw_user_profile(Rng& rng) {
  UserProfile p;
  p.speed_scale = std::clamp(std::exp(rng.normal(0.0, 0.25)), 0.5, 2.0);
  p.angle_jitter_deg = rng.uniform(5.0, 15.0);
  p.timing_jitter_s = rng.uniform(0.01, 0.04);
  p.sloppiness = rng.uniform(0.0, 0.4);
  p.handedness = rng.bernoulli(0.5) ? 1.0 : -1.0;
  p.effector_scale = rng.uniform(0.7, 1.3);
  return p;
}

namespace detail {

inline double min_jerk(double t) { return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t); }

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

inline double wrap_deg(double d) {
  d = std::fmod(d, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

/// Position of one repetition at normalized time tau in [0, 1].
inline Vec3 archetype_position(const Archetype& a, double tau, const Vec3& center, double height, double heading_rad,
                               double extent) {
  const Vec3 u{std::cos(heading_rad), std::sin(heading_rad), 0.0};
  const double s = min_jerk(tau);
  const double pi = std::numbers::pi;
  Vec3 p = center;
  switch (a.motion) {
    case Motion::Lateral:
      p += u * extent * (s - 0.5);
      p.z() = height - a.rise_m / 2.0 + a.rise_m * s - a.arc_m * std::sin(pi * tau);
      break;
    case Motion::Radial:
      p.z() = height + std::max(0.0, -a.rise_m) + a.rise_m * s;
      break;
    case Motion::Whip:
      p += u * (-0.6 * extent * (1.0 - s));
      p.z() = height + 0.8 * extent * (1.0 - s);
      break;
    case Motion::Snap: {
      // Approach for 80% of the time, then a short flick of the fingers.
      const double split = 0.8;
      if (tau < split) {
        p.z() = height + extent * (1.0 - min_jerk(tau / split));
      } else {
        p.z() = height + 0.02 * std::sin(pi * (tau - split) / (1.0 - split));
      }
      break;
    }
    case Motion::Wand: {
      const double cycles = std::max(1, a.strokes);
      const double w = std::sin(2.0 * pi * cycles * tau);
      p += u * (0.5 * extent * w);
      p.z() = height + extent * w;
      break;
    }
    case Motion::Strike: {
      const double c = std::cos(pi * tau);
      p.z() = height + extent * c * c;
      break;
    }
    case Motion::Circle: {
      const double phi = heading_rad + 2.0 * pi * tau;
      p += Vec3{std::cos(phi), std::sin(phi), 0.0} * extent;
      p.z() = height;
      break;
    }
    case Motion::Erase: {
      const double k = std::max(1, a.strokes);
      p += u * (0.5 * extent * std::sin(pi * k * tau));
      p.z() = height;
      break;
    }
  }
  p.z() = std::max(p.z(), 0.015);
  return p;
}

/// Raised-cosine fade of the effector area at both ends of the trajectory.
inline void taper_area(MotionTrajectory& traj, double taper_s) {
  const auto n = traj.size();
  const auto ramp = std::min<std::size_t>(static_cast<std::size_t>(std::lround(taper_s / traj.dt)), n / 2);
  for (std::size_t i = 0; i < ramp; ++i) {
    const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(ramp));
    traj.effector_area[i] *= g;
    traj.effector_area[n - 1 - i] *= g;
  }
}

}  // namespace detail

/// Samples one performance of `gesture` by a user with `profile`.
inline MotionTrajectory synth_trajectory(Gesture gesture, const UserProfile& profile, Rng& rng,
                                         const Placement& place = placement_for(SegmentationMode::IrRequired),
                                         const ArchetypeTable& table = default_archetypes(), double dt = 1e-3) {
  const Archetype& a = table[static_cast<std::size_t>(code(gesture))];
  const double jitter = place.jitter_scale;

  const Vec3 center{place.center_x + rng.normal(0.0, place.spread_m), place.center_y + rng.normal(0.0, place.spread_m),
                    0.0};
  const double height = rng.uniform(place.min_height_m, place.max_height_m);
  const double extent = a.extent_m * rng.uniform(0.9, 1.1);

  double heading = a.heading_deg + rng.normal(0.0, profile.angle_jitter_deg * jitter);
  if (a.motion == Motion::Lateral || a.motion == Motion::Erase)
    heading += profile.handedness * profile.sloppiness * 40.0;
  const double heading_rad = detail::deg2rad(heading);

  auto jittered = [&](double base) {
    const double scaled = base / profile.speed_scale;
    return std::max(0.3 * scaled, scaled + rng.normal(0.0, profile.timing_jitter_s * jitter));
  };
  const double rep_s = jittered(a.duration_s);
  const double gap_s = a.repeats > 1 ? std::max(0.05, jittered(a.gap_s)) : 0.0;
  const double area = std::clamp(a.effector_area * profile.effector_scale, 0.05, 1.0);

  MotionTrajectory traj;
  traj.dt = dt;
  const auto rep_n = static_cast<std::size_t>(std::ceil(rep_s / dt)) + 1;
  const auto gap_n = static_cast<std::size_t>(std::lround(gap_s / dt));
  for (int r = 0; r < a.repeats; ++r) {
    if (r > 0) {
      const Vec3 hold = traj.position.back();
      for (std::size_t i = 0; i < gap_n; ++i) {
        traj.position.push_back(hold);
        traj.effector_area.push_back(area);
      }
    }
    for (std::size_t i = 0; i < rep_n; ++i) {
      const double tau = static_cast<double>(i) / static_cast<double>(rep_n - 1);
      traj.position.push_back(detail::archetype_position(a, tau, center, height, heading_rad, extent));
      traj.effector_area.push_back(area);
    }
  }
  detail::taper_area(traj, 0.04);
  return traj;
}

/// Straight-line mirror of a trajectory across the vertical plane x = x0.
inline MotionTrajectory mirror_x(MotionTrajectory t, double x0) {
  for (auto& p : t.position) p.x() = 2.0 * x0 - p.x();
  return t;
}

/// Mirror across the plane y = y0.
inline MotionTrajectory mirror_y(MotionTrajectory t, double y0) {
  for (auto& p : t.position) p.y() = 2.0 * y0 - p.y();
  return t;
}

/// A reflector whose radial speed toward the microphone stays exactly
/// v*cos(theta) while its speed stays |v|: a logarithmic spiral in the x-z
/// plane through the microphone.
inline MotionTrajectory constant_doppler_trajectory(double v, double theta, double duration_s, double start_s,
                                                    double r0 = 1.5, double dt = 1e-3, double taper_s = 0.02) {
  const double radial = v * std::cos(theta);
  const double tangential = v * std::sin(theta);
  require(r0 - radial * duration_s > 0.05, ErrorCode::DomainError, "spiral would pass through the microphone");
  MotionTrajectory traj;
  traj.dt = dt;
  traj.start_s = start_s;
  const auto n = static_cast<std::size_t>(std::lround(duration_s / dt)) + 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    const double r = r0 - radial * t;
    double phi = std::numbers::pi / 2.0;
    if (std::abs(radial) > 1e-12) phi += (tangential / radial) * std::log(r0 / r);
    else phi += tangential * t / r0;
    traj.position.emplace_back(r * std::cos(phi), 0.0, r * std::sin(phi));
    traj.effector_area.push_back(1.0);
  }
  detail::taper_area(traj, taper_s);
  return traj;
}

/// Instantaneous Doppler offset (Hz) and reflection amplitude at each
/// trajectory sample.
struct ReflectionTrack {
  std::vector<double> shift_hz;
  std::vector<double> amplitude;
};

inline ReflectionTrack reflection_track(const MotionTrajectory& traj, const AcousticScene& scene,
                                        const PipelineConfig& cfg) {
  const auto n = traj.size();
  ReflectionTrack tr;
  tr.shift_hz.assign(n, 0.0);
  tr.amplitude.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 to_mic = scene.mic_position - traj.position[i];
    const double dist = std::max(to_mic.norm(), 1e-3);
    require(std::isfinite(dist), ErrorCode::DomainError, "non-finite trajectory position");
    tr.amplitude[i] = scene.reflection_gain * traj.effector_area[i] *
                      std::pow(scene.ref_distance_m / dist, scene.distance_exponent);
    if (n < 2) continue;
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
    const Vec3 vel = (traj.position[hi] - traj.position[lo]) / (static_cast<double>(hi - lo) * traj.dt);
    const double speed = vel.norm();
    if (speed < 1e-12) continue;
    const double cos_theta = std::clamp(vel.dot(to_mic) / (speed * dist), -1.0, 1.0);
    tr.shift_hz[i] = doppler_shift(speed, std::acos(cos_theta), cfg.carrier_hz, cfg.speed_of_sound_mps);
  }
  return tr;
}

/// The reflected component alone: a chirp whose phase integrates the
/// instantaneous frequency carrier + Doppler shift.
inline std::vector<double> render_reflection(const MotionTrajectory& traj, const AcousticScene& scene,
                                             const PipelineConfig& cfg, std::size_t n_samples) {
  std::vector<double> out(n_samples, 0.0);
  if (traj.size() < 2) return out;
  const auto tr = reflection_track(traj, scene, cfg);
  const double sr = cfg.sample_rate_hz;
  const double two_pi = 2.0 * std::numbers::pi;
  const auto first = static_cast<long>(std::ceil(traj.start_s * sr));
  const auto last = static_cast<long>(std::floor((traj.start_s + traj.duration_s()) * sr));
  double phase = 0.0;
  for (long i = std::max(0L, first); i <= last && i < static_cast<long>(n_samples); ++i) {
    const double pos = (static_cast<double>(i) / sr - traj.start_s) / traj.dt;
    const auto j = std::min(static_cast<std::size_t>(pos), traj.size() - 2);
    const double frac = std::clamp(pos - static_cast<double>(j), 0.0, 1.0);
    const double shift = tr.shift_hz[j] + frac * (tr.shift_hz[j + 1] - tr.shift_hz[j]);
    const double amp = tr.amplitude[j] + frac * (tr.amplitude[j + 1] - tr.amplitude[j]);
    out[static_cast<std::size_t>(i)] = amp * std::sin(phase);
    phase += two_pi * (cfg.carrier_hz + shift) / sr;
    if (phase > two_pi) phase -= two_pi;
  }
  return out;
}

/// Microphone signal: direct carrier + reflection + Gaussian noise. When the
/// sum exceeds full scale the waveform is rescaled and flagged as clipped.
inline Waveform render_audio(const MotionTrajectory& traj, const AcousticScene& scene, const PipelineConfig& cfg,
                             Rng& rng, std::size_t n_samples = 0) {
  require(scene.carrier_amp > 0.0 && scene.noise_std >= 0.0, ErrorCode::InvalidArgument, "invalid acoustic scene");
  if (n_samples == 0) n_samples = cfg.segment_samples();
  require(traj.start_s + traj.duration_s() <= static_cast<double>(n_samples) / cfg.sample_rate_hz + 1e-9,
          ErrorCode::InvalidArgument, "trajectory extends past the rendered stream");
  Waveform w;
  w.sample_rate_hz = cfg.sample_rate_hz;
  w.samples = render_reflection(traj, scene, cfg, n_samples);
  const double step = 2.0 * std::numbers::pi * cfg.carrier_hz / cfg.sample_rate_hz;
  double peak = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    double s = w.samples[i] + scene.carrier_amp * std::sin(step * static_cast<double>(i));
    if (scene.noise_std > 0.0) s += rng.normal(0.0, scene.noise_std);
    w.samples[i] = s;
    peak = std::max(peak, std::abs(s));
  }
  if (peak > 1.0) {
    w.clipped = true;
    for (auto& s : w.samples) s /= peak;
  }
  return w;
}

/// One notification per contiguous stay inside the detection sphere. The
/// heading averages entry and exit directions; motion with little lateral
/// travel reads as straight-on (speed 0, angle 0).
inline IrStream render_ir(const MotionTrajectory& traj, const IrSensorModel& sensor, Rng& rng) {
  require(sensor.detection_radius_m > 0.0, ErrorCode::InvalidArgument, "detection radius must be positive");
  IrStream out;
  const auto n = traj.size();
  auto inside = [&](std::size_t i) {
    return traj.effector_area[i] > 0.0 && (traj.position[i] - sensor.sensor_position).norm() <= sensor.detection_radius_m;
  };
  auto heading_between = [&](std::size_t a, std::size_t b) {
    const Vec3 d = traj.position[b] - traj.position[a];
    return std::atan2(d.y(), d.x());
  };
  auto lateral = [&](std::size_t a, std::size_t b) {
    const Vec3 d = traj.position[b] - traj.position[a];
    return std::hypot(d.x(), d.y());
  };

  std::size_t i = 0;
  while (i < n) {
    if (!inside(i)) {
      ++i;
      continue;
    }
    const std::size_t entry = i;
    while (i + 1 < n && inside(i + 1)) ++i;
    const std::size_t exit = i;
    ++i;

    double path = 0.0;
    for (std::size_t j = entry + 1; j <= exit; ++j) path += lateral(j - 1, j);
    const double span_s = std::max(static_cast<double>(exit - entry), 1.0) * traj.dt;

    IrEvent e;
    e.time_s = traj.start_s + 0.5 * static_cast<double>(entry + exit) * traj.dt;
    if (sensor.timing_jitter_s > 0.0) e.time_s += rng.normal(0.0, sensor.timing_jitter_s);
    if (path >= sensor.straight_on_path_m) {
      e.speed = std::clamp(sensor.speed_gain * path / span_s, 0.0, 100.0);
      const std::size_t k = std::max<std::size_t>(1, std::min<std::size_t>(20, (exit - entry) / 4));
      double a_in = heading_between(entry, entry + k);
      double a_out = heading_between(exit - k, exit);
      if (lateral(entry, entry + k) < 1e-9) a_in = heading_between(entry, exit);
      if (lateral(exit - k, exit) < 1e-9) a_out = heading_between(entry, exit);
      const double sx = std::cos(a_in) + std::cos(a_out);
      const double sy = std::sin(a_in) + std::sin(a_out);
      const double mean = std::hypot(sx, sy) < 1e-9 ? a_in : std::atan2(sy, sx);
      double deg = mean * 180.0 / std::numbers::pi;
      if (sensor.angle_noise_deg > 0.0) deg += rng.normal(0.0, sensor.angle_noise_deg);
      e.angle_deg = detail::wrap_deg(deg);
    }
    out.push_back(e);
  }
  return out;
}

// --- dataset generation ----------------------------------------------------

struct SimulationOptions {
  AcousticScene scene;
  IrSensorModel sensor;
  ArchetypeTable archetypes = default_archetypes();
  double lead_in_s = 1.2;      // earliest gesture onset within the stream
  double onset_spread_s = 0.6;  // onset drawn uniformly from [lead_in, lead_in + spread]
  double stream_s = 4.5;
  int max_retries = 20;
  std::size_t jobs = 1;
  bool keep_raw = false;
};

struct SimulationResult {
  Dataset dataset;
  dsp::RawDataset raw;  // filled when keep_raw
  std::vector<UserProfile> profiles;
  std::vector<std::string> warnings;
};

/// Renders n_users x 21 classes x reps labelled samples. Every record is
/// produced from its own derived random stream, so output is independent of
/// `jobs`.
inline SimulationResult simulate_dataset(int n_users, int reps, SegmentationMode mode, const PipelineConfig& config,
                                         const Rng& rng, const SimulationOptions& opts = {}) {
  require(n_users >= 2, ErrorCode::TooFewUsers, "need at least 2 users, got " + std::to_string(n_users));
  require(reps >= 1, ErrorCode::InvalidArgument, "need at least 1 repetition per gesture");
  const PipelineConfig cfg = validate_config(config);
  const auto stream_n = static_cast<std::size_t>(std::lround(opts.stream_s * cfg.sample_rate_hz));
  const Placement place = placement_for(mode, opts.sensor);

  SimulationResult result;
  result.dataset.config = cfg;
  result.raw.config = cfg;
  for (int u = 0; u < n_users; ++u) {
    Rng user_rng = rng.split(0x5EED0000ull + static_cast<std::uint64_t>(u));
    result.profiles.push_back(draw_user_profile(user_rng));
  }

  const std::size_t total = static_cast<std::size_t>(n_users) * kGestureCount * static_cast<std::size_t>(reps);
  result.dataset.records.resize(total);
  if (opts.keep_raw) result.raw.samples.resize(total);
  std::vector<std::string> warnings(total);
  std::vector<char> clipped(total, 0);

  parallel_for(total, opts.jobs, [&](std::size_t idx) {
    const int rep = static_cast<int>(idx % static_cast<std::size_t>(reps));
    const auto g = static_cast<Gesture>((idx / static_cast<std::size_t>(reps)) % kGestureCount);
    const int user = static_cast<int>(idx / (static_cast<std::size_t>(reps) * kGestureCount));
    const Rng record_rng = rng.split(idx + 1);

    std::optional<seg::Segment> chosen;
    MotionTrajectory traj;
    Waveform wave;
    IrStream ir;
    // Free-form capture has no notion of a failed take; only the IR-gated
    // protocol re-records.
    const int attempts = mode == SegmentationMode::IrRequired ? opts.max_retries : 1;
    for (int attempt = 0; attempt < attempts && !chosen; ++attempt) {
      Rng r = record_rng.split(static_cast<std::uint64_t>(attempt));
      traj = synth_trajectory(g, result.profiles[static_cast<std::size_t>(user)], r, place, opts.archetypes);
      traj.start_s = opts.lead_in_s + r.uniform(0.0, opts.onset_spread_s);
      ir = render_ir(traj, opts.sensor, r);
      if (mode == SegmentationMode::IrRequired && ir.empty()) continue;
      wave = render_audio(traj, opts.scene, cfg, r, stream_n);
      auto segs = mode == SegmentationMode::IrRequired ? seg::segment_by_ir(wave, ir, cfg)
                                                       : seg::segment_freeform(wave, ir, cfg);
      if (!segs.empty()) chosen = std::move(segs.front());
    }
    if (!chosen) {
      require(mode == SegmentationMode::FreeForm, ErrorCode::SimulationStall,
              std::string(to_string(g)) + " never activated the IR sensor in " + std::to_string(opts.max_retries) +
                  " attempts (user " + std::to_string(user + 1) + ")");
      // Nothing fired: keep the window where the prompt expected the gesture.
      warnings[idx] = "free-form record without trigger, window at expected onset (user " + std::to_string(user + 1) +
                      ", " + std::string(to_string(g)) + ", rep " + std::to_string(rep) + ")";
      const double expected = opts.lead_in_s + opts.onset_spread_s / 2.0;
      chosen = seg::extract_segment(wave, ir, {expected, seg::TriggerKind::Energy}, cfg);
    }

    clipped[idx] = wave.clipped;
    auto& rec = result.dataset.records[idx];
    rec.user_id = user + 1;
    rec.gesture = g;
    rec.rep_index = rep;
    rec.provenance = Provenance::Synthetic;
    rec.segmentation_mode = mode;
    rec.features = dsp::featurize_segment(chosen->samples, chosen->ir, cfg);
    if (opts.keep_raw) {
      auto& raw = result.raw.samples[idx];
      raw.user_id = rec.user_id;
      raw.gesture = g;
      raw.rep_index = rep;
      raw.mode = mode;
      raw.samples.assign(chosen->samples.begin(), chosen->samples.end());
      raw.ir = chosen->ir;
    }
  });
  for (auto& w : warnings)
    if (!w.empty()) result.warnings.push_back(std::move(w));
  if (const auto n = std::count(clipped.begin(), clipped.end(), 1); n > 0)
    result.warnings.push_back(std::to_string(n) + " of " + std::to_string(total) +
                              " streams exceeded full scale and were rescaled");
  return result;
}

}  // namespace airware::sim
