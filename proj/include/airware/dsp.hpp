#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "airware/config.hpp"
#include "airware/dataset.hpp"
#include "airware/error.hpp"
#include "airware/fft.hpp"
#include "airware/parallel.hpp"

namespace airware::dsp {

inline constexpr double kMagnitudeFloor = 1e-12;

inline double to_db(double magnitude) { return 20.0 * std::log10(magnitude + kMagnitudeFloor); }

/// Symmetric Hamming taper, w[k] = 0.54 - 0.46 cos(2 pi k / (n - 1)).
inline std::vector<double> hamming_window(std::size_t n) {
  require(n >= 2, ErrorCode::InvalidArgument, "hamming window needs n >= 2");
  std::vector<double> w(n);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k)
    w[k] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / denom);
  return w;
}

struct Spectrogram {
  Matrix magnitudes_db;  // frames x (window/2 + 1) bins
  double bin_hz = 0.0;
  double frame_hop_s = 0.0;
  std::size_t carrier_bin = 0;
  std::size_t window = 0;
  double sample_rate_hz = 0.0;

  std::size_t frames() const { return static_cast<std::size_t>(magnitudes_db.rows()); }
  std::size_t bins() const { return static_cast<std::size_t>(magnitudes_db.cols()); }
  /// Time of the centre of frame i relative to the first sample.
  double frame_time(std::size_t i) const {
    return (static_cast<double>(i) * frame_hop_s * sample_rate_hz + static_cast<double>(window) / 2.0) /
           sample_rate_hz;
  }
  std::vector<double> frame_times() const {
    std::vector<double> t(frames());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = frame_time(i);
    return t;
  }
};

inline std::size_t frame_count(std::size_t n_samples, std::size_t window, std::size_t hop) {
  if (n_samples < window) return 0;
  return (n_samples - window) / hop + 1;
}

/// Hamming-windowed STFT magnitude in dB. Frames are transformed two at a
/// time through one complex FFT.
inline Spectrogram stft(std::span<const double> samples, const PipelineConfig& config) {
  const PipelineConfig cfg = validate_config(config);
  const std::size_t window = cfg.stft_window;
  const std::size_t hop = cfg.hop;
  require(samples.size() >= window, ErrorCode::TooShort,
          "waveform has " + std::to_string(samples.size()) + " samples, window needs " + std::to_string(window));

  const std::size_t frames = frame_count(samples.size(), window, hop);
  const std::size_t bins = window / 2 + 1;
  const auto taper = hamming_window(window);

  Spectrogram out;
  out.magnitudes_db.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));
  out.bin_hz = cfg.bin_hz();
  out.frame_hop_s = static_cast<double>(hop) / cfg.sample_rate_hz;
  out.carrier_bin = cfg.carrier_bin();
  out.window = window;
  out.sample_rate_hz = cfg.sample_rate_hz;

  std::vector<double> a(window), b(window, 0.0);
  std::vector<Complex> spec_a(bins), spec_b(bins), scratch;
  for (std::size_t f = 0; f < frames; f += 2) {
    const bool pair = f + 1 < frames;
    for (std::size_t k = 0; k < window; ++k) a[k] = samples[f * hop + k] * taper[k];
    if (pair)
      for (std::size_t k = 0; k < window; ++k) b[k] = samples[(f + 1) * hop + k] * taper[k];
    else
      std::fill(b.begin(), b.end(), 0.0);
    fft_real_pair(a, b, spec_a, spec_b, scratch);
    for (std::size_t k = 0; k < bins; ++k) {
      out.magnitudes_db(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k)) = to_db(std::abs(spec_a[k]));
      if (pair)
        out.magnitudes_db(static_cast<Eigen::Index>(f + 1), static_cast<Eigen::Index>(k)) = to_db(std::abs(spec_b[k]));
    }
  }
  return out;
}

inline Spectrogram stft(const Waveform& wave, const PipelineConfig& cfg) {
  require(std::abs(wave.sample_rate_hz - cfg.sample_rate_hz) < 1e-9, ErrorCode::InvalidArgument,
          "waveform sample rate differs from config");
  return stft(std::span<const double>(wave.samples), cfg);
}

/// Bins [carrier - hw, carrier) and (carrier, carrier + hw], carrier dropped.
inline Matrix extract_band(const Spectrogram& spec, std::size_t half_width) {
  const auto c = static_cast<long>(spec.carrier_bin);
  const auto hw = static_cast<long>(half_width);
  require(half_width > 0 && c - hw >= 0 && c + hw < static_cast<long>(spec.bins()), ErrorCode::BandOutOfRange,
          "carrier bin " + std::to_string(c) + " +/- " + std::to_string(hw) + " outside spectrum");
  Matrix band(spec.magnitudes_db.rows(), 2 * hw);
  band.leftCols(hw) = spec.magnitudes_db.middleCols(c - hw, hw);
  band.rightCols(hw) = spec.magnitudes_db.middleCols(c + 1, hw);
  return band;
}

/// Writes each IR event into the frame whose centre is nearest; frames with
/// no event stay (0, 0). Collisions keep the faster event.
inline Matrix ir_resample(const IrStream& ir, std::span<const double> frame_times) {
  const auto frames = frame_times.size();
  for (std::size_t i = 1; i < frames; ++i)
    require(frame_times[i] >= frame_times[i - 1], ErrorCode::InvalidArgument, "frame grid must be monotone");
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(frames), 2);
  if (frames == 0) return out;
  std::vector<bool> taken(frames, false);
  for (const auto& e : ir) {
    const auto it = std::lower_bound(frame_times.begin(), frame_times.end(), e.time_s);
    std::size_t idx = static_cast<std::size_t>(it - frame_times.begin());
    if (idx == frames) {
      idx = frames - 1;
    } else if (idx > 0 && e.time_s - frame_times[idx - 1] <= frame_times[idx] - e.time_s) {
      --idx;
    }
    const auto row = static_cast<Eigen::Index>(idx);
    if (!taken[idx] || e.speed > out(row, 0)) {
      out(row, 0) = e.speed;
      out(row, 1) = e.angle_deg;
      taken[idx] = true;
    }
  }
  return out;
}

/// Segment waveform + segment-relative IR events -> model features.
inline FeatureTensor featurize_segment(std::span<const double> samples, const IrStream& ir,
                                       const PipelineConfig& cfg) {
  const auto spec = stft(samples, cfg);
  FeatureTensor ft;
  ft.doppler = extract_band(spec, cfg.band_half_width);
  const auto times = spec.frame_times();
  ft.ir = ir_resample(ir, times);
  return ft;
}

// --- normalization -------------------------------------------------------

inline std::uint64_t record_key(const SampleRecord& r) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(r.user_id)) << 32) |
         (static_cast<std::uint64_t>(code(r.gesture)) << 16) | static_cast<std::uint64_t>(r.rep_index & 0xFFFF);
}

/// Fitted z-score parameters. `fitted_on` lists the record keys the
/// statistics were computed from, so callers can prove no test record
/// contributed.
struct NormStats {
  bool pooled = true;
  Vector doppler_mean;  // one entry when pooled, else one per band column
  Vector doppler_std;
  double speed_mean = 0.0, speed_std = 1.0;
  double angle_mean = 0.0, angle_std = 1.0;
  std::vector<std::uint64_t> fitted_on;  // sorted
  std::vector<std::string> warnings;

  bool was_fitted_on(std::uint64_t key) const { return std::binary_search(fitted_on.begin(), fitted_on.end(), key); }
};

namespace detail {
struct Moments {
  long double sum = 0, sum_sq = 0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    sum_sq += static_cast<long double>(v) * v;
    ++n;
  }
  double mean() const { return n ? static_cast<double>(sum / n) : 0.0; }
  double stddev() const {
    if (n == 0) return 0.0;
    const long double m = sum / n;
    const long double var = sum_sq / n - m * m;
    return var > 0 ? static_cast<double>(std::sqrt(var)) : 0.0;
  }
};

inline double clamp_std(double s, const std::string& what, std::vector<std::string>& warnings) {
  if (s < 1e-12) {
    warnings.push_back("ZeroVariance: " + what + " has zero variance; std clamped to 1");
    return 1.0;
  }
  return s;
}
}  // namespace detail

inline NormStats fit_normalization(const Dataset& ds) {
  require(ds.records.size() >= 2, ErrorCode::InsufficientSamples, "normalization needs at least 2 records");
  NormStats st;
  st.pooled = ds.config.pooled_doppler_norm;
  const auto cols = ds.records.front().features.doppler.cols();

  // Two-pass mean then variance for numerical accuracy.
  detail::Moments speed, angle;
  for (const auto& r : ds.records) {
    for (Eigen::Index i = 0; i < r.features.ir.rows(); ++i) {
      speed.add(r.features.ir(i, 0));
      angle.add(r.features.ir(i, 1));
    }
  }
  st.speed_mean = speed.mean();
  st.angle_mean = angle.mean();
  st.speed_std = detail::clamp_std(speed.stddev(), "ir speed", st.warnings);
  st.angle_std = detail::clamp_std(angle.stddev(), "ir angle", st.warnings);

  const Eigen::Index groups = st.pooled ? 1 : cols;
  Vector sum = Vector::Zero(groups), sq = Vector::Zero(groups);
  double count = 0;
  for (const auto& r : ds.records) {
    const auto& d = r.features.doppler;
    require(d.cols() == cols, ErrorCode::ShapeMismatch, "doppler column count differs between records");
    if (st.pooled) {
      sum(0) += d.sum();
    } else {
      sum += d.colwise().sum().transpose();
    }
    count += static_cast<double>(st.pooled ? d.size() : d.rows());
  }
  st.doppler_mean = sum / count;
  for (const auto& r : ds.records) {
    const auto& d = r.features.doppler;
    if (st.pooled) {
      sq(0) += (d.array() - st.doppler_mean(0)).square().sum();
    } else {
      sq += (d.rowwise() - st.doppler_mean.transpose()).array().square().colwise().sum().matrix().transpose();
    }
  }
  st.doppler_std = (sq / count).cwiseSqrt();
  for (Eigen::Index g = 0; g < groups; ++g)
    st.doppler_std(g) = detail::clamp_std(st.doppler_std(g), "doppler column " + std::to_string(g), st.warnings);

  st.fitted_on.reserve(ds.records.size());
  for (const auto& r : ds.records) st.fitted_on.push_back(record_key(r));
  std::sort(st.fitted_on.begin(), st.fitted_on.end());
  return st;
}

inline void apply_normalization(FeatureTensor& ft, const NormStats& st) {
  if (st.pooled) {
    ft.doppler.array() = (ft.doppler.array() - st.doppler_mean(0)) / st.doppler_std(0);
  } else {
    require(ft.doppler.cols() == st.doppler_mean.size(), ErrorCode::ShapeMismatch, "normalization width mismatch");
    for (Eigen::Index c = 0; c < ft.doppler.cols(); ++c)
      ft.doppler.col(c).array() = (ft.doppler.col(c).array() - st.doppler_mean(c)) / st.doppler_std(c);
  }
  ft.ir.col(0).array() = (ft.ir.col(0).array() - st.speed_mean) / st.speed_std;
  ft.ir.col(1).array() = (ft.ir.col(1).array() - st.angle_mean) / st.angle_std;
}

inline void denormalize(FeatureTensor& ft, const NormStats& st) {
  if (st.pooled) {
    ft.doppler.array() = ft.doppler.array() * st.doppler_std(0) + st.doppler_mean(0);
  } else {
    for (Eigen::Index c = 0; c < ft.doppler.cols(); ++c)
      ft.doppler.col(c).array() = ft.doppler.col(c).array() * st.doppler_std(c) + st.doppler_mean(c);
  }
  ft.ir.col(0).array() = ft.ir.col(0).array() * st.speed_std + st.speed_mean;
  ft.ir.col(1).array() = ft.ir.col(1).array() * st.angle_std + st.angle_mean;
}

/// Fits statistics when none are given, otherwise applies the given ones.
/// Returns the normalized copy together with the statistics used.
inline std::pair<Dataset, NormStats> normalize_dataset(const Dataset& ds, std::optional<NormStats> stats = std::nullopt) {
  NormStats st = stats ? std::move(*stats) : fit_normalization(ds);
  Dataset out = ds;
  for (auto& r : out.records) apply_normalization(r.features, st);
  return {std::move(out), std::move(st)};
}

/// Frame-major CSV: one row per frame, one column per bin.
inline void write_spectrogram_csv(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path);
  out.precision(9);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << '\n';
  }
}

// --- STFT parameter grid search -----------------------------------------

/// A segmented but not yet featurized sample.
struct RawSample {
  int user_id = 0;
  Gesture gesture = Gesture::FlickLeft;
  int rep_index = 0;
  SegmentationMode mode = SegmentationMode::IrRequired;
  std::vector<float> samples;
  IrStream ir;  // times relative to segment start
};

struct RawDataset {
  PipelineConfig config;
  std::vector<RawSample> samples;
};

inline Dataset featurize_raw(const RawDataset& raw, const PipelineConfig& cfg, std::size_t jobs = 1) {
  Dataset ds{validate_config(cfg), {}};
  ds.records.resize(raw.samples.size());
  parallel_for(raw.samples.size(), jobs, [&](std::size_t i) {
    const auto& s = raw.samples[i];
    const std::vector<double> wave(s.samples.begin(), s.samples.end());
    auto& r = ds.records[i];
    r.user_id = s.user_id;
    r.gesture = s.gesture;
    r.rep_index = s.rep_index;
    r.segmentation_mode = s.mode;
    r.features = featurize_segment(wave, s.ir, ds.config);
  });
  return ds;
}

struct GridCell {
  std::size_t window = 0;
  double overlap = 0.0;
  std::size_t half_width = 0;
  double score = 0.0;
  bool failed = false;
  std::string error;
};

using GridEvaluator = std::function<double(const Dataset&)>;

/// Scores all 18 (window, overlap, half-width) combinations and returns them
/// sorted by descending score; failed cells sort last.
inline std::vector<GridCell> stft_grid_search(const RawDataset& raw, const GridEvaluator& evaluate,
                                              std::size_t jobs = 1) {
  std::vector<GridCell> cells;
  for (auto w : kGridWindows)
    for (auto o : kGridOverlaps)
      for (auto hw : kGridHalfWidths) cells.push_back({w, o, hw, 0.0, false, {}});

  for (auto& cell : cells) {
    try {
      PipelineConfig cfg = raw.config;
      cfg.stft_window = cell.window;
      cfg.stft_overlap = cell.overlap;
      cfg.band_half_width = cell.half_width;
      cfg.allow_off_grid = false;
      const auto ds = featurize_raw(raw, cfg, jobs);
      cell.score = evaluate(ds);
      require(cell.score >= 0.0 && cell.score <= 1.0, ErrorCode::DomainError, "evaluator score outside [0, 1]");
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.score = 0.0;
      cell.error = e.what();
    }
  }
  std::stable_sort(cells.begin(), cells.end(), [](const GridCell& a, const GridCell& b) {
    if (a.failed != b.failed) return !a.failed;
    return a.score > b.score;
  });
  return cells;
}

}  // namespace airware::dsp
