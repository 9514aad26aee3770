#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "airware/error.hpp"

namespace airware {

/// Parameters shared by simulation, feature extraction and segmentation.
/// Field names double as the keys of the on-disk config file.
struct PipelineConfig {
  double carrier_hz = 18000.0;
  double sample_rate_hz = 48000.0;
  std::size_t stft_window = 4096;
  double stft_overlap = 0.5;
  std::size_t band_half_width = 16;
  double buffer_half_len_s = 1.25;
  double energy_threshold_db = 10.0;
  double speed_of_sound_mps = 343.0;
  std::uint64_t rng_seed = 0;
  // Pool the Doppler band into a single (mean, std) when normalizing; false
  // standardizes each band column separately.
  bool pooled_doppler_norm = true;
  // Accept window/overlap/band values outside the searched grid.
  bool allow_off_grid = false;

  // Filled in by validate_config.
  std::size_t hop = 0;

  std::size_t hop_samples() const {
    return static_cast<std::size_t>(std::llround(static_cast<double>(stft_window) * (1.0 - stft_overlap)));
  }
  std::size_t segment_samples() const {
    return static_cast<std::size_t>(std::llround(2.0 * buffer_half_len_s * sample_rate_hz));
  }
  std::size_t frames_per_segment() const {
    const auto n = segment_samples();
    const auto h = hop_samples();
    if (n < stft_window || h == 0) return 0;
    return (n - stft_window) / h + 1;
  }
  double bin_hz() const { return sample_rate_hz / static_cast<double>(stft_window); }
  double carrier_bin_exact() const { return carrier_hz * static_cast<double>(stft_window) / sample_rate_hz; }
  std::size_t carrier_bin() const { return static_cast<std::size_t>(std::llround(carrier_bin_exact())); }

  bool operator==(const PipelineConfig&) const = default;
};

inline constexpr std::size_t kGridWindows[] = {1024, 2048, 4096};
inline constexpr double kGridOverlaps[] = {0.25, 0.5, 0.75};
inline constexpr std::size_t kGridHalfWidths[] = {8, 16};

struct ConfigIssue {
  ErrorCode code;
  std::string message;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : Error(issues.front().code, join(issues)), issues_(std::move(issues)) {}
  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<ConfigIssue>& issues) {
    std::string out;
    for (const auto& i : issues) {
      if (!out.empty()) out += "; ";
      out += std::string(to_string(i.code)) + " (" + i.message + ")";
    }
    return out;
  }
  std::vector<ConfigIssue> issues_;
};

/// Checks every constraint at once and returns the config with `hop` filled
/// in. Throws ConfigError listing all violations.
inline PipelineConfig validate_config(PipelineConfig cfg) {
  std::vector<ConfigIssue> issues;
  auto issue = [&](ErrorCode c, std::string m) { issues.push_back({c, std::move(m)}); };

  if (!(cfg.sample_rate_hz > 0.0)) issue(ErrorCode::InvalidArgument, "sample_rate_hz must be positive");
  if (!(cfg.carrier_hz > 0.0)) issue(ErrorCode::InvalidArgument, "carrier_hz must be positive");
  if (cfg.carrier_hz >= cfg.sample_rate_hz / 2.0)
    issue(ErrorCode::NyquistViolation, "carrier " + std::to_string(cfg.carrier_hz) + " Hz >= Nyquist " +
                                           std::to_string(cfg.sample_rate_hz / 2.0) + " Hz");
  if (!(cfg.speed_of_sound_mps > 0.0)) issue(ErrorCode::InvalidArgument, "speed_of_sound_mps must be positive");
  if (!(cfg.buffer_half_len_s > 0.0)) issue(ErrorCode::InvalidArgument, "buffer_half_len_s must be positive");
  if (!(cfg.stft_overlap >= 0.0 && cfg.stft_overlap < 1.0))
    issue(ErrorCode::InvalidArgument, "stft_overlap must lie in [0, 1)");
  if (cfg.stft_window < 2 || (cfg.stft_window & (cfg.stft_window - 1)) != 0)
    issue(ErrorCode::InvalidArgument, "stft_window must be a power of two");
  if (cfg.band_half_width == 0) issue(ErrorCode::InvalidArgument, "band_half_width must be positive");

  if (!cfg.allow_off_grid) {
    bool window_ok = false, overlap_ok = false, band_ok = false;
    for (auto w : kGridWindows) window_ok |= cfg.stft_window == w;
    for (auto o : kGridOverlaps) overlap_ok |= std::abs(cfg.stft_overlap - o) < 1e-12;
    for (auto b : kGridHalfWidths) band_ok |= cfg.band_half_width == b;
    if (!window_ok) issue(ErrorCode::GridViolation, "stft_window " + std::to_string(cfg.stft_window));
    if (!overlap_ok) issue(ErrorCode::GridViolation, "stft_overlap " + std::to_string(cfg.stft_overlap));
    if (!band_ok) issue(ErrorCode::GridViolation, "band_half_width " + std::to_string(cfg.band_half_width));
  }

  if (issues.empty()) {
    if (cfg.hop_samples() == 0) issue(ErrorCode::InvalidArgument, "hop rounds to zero");
    const double bin = cfg.carrier_bin_exact();
    const auto half = static_cast<double>(cfg.band_half_width);
    if (bin - half < 0.0 || bin + half >= static_cast<double>(cfg.stft_window / 2 + 1))
      issue(ErrorCode::BandOutOfRange, "carrier band exceeds spectrum");
    if (cfg.segment_samples() < cfg.stft_window) issue(ErrorCode::TooShort, "segment shorter than one window");
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));

  cfg.hop = cfg.hop_samples();
  return cfg;
}

namespace detail {
inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}
inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCode::Format, "expected boolean, got '" + v + "'");
}
}  // namespace detail

/// Parses `key = value` lines; `#` starts a comment. Unknown keys are errors.
inline PipelineConfig parse_config(std::istream& in) {
  PipelineConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::Format, "config line " + std::to_string(lineno) + ": missing '='");
    const auto key = detail::trim(line.substr(0, eq));
    const auto val = detail::trim(line.substr(eq + 1));
    try {
      if (key == "carrier_hz") cfg.carrier_hz = std::stod(val);
      else if (key == "sample_rate_hz") cfg.sample_rate_hz = std::stod(val);
      else if (key == "stft_window") cfg.stft_window = std::stoul(val);
      else if (key == "stft_overlap") cfg.stft_overlap = std::stod(val);
      else if (key == "band_half_width") cfg.band_half_width = std::stoul(val);
      else if (key == "buffer_half_len_s") cfg.buffer_half_len_s = std::stod(val);
      else if (key == "energy_threshold_db") cfg.energy_threshold_db = std::stod(val);
      else if (key == "speed_of_sound_mps") cfg.speed_of_sound_mps = std::stod(val);
      else if (key == "rng_seed") cfg.rng_seed = std::stoull(val);
      else if (key == "pooled_doppler_norm") cfg.pooled_doppler_norm = detail::parse_bool(val);
      else if (key == "allow_off_grid") cfg.allow_off_grid = detail::parse_bool(val);
      else fail(ErrorCode::Format, "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      fail(ErrorCode::Format, "config line " + std::to_string(lineno) + ": bad value for '" + key + "'");
    }
  }
  return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open config " + path);
  return parse_config(in);
}

inline std::string format_config(const PipelineConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "carrier_hz = " << cfg.carrier_hz << '\n'
     << "sample_rate_hz = " << cfg.sample_rate_hz << '\n'
     << "stft_window = " << cfg.stft_window << '\n'
     << "stft_overlap = " << cfg.stft_overlap << '\n'
     << "band_half_width = " << cfg.band_half_width << '\n'
     << "buffer_half_len_s = " << cfg.buffer_half_len_s << '\n'
     << "energy_threshold_db = " << cfg.energy_threshold_db << '\n'
     << "speed_of_sound_mps = " << cfg.speed_of_sound_mps << '\n'
     << "rng_seed = " << cfg.rng_seed << '\n'
     << "pooled_doppler_norm = " << (cfg.pooled_doppler_norm ? "true" : "false") << '\n'
     << "allow_off_grid = " << (cfg.allow_off_grid ? "true" : "false") << '\n';
  return os.str();
}

}  // namespace airware
