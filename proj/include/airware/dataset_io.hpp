#pragma once

// Dataset directory layout:
//   manifest.json          config, per-record index, per-user class counts
//   records/<name>.bin     "AWREC1" header, u32 frames, u32 doppler cols,
//                          u32 ir cols, then doppler and ir as f32 (row-major)
//   raw/<name>.bin         optional; "AWRAW1" header, u32 samples, u32 events,
//                          f32 samples, then events as f64 (time, speed, angle)

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "airware/config.hpp"
#include "airware/dataset.hpp"
#include "airware/dsp.hpp"
#include "airware/error.hpp"
#include "airware/model_io.hpp"

namespace airware::io {

namespace fs = std::filesystem;

inline constexpr char kRecordMagic[8] = {'A', 'W', 'R', 'E', 'C', '1', 0, 0};
inline constexpr char kRawMagic[8] = {'A', 'W', 'R', 'A', 'W', '1', 0, 0};

inline std::string record_name(int user, Gesture g, int rep) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "u%03d_%s_r%03d.bin", user, std::string(to_string(g)).c_str(), rep);
  return buf;
}

inline nlohmann::ordered_json config_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["carrier_hz"] = c.carrier_hz;
  j["sample_rate_hz"] = c.sample_rate_hz;
  j["stft_window"] = c.stft_window;
  j["stft_overlap"] = c.stft_overlap;
  j["band_half_width"] = c.band_half_width;
  j["buffer_half_len_s"] = c.buffer_half_len_s;
  j["energy_threshold_db"] = c.energy_threshold_db;
  j["speed_of_sound_mps"] = c.speed_of_sound_mps;
  j["rng_seed"] = c.rng_seed;
  j["pooled_doppler_norm"] = c.pooled_doppler_norm;
  j["allow_off_grid"] = c.allow_off_grid;
  return j;
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  c.carrier_hz = j.at("carrier_hz").get<double>();
  c.sample_rate_hz = j.at("sample_rate_hz").get<double>();
  c.stft_window = j.at("stft_window").get<std::size_t>();
  c.stft_overlap = j.at("stft_overlap").get<double>();
  c.band_half_width = j.at("band_half_width").get<std::size_t>();
  c.buffer_half_len_s = j.at("buffer_half_len_s").get<double>();
  c.energy_threshold_db = j.at("energy_threshold_db").get<double>();
  c.speed_of_sound_mps = j.at("speed_of_sound_mps").get<double>();
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  c.pooled_doppler_norm = j.at("pooled_doppler_norm").get<bool>();
  c.allow_off_grid = j.at("allow_off_grid").get<bool>();
  return validate_config(c);
}

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) { io::detail::put_le<std::uint32_t>(out, v); }
inline std::uint32_t read_u32(std::istream& in) { return io::detail::get_le<std::uint32_t>(in); }

inline void write_f32s(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) io::detail::put_le<float>(out, static_cast<float>(m.data()[i]));
}
inline void read_f32s(std::istream& in, Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(io::detail::get_le<float>(in));
}

inline void check_magic(std::istream& in, const char (&magic)[8], const std::string& path) {
  char buf[8] = {};
  in.read(buf, 8);
  require(static_cast<bool>(in) && std::equal(buf, buf + 8, magic), ErrorCode::Format, "bad header in " + path);
}

inline std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + p.string());
  return out;
}

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + p.string());
  return in;
}

inline void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  require(!ec && fs::is_directory(p), ErrorCode::Io, "cannot create directory " + p.string());
}

}  // namespace detail

inline void write_record(const fs::path& path, const FeatureTensor& ft) {
  auto out = detail::open_out(path);
  out.write(kRecordMagic, 8);
  detail::write_u32(out, static_cast<std::uint32_t>(ft.doppler.rows()));
  detail::write_u32(out, static_cast<std::uint32_t>(ft.doppler.cols()));
  detail::write_u32(out, static_cast<std::uint32_t>(ft.ir.cols()));
  detail::write_f32s(out, ft.doppler);
  detail::write_f32s(out, ft.ir);
  require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + path.string());
}

inline FeatureTensor read_record(const fs::path& path) {
  auto in = detail::open_in(path);
  detail::check_magic(in, kRecordMagic, path.string());
  const auto frames = detail::read_u32(in), dcols = detail::read_u32(in), icols = detail::read_u32(in);
  FeatureTensor ft;
  ft.doppler.resize(frames, dcols);
  ft.ir.resize(frames, icols);
  detail::read_f32s(in, ft.doppler);
  detail::read_f32s(in, ft.ir);
  in.peek();
  require(in.eof(), ErrorCode::Format, "trailing bytes in " + path.string());
  return ft;
}

inline void write_raw(const fs::path& path, const dsp::RawSample& s) {
  auto out = detail::open_out(path);
  out.write(kRawMagic, 8);
  detail::write_u32(out, static_cast<std::uint32_t>(s.samples.size()));
  detail::write_u32(out, static_cast<std::uint32_t>(s.ir.size()));
  for (float v : s.samples) io::detail::put_le<float>(out, v);
  for (const auto& e : s.ir) {
    io::detail::put_le<double>(out, e.time_s);
    io::detail::put_le<double>(out, e.speed);
    io::detail::put_le<double>(out, e.angle_deg);
  }
  require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + path.string());
}

inline void read_raw(const fs::path& path, dsp::RawSample& s) {
  auto in = detail::open_in(path);
  detail::check_magic(in, kRawMagic, path.string());
  const auto n = detail::read_u32(in), events = detail::read_u32(in);
  s.samples.resize(n);
  for (auto& v : s.samples) v = io::detail::get_le<float>(in);
  s.ir.resize(events);
  for (auto& e : s.ir) {
    e.time_s = io::detail::get_le<double>(in);
    e.speed = io::detail::get_le<double>(in);
    e.angle_deg = io::detail::get_le<double>(in);
  }
}

/// Writes manifest.json and one record file per sample. When `raw` is given
/// its waveforms go under raw/ (same names, same order as the records).
inline void save_dataset(const fs::path& dir, const Dataset& ds, const dsp::RawDataset* raw = nullptr) {
  check_dataset(ds);
  detail::ensure_dir(dir / "records");
  if (raw) {
    require(raw->samples.size() == ds.records.size(), ErrorCode::ShapeMismatch, "raw and featurized counts differ");
    detail::ensure_dir(dir / "raw");
  }
  nlohmann::ordered_json j;
  j["format"] = "airware-dataset";
  j["version"] = 1;
  j["config"] = config_json(ds.config);
  j["has_raw"] = raw != nullptr;
  nlohmann::ordered_json recs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    const auto name = record_name(r.user_id, r.gesture, r.rep_index);
    write_record(dir / "records" / name, r.features);
    if (raw) write_raw(dir / "raw" / name, raw->samples[i]);
    nlohmann::ordered_json e;
    e["file"] = name;
    e["user"] = r.user_id;
    e["gesture"] = std::string(to_string(r.gesture));
    e["rep"] = r.rep_index;
    e["provenance"] = std::string(to_string(r.provenance));
    e["segmentation_mode"] = std::string(to_string(r.segmentation_mode));
    recs.push_back(e);
  }
  j["records"] = recs;
  nlohmann::ordered_json counts;
  for (const auto& [user, cc] : ds.manifest()) {
    nlohmann::ordered_json u;
    for (std::size_t c = 0; c < kGestureCount; ++c)
      if (cc[c]) u[std::string(kGestureNames[c])] = cc[c];
    counts[std::to_string(user)] = u;
  }
  j["class_counts"] = counts;
  auto out = detail::open_out(dir / "manifest.json");
  out << j.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorCode::Io, "write failed for manifest.json");
}

struct LoadedDataset {
  Dataset dataset;
  std::optional<dsp::RawDataset> raw;
};

inline LoadedDataset load_dataset(const fs::path& dir, bool with_raw = false) {
  nlohmann::json j;
  {
    auto in = detail::open_in(dir / "manifest.json");
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Format, "manifest.json: " + std::string(e.what()));
    }
  }
  LoadedDataset out;
  try {
    require(j.at("format") == "airware-dataset", ErrorCode::Format, "not an airware dataset: " + dir.string());
    out.dataset.config = config_from_json(j.at("config"));
    const bool has_raw = j.value("has_raw", false);
    require(!with_raw || has_raw, ErrorCode::Io, "dataset has no raw waveforms: " + dir.string());
    if (with_raw) out.raw = dsp::RawDataset{out.dataset.config, {}};
    for (const auto& e : j.at("records")) {
      SampleRecord r;
      r.user_id = e.at("user").get<int>();
      const auto g = parse_gesture(e.at("gesture").get<std::string>());
      require(g.has_value(), ErrorCode::Format, "unknown gesture in manifest");
      r.gesture = *g;
      r.rep_index = e.at("rep").get<int>();
      r.provenance = e.at("provenance") == "imported" ? Provenance::Imported : Provenance::Synthetic;
      const auto mode = parse_segmentation_mode(e.at("segmentation_mode").get<std::string>());
      require(mode.has_value(), ErrorCode::Format, "unknown segmentation mode in manifest");
      r.segmentation_mode = *mode;
      const auto name = e.at("file").get<std::string>();
      r.features = read_record(dir / "records" / name);
      if (with_raw) {
        dsp::RawSample s{r.user_id, r.gesture, r.rep_index, r.segmentation_mode, {}, {}};
        read_raw(dir / "raw" / name, s);
        out.raw->samples.push_back(std::move(s));
      }
      out.dataset.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, "manifest.json: " + std::string(e.what()));
  }
  check_dataset(out.dataset);
  return out;
}

}  // namespace airware::io
