#pragma once

// Self-describing model files: a text header line, then typed sections of
// `key value` lines and little-endian binary blobs.
//
//   AIRWARE-MODEL 1
//   section <type>
//   <key> <value>
//   blob <name> <f32|f64> <rows> <cols>
//   <rows*cols raw values>
//   endsection

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "airware/error.hpp"

namespace airware::io {

inline constexpr const char* kModelMagic = "AIRWARE-MODEL 1";

struct Blob {
  std::string name;
  bool f64 = false;
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;  // row-major; written as f32 or f64
};

struct Section {
  std::string type;
  std::vector<std::pair<std::string, std::string>> fields;
  std::vector<Blob> blobs;

  void set(const std::string& key, const std::string& value) { fields.emplace_back(key, value); }
  template <typename T>
  void set_num(const std::string& key, T v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    set(key, os.str());
  }
  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : fields)
      if (k == key) return v;
    fail(ErrorCode::Format, "model section '" + type + "' lacks field '" + key + "'");
  }
  double num(const std::string& key) const {
    try {
      return std::stod(get(key));
    } catch (const std::logic_error&) {
      fail(ErrorCode::Format, "field '" + key + "' is not a number");
    }
  }
  const Blob& blob(const std::string& name) const {
    for (const auto& b : blobs)
      if (b.name == name) return b;
    fail(ErrorCode::Format, "model section '" + type + "' lacks blob '" + name + "'");
  }
};

namespace detail {

template <typename T>
void put_le(std::ostream& out, T v) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes{};
  in.read(bytes.data(), sizeof(T));
  require(static_cast<bool>(in), ErrorCode::Format, "truncated blob");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

}  // namespace detail

inline void write_sections(std::ostream& out, const std::vector<Section>& sections) {
  out << kModelMagic << '\n';
  for (const auto& s : sections) {
    out << "section " << s.type << '\n';
    for (const auto& [k, v] : s.fields) {
      require(k.find_first_of(" \n") == std::string::npos && v.find('\n') == std::string::npos, ErrorCode::Format,
              "field '" + k + "' cannot be encoded");
      out << k << ' ' << v << '\n';
    }
    for (const auto& b : s.blobs) {
      require(b.data.size() == b.rows * b.cols, ErrorCode::ShapeMismatch, "blob '" + b.name + "' size mismatch");
      out << "blob " << b.name << ' ' << (b.f64 ? "f64" : "f32") << ' ' << b.rows << ' ' << b.cols << '\n';
      for (double v : b.data) {
        if (b.f64) detail::put_le<double>(out, v);
        else detail::put_le<float>(out, static_cast<float>(v));
      }
      out << '\n';
    }
    out << "endsection\n";
  }
}

inline std::vector<Section> read_sections(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == kModelMagic, ErrorCode::Format, "not an airware model file");
  std::vector<Section> out;
  Section* cur = nullptr;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("section ", 0) == 0) {
      out.push_back({line.substr(8), {}, {}});
      cur = &out.back();
      continue;
    }
    require(cur != nullptr, ErrorCode::Format, "content outside a section");
    if (line == "endsection") {
      cur = nullptr;
      continue;
    }
    if (line.rfind("blob ", 0) == 0) {
      std::istringstream ls(line.substr(5));
      Blob b;
      std::string type;
      require(static_cast<bool>(ls >> b.name >> type >> b.rows >> b.cols) && (type == "f32" || type == "f64"),
              ErrorCode::Format, "bad blob header: " + line);
      b.f64 = type == "f64";
      b.data.resize(b.rows * b.cols);
      for (auto& v : b.data) v = b.f64 ? detail::get_le<double>(in) : static_cast<double>(detail::get_le<float>(in));
      cur->blobs.push_back(std::move(b));
      continue;
    }
    const auto sp = line.find(' ');
    require(sp != std::string::npos, ErrorCode::Format, "bad field line: " + line);
    cur->set(line.substr(0, sp), line.substr(sp + 1));
  }
  require(cur == nullptr, ErrorCode::Format, "unterminated section");
  return out;
}

inline void save_sections(const std::string& path, const std::vector<Section>& sections) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path);
  write_sections(out, sections);
  require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + path);
}

inline std::vector<Section> load_sections(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  return read_sections(in);
}

}  // namespace airware::io
