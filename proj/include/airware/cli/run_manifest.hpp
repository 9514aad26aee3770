#pragma once

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "airware/error.hpp"

namespace airware::cli {

namespace fs = std::filesystem;

inline std::string sha1_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  require(ctx != nullptr, ErrorCode::Io, "cannot allocate digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 && EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  require(ok, ErrorCode::Io, "SHA-1 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// Same digest `git hash-object` reports for the content.
inline std::string git_blob_hash(const std::string& content) {
  std::string framed = "blob " + std::to_string(content.size());
  framed.push_back('\0');
  return sha1_hex(framed + content);
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + p.string());
  out << content;
  require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + p.string());
}

inline constexpr const char* kRunManifestName = "run_manifest.json";

/// Hashes of every regular file below `root` (or of `root` itself), keyed by
/// path relative to `base`. The run manifest is skipped.
inline std::map<std::string, std::string> hash_tree(const fs::path& root, const fs::path& base) {
  std::map<std::string, std::string> out;
  auto add = [&](const fs::path& p) {
    if (p.filename() == kRunManifestName) return;
    out[fs::relative(p, base).generic_string()] = git_blob_hash(read_file(p));
  };
  if (fs::is_regular_file(root)) {
    add(root);
  } else if (fs::is_directory(root)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) add(f);
  }
  return out;
}

/// Provenance record written once per output directory.
struct RunManifest {
  std::vector<std::string> command_line;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;  // empty: everything under the manifest directory
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
  std::map<std::string, double> timings_s;

  void mark(const std::string& phase, std::chrono::steady_clock::time_point since) {
    timings_s[phase] = std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
  }

  void write(const fs::path& dir) {
    const auto out_dir = fs::absolute(dir).lexically_normal();
    nlohmann::ordered_json j;
    j["command_line"] = command_line;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    nlohmann::ordered_json in = nlohmann::ordered_json::object();
    for (const auto& p : inputs) {
      const auto a = fs::absolute(p).lexically_normal();
      for (const auto& [k, v] : hash_tree(a, a.parent_path())) in[k] = v;
    }
    j["inputs"] = in;
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    if (outputs.empty())
      for (const auto& [k, v] : hash_tree(out_dir, out_dir)) out[k] = v;
    for (const auto& p : outputs)
      for (const auto& [k, v] : hash_tree(fs::absolute(p).lexically_normal(), out_dir)) out[k] = v;
    j["outputs"] = out;
    mark("total", started);
    j["timings_s"] = timings_s;
    write_file(out_dir / kRunManifestName, j.dump(2) + "\n");
  }
};

}  // namespace airware::cli
