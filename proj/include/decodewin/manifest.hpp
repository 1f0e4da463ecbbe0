#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace decodewin {

inline constexpr std::string_view kToolkitVersion = "1.0.0";

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

/// Record written next to every command output; enough to replay the run.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv; // arguments after the program name
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::pair<std::string, std::string>> inputs; // path, FNV-1a digest
  std::uint64_t seed = 0;
  std::string version{kToolkitVersion};

  void add_input(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& doc);
  void write(const std::filesystem::path& path) const;
};

RunManifest read_manifest(const std::filesystem::path& path);

/// Writes `text` to `path`, throwing IoError on failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

} // namespace decodewin
