#include "decodewin/manifest.hpp"

#include "decodewin/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace decodewin {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a64(buf.view());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs.emplace_back(path.generic_string(), hex64(fnv1a64_file(path)));
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["argv"] = argv;
  j["config"] = config;
  nlohmann::json in = nlohmann::json::array();
  for (const auto& [p, d] : inputs) in.push_back({{"path", p}, {"fnv1a64", d}});
  j["inputs"] = std::move(in);
  j["seed"] = seed;
  j["version"] = version;
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& doc) {
  RunManifest m;
  try {
    m.command = doc.at("command").get<std::string>();
    m.argv = doc.at("argv").get<std::vector<std::string>>();
    m.config = doc.at("config");
    for (const auto& in : doc.at("inputs"))
      m.inputs.emplace_back(in.at("path").get<std::string>(), in.at("fnv1a64").get<std::string>());
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.version = doc.at("version").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return m;
}

void RunManifest::write(const std::filesystem::path& path) const { write_text_file(path, to_json().dump(2) + "\n"); }

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open manifest");
  const auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw FormatError(path.string() + ": manifest is not valid JSON");
  return RunManifest::from_json(doc);
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open file for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

} // namespace decodewin
