#include "decodewin/tensorio.hpp"

#include "decodewin/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace decodewin {
namespace {

using nlohmann::json;

constexpr std::array<char, 8> kMagic = {'F', 'D', 'T', '\0', 'v', '0', '0', '1'};
constexpr std::size_t kPreambleBytes = 12;

std::uint32_t load_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32_le(std::uint32_t v, char* out) {
  for (int i = 0; i < 4; ++i) out[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError(path.string(), "read failed");
  return std::move(buf).str();
}

json header_json(const FeatureMatrix& m) {
  json h;
  h["utterance_id"] = m.utterance_id;
  h["frame_rate_hz"] = m.frame_rate_hz;
  h["dim"] = m.dim;
  h["frames"] = m.frames;
  h["encoder_tag"] = m.encoder_tag;
  h["layer"] = m.layer ? json(*m.layer) : json(nullptr);
  return h;
}

[[noreturn]] void format_fail(const std::filesystem::path& path, const std::string& check) {
  throw FormatError(path.string() + ": " + check);
}

// Parses preamble + header; returns the byte offset where the payload starts.
std::size_t parse_header(const std::string& bytes, const std::filesystem::path& path,
                         FeatureMatrix& m) {
  if (bytes.size() < kPreambleBytes) format_fail(path, "file too short");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) format_fail(path, "bad magic");
  const auto header_len =
      load_u32_le(reinterpret_cast<const unsigned char*>(bytes.data()) + kMagic.size());
  if (bytes.size() - kPreambleBytes < header_len) format_fail(path, "header truncated");

  json h = json::parse(bytes.begin() + kPreambleBytes,
                       bytes.begin() + kPreambleBytes + header_len, nullptr, false);
  if (h.is_discarded() || !h.is_object()) format_fail(path, "header is not a JSON object");

  auto require = [&](const char* key, bool ok) {
    if (!h.contains(key)) format_fail(path, std::string("header missing key '") + key + "'");
    if (!ok) format_fail(path, std::string("header key '") + key + "' has wrong type");
  };
  require("utterance_id", h.contains("utterance_id") && h["utterance_id"].is_string());
  require("frame_rate_hz", h.contains("frame_rate_hz") && h["frame_rate_hz"].is_number());
  require("dim", h.contains("dim") && h["dim"].is_number_integer());
  require("frames", h.contains("frames") && h["frames"].is_number_integer());
  require("encoder_tag", h.contains("encoder_tag") && h["encoder_tag"].is_string());
  require("layer", h.contains("layer") && (h["layer"].is_null() || h["layer"].is_number_integer()));

  m.utterance_id = h["utterance_id"].get<std::string>();
  m.frame_rate_hz = h["frame_rate_hz"].get<double>();
  if (!(m.frame_rate_hz > 0.0) || !std::isfinite(m.frame_rate_hz))
    format_fail(path, "non-positive frame rate");
  const auto frames = h["frames"].get<std::int64_t>();
  const auto dim = h["dim"].get<std::int64_t>();
  if (frames < 1) format_fail(path, "non-positive frame count");
  if (dim < 1) format_fail(path, "non-positive dim");
  m.frames = static_cast<std::size_t>(frames);
  m.dim = static_cast<std::size_t>(dim);
  m.encoder_tag = h["encoder_tag"].get<std::string>();
  if (h["layer"].is_null())
    m.layer.reset();
  else
    m.layer = h["layer"].get<int>();
  return kPreambleBytes + header_len;
}

double parse_seconds(std::string_view field, std::string_view source, std::size_t line) {
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    throw FormatError(std::string(source) + ":" + std::to_string(line) + ": cannot parse time '" +
                      std::string(field) + "'");
  }
  return value;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

} // namespace

void validate(const FeatureMatrix& m) {
  if (m.frames < 1) throw ValidationError("feature matrix has no frames");
  if (m.dim < 1) throw ValidationError("feature matrix has zero dimension");
  if (!(m.frame_rate_hz > 0.0) || !std::isfinite(m.frame_rate_hz))
    throw ValidationError("feature matrix has non-positive frame rate");
  if (m.data.size() != m.frames * m.dim)
    throw ValidationError("feature matrix data size does not equal frames*dim");
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (!std::isfinite(m.data[i])) {
      throw ValidationError("non-finite value at frame " + std::to_string(i / m.dim) + ", dim " +
                            std::to_string(i % m.dim) + " of utterance '" + m.utterance_id + "'");
    }
  }
}

void write_feature_file(const FeatureMatrix& m, const std::filesystem::path& path) {
  validate(m);
  const std::string header = header_json(m).dump();

  std::string bytes;
  bytes.reserve(kPreambleBytes + header.size() + m.data.size() * 4);
  bytes.append(kMagic.data(), kMagic.size());
  char len[4];
  store_u32_le(static_cast<std::uint32_t>(header.size()), len);
  bytes.append(len, 4);
  bytes.append(header);
  for (float v : m.data) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    char le[4];
    store_u32_le(bits, le);
    bytes.append(le, 4);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open file for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

FeatureMatrix read_feature_header(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  FeatureMatrix m;
  parse_header(bytes, path, m);
  return m;
}

FeatureMatrix read_feature_file(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  FeatureMatrix m;
  const std::size_t payload_at = parse_header(bytes, path, m);
  const std::size_t expected = m.frames * m.dim * 4;
  const std::size_t available = bytes.size() - payload_at;
  if (available < expected) format_fail(path, "payload truncated");
  if (available > expected) format_fail(path, "payload longer than frames*dim*4");

  m.data.resize(m.frames * m.dim);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + payload_at;
  for (std::size_t i = 0; i < m.data.size(); ++i)
    m.data[i] = std::bit_cast<float>(load_u32_le(p + 4 * i));

  try {
    validate(m);
  } catch (const ValidationError& e) {
    format_fail(path, e.what());
  }
  return m;
}

std::string strip_stress(std::string_view label) {
  std::size_t end = label.size();
  while (end > 0 && std::isdigit(static_cast<unsigned char>(label[end - 1]))) --end;
  return std::string(label.substr(0, end));
}

bool is_silence_label(std::string_view label) {
  std::string lower(label);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower == "sil" || lower == "sp" || lower == "spn";
}

void validate_alignments(std::span<const PhoneRecord> records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.phone.empty())
      throw ValidationError("empty phone label in utterance '" + r.utterance_id + "'");
    if (!(r.offset_s > r.onset_s) || r.onset_s < 0.0) {
      throw ValidationError("invalid interval [" + std::to_string(r.onset_s) + ", " +
                            std::to_string(r.offset_s) + "] for phone " + r.phone +
                            " in utterance '" + r.utterance_id + "'");
    }
    if (i == 0 || records[i - 1].utterance_id != r.utterance_id) continue;
    const auto& prev = records[i - 1];
    if (r.onset_s < prev.onset_s)
      throw ValidationError("records of utterance '" + r.utterance_id + "' are not sorted");
    if (r.onset_s < prev.offset_s) {
      std::ostringstream msg;
      msg << "overlapping phones in utterance '" << r.utterance_id << "': " << prev.phone << " ["
          << prev.onset_s << ", " << prev.offset_s << "] and " << r.phone << " [" << r.onset_s
          << ", " << r.offset_s << "]";
      throw ValidationError(msg.str());
    }
  }
}

std::vector<PhoneRecord> parse_alignments(std::string_view text, std::string_view source) {
  std::vector<PhoneRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool seen_header = false;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (nl == text.size()) break;
      continue;
    }

    const auto fields = split_tabs(line);
    auto where = [&] { return std::string(source) + ":" + std::to_string(line_no) + ": "; };
    if (!seen_header) {
      if (fields.size() != 4 || fields[0] != "utterance_id" || fields[1] != "phone" ||
          fields[2] != "onset_s" || fields[3] != "offset_s") {
        throw FormatError(where() + "expected header 'utterance_id\\tphone\\tonset_s\\toffset_s'");
      }
      seen_header = true;
      continue;
    }
    if (fields.size() != 4)
      throw FormatError(where() + "expected 4 tab-separated fields, got " +
                        std::to_string(fields.size()));
    if (fields[0].empty()) throw FormatError(where() + "empty utterance_id");
    PhoneRecord r;
    r.utterance_id = std::string(fields[0]);
    r.phone = strip_stress(fields[1]);
    if (r.phone.empty()) throw FormatError(where() + "empty phone label");
    r.onset_s = parse_seconds(fields[2], source, line_no);
    r.offset_s = parse_seconds(fields[3], source, line_no);
    if (r.onset_s < 0.0) throw FormatError(where() + "negative onset");
    if (!(r.offset_s > r.onset_s)) throw FormatError(where() + "offset_s must exceed onset_s");
    records.push_back(std::move(r));
  }
  if (!seen_header) throw FormatError(std::string(source) + ": missing header line");

  std::stable_sort(records.begin(), records.end(), [](const PhoneRecord& a, const PhoneRecord& b) {
    if (a.utterance_id != b.utterance_id) return a.utterance_id < b.utterance_id;
    return a.onset_s < b.onset_s;
  });
  validate_alignments(records);
  std::erase_if(records, [](const PhoneRecord& r) { return is_silence_label(r.phone); });
  return records;
}

std::vector<PhoneRecord> read_alignments(const std::filesystem::path& path) {
  const std::string text = read_all(path);
  return parse_alignments(text, path.string());
}

void write_alignments(std::span<const PhoneRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open file for writing");
  out << "utterance_id\tphone\tonset_s\toffset_s\n";
  char buf[64];
  for (const auto& r : records) {
    out << r.utterance_id << '\t' << r.phone << '\t';
    std::snprintf(buf, sizeof buf, "%.6f", r.onset_s);
    out << buf << '\t';
    std::snprintf(buf, sizeof buf, "%.6f", r.offset_s);
    out << buf << '\n';
  }
  if (!out) throw IoError(path.string(), "write failed");
}

} // namespace decodewin
