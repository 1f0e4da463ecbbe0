#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace decodewin {

/// One utterance's encoder output: frames x dims, row-major (frame-major).
struct FeatureMatrix {
  std::string utterance_id;
  double frame_rate_hz = 0.0;
  std::size_t frames = 0;
  std::size_t dim = 0;
  std::vector<float> data;
  std::string encoder_tag;
  std::optional<int> layer;

  std::span<const float> row(std::size_t frame) const {
    return {data.data() + frame * dim, dim};
  }

  bool operator==(const FeatureMatrix&) const = default;
};

/// One aligned phone instance.
struct PhoneRecord {
  std::string utterance_id;
  std::string phone;
  double onset_s = 0.0;
  double offset_s = 0.0;

  bool operator==(const PhoneRecord&) const = default;
};

/// Throws ValidationError unless the matrix satisfies its invariants
/// (T >= 1, D >= 1, positive rate, data size T*D, every value finite).
void validate(const FeatureMatrix& matrix);

/// Writes the FDT container. Nothing is written when validation fails.
void write_feature_file(const FeatureMatrix& matrix, const std::filesystem::path& path);

/// Reads and checks an FDT container; FormatError names the failed check.
FeatureMatrix read_feature_file(const std::filesystem::path& path);

/// Parses the payload-free part of a file. Used by `validate` on large corpora.
FeatureMatrix read_feature_header(const std::filesystem::path& path);

/// "AH0" -> "AH". Only trailing digits are removed.
std::string strip_stress(std::string_view label);

/// Silence tokens ("sil", "sp", "spn", case-insensitive) never become classes.
bool is_silence_label(std::string_view label);

/// Reads an alignment TSV. Rows are returned sorted by (utterance_id, onset_s),
/// stress digits stripped and silence tokens removed.
std::vector<PhoneRecord> read_alignments(const std::filesystem::path& path);

/// Same as read_alignments but from in-memory text; `source` names it in errors.
std::vector<PhoneRecord> parse_alignments(std::string_view text, std::string_view source);

/// Writes records as TSV with microsecond precision.
void write_alignments(std::span<const PhoneRecord> records, const std::filesystem::path& path);

/// Throws ValidationError if records of one utterance overlap or are unsorted.
void validate_alignments(std::span<const PhoneRecord> records);

} // namespace decodewin
