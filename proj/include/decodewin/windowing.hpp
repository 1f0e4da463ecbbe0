#pragma once

#include "decodewin/tensorio.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace decodewin {

/// Context window around each phone onset.
///
/// The window holds n = round(window_ms * rate / 1000) frames at offsets
/// -floor(n/2) ... n-1-floor(n/2) relative to the onset frame.
struct WindowSpec {
  double window_ms = 1200.0;
  double frame_rate_hz = 50.0;

  int n_offsets() const;
  int first_offset() const;
  int last_offset() const;
  double frame_ms() const { return 1000.0 / frame_rate_hz; }
  double offset_ms(int j) const { return j * 1000.0 / frame_rate_hz; }
};

/// Index of the frame containing time `t_s` (frame k spans [k/rate, (k+1)/rate)).
/// A 1e-6-frame tolerance absorbs decimal rounding of aligner timestamps.
std::int64_t frame_of(double t_s, double frame_rate_hz);

struct PhoneInstance {
  std::string utterance_id;
  std::string phone;
  double onset_s = 0.0;
  int class_id = 0;
};

/// Labeled vectors for one offset, row-major.
struct OffsetSamples {
  std::vector<float> features;
  std::vector<int> labels;
  std::vector<std::size_t> instances; // index into OffsetDataset::instances

  std::size_t size() const { return labels.size(); }
};

/// F^j for every offset j of a WindowSpec, sharing one class vocabulary.
struct OffsetDataset {
  WindowSpec spec;
  std::size_t dim = 0;
  std::vector<std::string> class_vocab;
  std::vector<PhoneInstance> instances;
  std::vector<OffsetSamples> offsets; // offsets[j - spec.first_offset()]

  const OffsetSamples& at(int j) const { return offsets.at(static_cast<std::size_t>(j - spec.first_offset())); }
  std::vector<std::size_t> sample_counts() const;
  std::size_t total_samples() const;
};

OffsetDataset build_offset_dataset(std::span<const FeatureMatrix> features,
                                   std::span<const PhoneRecord> phones, const WindowSpec& spec);

/// A named set of phone labels: "all", "plosive" or an explicit list.
struct PhoneSubset {
  enum class Kind { All, Plosive, Explicit };
  Kind kind = Kind::All;
  std::set<std::string> labels; // only for Explicit

  static PhoneSubset all() { return {}; }
  static PhoneSubset plosive() { return {Kind::Plosive, {}}; }
  static PhoneSubset explicit_list(std::set<std::string> labels) {
    return {Kind::Explicit, std::move(labels)};
  }
  /// "all", "plosive", or a comma-separated label list.
  static PhoneSubset parse(std::string_view text);

  bool contains(const std::string& label) const;
  std::string name() const;
};

/// ARPAbet plosive stops.
const std::set<std::string>& plosive_labels();

std::vector<PhoneRecord> filter_phones(std::span<const PhoneRecord> records, const PhoneSubset& subset);
OffsetDataset filter_phones(const OffsetDataset& dataset, const PhoneSubset& subset);

struct FoldPlan {
  int n_folds = 0;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignment;

  int fold_of(const std::string& utterance_id) const { return assignment.at(utterance_id); }
};

/// Seeded Fisher-Yates shuffle of the sorted ids followed by round-robin assignment.
FoldPlan make_folds(std::span<const std::string> utterance_ids, int n_folds, std::uint64_t seed);

/// Keeps round(fraction * #instances) phone instances (at least one), each with
/// all of its offsets. Class ids and vocabulary are unchanged.
OffsetDataset subsample(const OffsetDataset& dataset, double fraction, std::uint64_t seed);

struct ShiftResult {
  std::vector<PhoneRecord> records;
  std::size_t dropped = 0;
};

/// Moves every interval by delta_ms; records whose onset becomes negative are dropped.
ShiftResult shift_onsets(std::span<const PhoneRecord> phones, double delta_ms);

} // namespace decodewin
