#pragma once

#include "decodewin/linclass.hpp"
#include "decodewin/windowing.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace decodewin {

struct CurveMeta {
  std::string encoder_tag;
  std::optional<int> layer;
  std::string phone_subset = "all";
  bool normalized = false;
  int folds = 0;
  std::uint64_t seed = 0;
  double delay_ms = 0.0;
  double window_ms = 0.0;
  double frame_rate_hz = 0.0;
  int batches = 0;
  std::size_t min_samples = 0;

  /// Short human label, e.g. "synth-av L9 all d80".
  std::string label() const;
};

/// Accuracy versus time offset from the phone onset.
struct DecodabilityCurve {
  std::vector<double> offsets_ms;
  std::vector<std::optional<double>> accuracies; // nullopt = too few samples
  std::vector<std::size_t> n_samples;
  CurveMeta meta;

  std::size_t size() const { return offsets_ms.size(); }
  std::optional<double> max_accuracy() const;
};

struct CurveSettings {
  int batches = 20;
  std::size_t min_samples = 0; // 0 = 10 x number of classes
  unsigned threads = 0;        // 0 = DECODEWIN_THREADS / hardware
};

/// Mean of per-batch accuracies over min(batches, n) contiguous near-equal parts.
double batched_accuracy(const LinearClassifier& clf, const SampleView& eval, int batches);

/// Trains one classifier per (offset, fold) on the other folds and scores it on
/// the held-out fold split into equal batches; batch means are averaged over
/// batches, then folds. Offsets with fewer than min_samples samples are missing.
DecodabilityCurve compute_curve(const OffsetDataset& dataset, const FoldPlan& folds,
                                const TrainConfig& config, const CurveSettings& settings = {});

DecodabilityCurve normalize_curve(const DecodabilityCurve& curve);

struct PeakReport {
  double peak_time_ms = 0.0;
  double peak_value = 0.0;
  std::string tie_policy = "earliest";
  CurveMeta meta;
};

PeakReport find_peak(const DecodabilityCurve& curve);

/// Earliest offset whose normalized accuracy reaches theta (no interpolation).
double decodability_onset(const DecodabilityCurve& normalized, double theta = 0.5);

struct OffsetDelta {
  double offset_ms = 0.0;
  double a = 0.0;
  double b = 0.0;
  double delta = 0.0; // a - b
};

struct CurveComparison {
  double theta = 0.5;
  PeakReport peak_a;
  PeakReport peak_b;
  double peak_delta_ms = 0.0;  // peak(a) - peak(b)
  double onset_a_ms = 0.0;
  double onset_b_ms = 0.0;
  double onset_delta_ms = 0.0; // onset(a) - onset(b), on normalized curves
  std::vector<OffsetDelta> deltas;
};

/// Compares on a's grid inside the common range, reading b at its nearest grid point.
CurveComparison compare_curves(const DecodabilityCurve& a, const DecodabilityCurve& b, double theta = 0.5);

// Serialization. CSV columns: offset_ms,accuracy,n_samples,missing.
std::string curve_to_csv(const DecodabilityCurve& curve);
DecodabilityCurve curve_from_csv(std::string_view text, std::string_view source);
nlohmann::json to_json(const CurveMeta& meta);
nlohmann::json to_json(const DecodabilityCurve& curve);
nlohmann::json to_json(const PeakReport& peak);
nlohmann::json to_json(const CurveComparison& cmp);
DecodabilityCurve curve_from_json(const nlohmann::json& doc);

/// Reads a curve from .json or .csv (by extension).
DecodabilityCurve read_curve(const std::filesystem::path& path);

/// Formats a double with 17 significant digits (round-trips exactly).
std::string format_double(double v);

} // namespace decodewin
