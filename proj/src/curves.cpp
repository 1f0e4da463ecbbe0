#include "decodewin/curves.hpp"

#include "decodewin/errors.hpp"
#include "decodewin/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace decodewin {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string CurveMeta::label() const {
  std::string out = encoder_tag.empty() ? std::string("curve") : encoder_tag;
  if (layer) out += " L" + std::to_string(*layer);
  out += " " + phone_subset;
  if (delay_ms != 0.0) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " d%g", delay_ms);
    out += buf;
  }
  if (normalized) out += " (norm)";
  return out;
}

std::optional<double> DecodabilityCurve::max_accuracy() const {
  std::optional<double> best;
  for (const auto& a : accuracies)
    if (a && (!best || *a > *best)) best = *a;
  return best;
}

namespace {

struct FoldScore {
  bool valid = false;
  double accuracy = 0.0;
};

} // namespace

double batched_accuracy(const LinearClassifier& clf, const SampleView& eval, int batches) {
  const std::size_t n = eval.size();
  if (n == 0) throw ValidationError("cannot score an empty evaluation set");
  if (batches < 1) throw UsageError("batches must be at least 1");
  const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(batches), n);
  double sum = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t lo = i * n / b;
    const std::size_t hi = (i + 1) * n / b;
    const auto part = eval.slice(lo, hi);
    sum += static_cast<double>(count_correct(clf, part)) / static_cast<double>(part.size());
  }
  return sum / static_cast<double>(b);
}

DecodabilityCurve compute_curve(const OffsetDataset& dataset, const FoldPlan& folds,
                                const TrainConfig& config, const CurveSettings& settings) {
  config.validate();
  if (settings.batches < 1) throw UsageError("batches must be at least 1");
  if (folds.n_folds < 2) throw UsageError("fold plan needs at least 2 folds");
  if (dataset.total_samples() == 0) throw ValidationError("offset dataset is empty");
  const std::size_t n_classes = dataset.class_vocab.size();
  std::size_t min_samples = settings.min_samples;
  if (min_samples == 0) min_samples = 10 * n_classes;
  if (min_samples < n_classes) {
    throw UsageError("min_samples (" + std::to_string(min_samples) +
                     ") must be at least the number of classes (" + std::to_string(n_classes) + ")");
  }

  std::vector<int> instance_fold(dataset.instances.size());
  for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
    const auto& id = dataset.instances[i].utterance_id;
    const auto it = folds.assignment.find(id);
    if (it == folds.assignment.end())
      throw ValidationError("utterance '" + id + "' is missing from the fold plan");
    instance_fold[i] = it->second;
  }

  const std::size_t n_offsets = dataset.offsets.size();
  const auto n_folds = static_cast<std::size_t>(folds.n_folds);
  std::vector<FoldScore> scores(n_offsets * n_folds);

  parallel_for(n_offsets * n_folds, settings.threads, [&](std::size_t job) {
    const std::size_t o = job / n_folds;
    const int fold = static_cast<int>(job % n_folds);
    const OffsetSamples& rows = dataset.offsets[o];
    if (rows.size() < min_samples) return;

    Samples train, eval;
    train.dim = eval.dim = dataset.dim;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::span<const float> x(rows.features.data() + r * dataset.dim, dataset.dim);
      (instance_fold[rows.instances[r]] == fold ? eval : train).push(x, rows.labels[r]);
    }
    if (eval.size() == 0) return;
    const std::set<int> classes(train.labels.begin(), train.labels.end());
    if (classes.size() < 2) return;

    LinearClassifier clf = train_softmax(train.view(), n_classes, config);
    scores[job] = {true, batched_accuracy(clf, eval.view(), settings.batches)};
  });

  DecodabilityCurve curve;
  const WindowSpec& spec = dataset.spec;
  curve.meta.folds = folds.n_folds;
  curve.meta.seed = folds.seed;
  curve.meta.window_ms = spec.window_ms;
  curve.meta.frame_rate_hz = spec.frame_rate_hz;
  curve.meta.batches = settings.batches;
  curve.meta.min_samples = min_samples;

  bool any = false;
  for (std::size_t o = 0; o < n_offsets; ++o) {
    curve.offsets_ms.push_back(spec.offset_ms(spec.first_offset() + static_cast<int>(o)));
    curve.n_samples.push_back(dataset.offsets[o].size());
    std::vector<double> valid;
    for (std::size_t f = 0; f < n_folds; ++f)
      if (scores[o * n_folds + f].valid) valid.push_back(scores[o * n_folds + f].accuracy);
    // order-independent sum
    std::sort(valid.begin(), valid.end());
    double sum = 0.0;
    for (double v : valid) sum += v;
    const std::size_t used = valid.size();
    if (used == 0 || dataset.offsets[o].size() < min_samples) {
      curve.accuracies.emplace_back(std::nullopt);
    } else {
      curve.accuracies.emplace_back(sum / static_cast<double>(used));
      any = true;
    }
  }
  if (!any) throw ComputeError("no decodable offsets");
  return curve;
}

DecodabilityCurve normalize_curve(const DecodabilityCurve& curve) {
  const auto peak = curve.max_accuracy();
  if (!peak || !(*peak > 0.0)) throw ComputeError("cannot normalize a curve whose maximum is not positive");
  DecodabilityCurve out = curve;
  for (auto& a : out.accuracies)
    if (a) *a = *a / *peak;
  out.meta.normalized = true;
  return out;
}

PeakReport find_peak(const DecodabilityCurve& curve) {
  PeakReport report;
  report.meta = curve.meta;
  bool found = false;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const auto& a = curve.accuracies[i];
    if (!a) continue;
    if (!found || *a > report.peak_value) {
      report.peak_value = *a;
      report.peak_time_ms = curve.offsets_ms[i];
      found = true;
    }
  }
  if (!found) throw ComputeError("curve has no accuracies to take a peak from");
  return report;
}

double decodability_onset(const DecodabilityCurve& normalized, double theta) {
  if (!(theta > 0.0) || theta > 1.0) throw UsageError("theta must lie in (0, 1]");
  if (!normalized.meta.normalized) throw UsageError("decodability onset requires a normalized curve");
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const auto& a = normalized.accuracies[i];
    if (a && *a >= theta) return normalized.offsets_ms[i];
  }
  throw ComputeError("curve never reaches theta = " + format_double(theta));
}

CurveComparison compare_curves(const DecodabilityCurve& a, const DecodabilityCurve& b, double theta) {
  if (!(theta > 0.0) || theta > 1.0) throw UsageError("theta must lie in (0, 1]");
  if (a.size() == 0 || b.size() == 0) throw ComputeError("cannot compare an empty curve");
  const double lo = std::max(a.offsets_ms.front(), b.offsets_ms.front());
  const double hi = std::min(a.offsets_ms.back(), b.offsets_ms.back());
  if (lo > hi) throw ValidationError("curves cover disjoint time ranges");

  CurveComparison cmp;
  cmp.theta = theta;
  cmp.peak_a = find_peak(a);
  cmp.peak_b = find_peak(b);
  cmp.peak_delta_ms = cmp.peak_a.peak_time_ms - cmp.peak_b.peak_time_ms;
  const auto na = a.meta.normalized ? a : normalize_curve(a);
  const auto nb = b.meta.normalized ? b : normalize_curve(b);
  cmp.onset_a_ms = decodability_onset(na, theta);
  cmp.onset_b_ms = decodability_onset(nb, theta);
  cmp.onset_delta_ms = cmp.onset_a_ms - cmp.onset_b_ms;

  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a.offsets_ms[i];
    if (t < lo || t > hi || !a.accuracies[i]) continue;
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = std::abs(b.offsets_ms[j] - t);
      if (d < best) {
        best = d;
        nearest = j;
      }
    }
    if (!b.accuracies[nearest]) continue;
    const double va = *a.accuracies[i];
    const double vb = *b.accuracies[nearest];
    cmp.deltas.push_back({t, va, vb, va - vb});
  }
  return cmp;
}

std::string curve_to_csv(const DecodabilityCurve& curve) {
  std::string out = "offset_ms,accuracy,n_samples,missing\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out += format_double(curve.offsets_ms[i]);
    out += ',';
    if (curve.accuracies[i]) out += format_double(*curve.accuracies[i]);
    out += ',';
    out += std::to_string(curve.n_samples[i]);
    out += curve.accuracies[i] ? ",0\n" : ",1\n";
  }
  return out;
}

DecodabilityCurve curve_from_csv(std::string_view text, std::string_view source) {
  DecodabilityCurve curve;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    throw FormatError(std::string(source) + ":" + std::to_string(line_no) + ": " + why);
  };
  auto parse_num = [&](const std::string& field) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) fail("cannot parse number '" + field + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "offset_ms,accuracy,n_samples,missing") fail("unexpected CSV header");
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (line.back() == ',') fields.emplace_back();
    if (fields.size() != 4) fail("expected 4 fields");
    curve.offsets_ms.push_back(parse_num(fields[0]));
    const bool missing = fields[3] == "1";
    if (missing || fields[1].empty())
      curve.accuracies.emplace_back(std::nullopt);
    else
      curve.accuracies.emplace_back(parse_num(fields[1]));
    curve.n_samples.push_back(static_cast<std::size_t>(parse_num(fields[2])));
  }
  if (line_no == 0) throw FormatError(std::string(source) + ": empty curve file");
  return curve;
}

json to_json(const CurveMeta& m) {
  json j;
  j["encoder_tag"] = m.encoder_tag;
  j["layer"] = m.layer ? json(*m.layer) : json(nullptr);
  j["phone_subset"] = m.phone_subset;
  j["normalized"] = m.normalized;
  j["folds"] = m.folds;
  j["seed"] = m.seed;
  j["delay_ms"] = m.delay_ms;
  j["window_ms"] = m.window_ms;
  j["frame_rate_hz"] = m.frame_rate_hz;
  j["batches"] = m.batches;
  j["min_samples"] = m.min_samples;
  return j;
}

json to_json(const DecodabilityCurve& c) {
  json j;
  j["meta"] = to_json(c.meta);
  j["offsets_ms"] = c.offsets_ms;
  json acc = json::array();
  for (const auto& a : c.accuracies) acc.push_back(a ? json(*a) : json(nullptr));
  j["accuracies"] = std::move(acc);
  j["n_samples"] = c.n_samples;
  return j;
}

json to_json(const PeakReport& p) {
  json j;
  j["peak_time_ms"] = p.peak_time_ms;
  j["peak_value"] = p.peak_value;
  j["tie_policy"] = p.tie_policy;
  j["meta"] = to_json(p.meta);
  return j;
}

json to_json(const CurveComparison& c) {
  json j;
  j["theta"] = c.theta;
  j["peak_a"] = to_json(c.peak_a);
  j["peak_b"] = to_json(c.peak_b);
  j["peak_delta_ms"] = c.peak_delta_ms;
  j["onset_a_ms"] = c.onset_a_ms;
  j["onset_b_ms"] = c.onset_b_ms;
  j["onset_delta_ms"] = c.onset_delta_ms;
  json deltas = json::array();
  for (const auto& d : c.deltas)
    deltas.push_back({{"offset_ms", d.offset_ms}, {"a", d.a}, {"b", d.b}, {"delta", d.delta}});
  j["deltas"] = std::move(deltas);
  return j;
}

DecodabilityCurve curve_from_json(const json& doc) {
  DecodabilityCurve c;
  try {
    const auto& m = doc.at("meta");
    c.meta.encoder_tag = m.value("encoder_tag", std::string());
    if (m.contains("layer") && !m["layer"].is_null()) c.meta.layer = m["layer"].get<int>();
    c.meta.phone_subset = m.value("phone_subset", std::string("all"));
    c.meta.normalized = m.value("normalized", false);
    c.meta.folds = m.value("folds", 0);
    c.meta.seed = m.value("seed", std::uint64_t{0});
    c.meta.delay_ms = m.value("delay_ms", 0.0);
    c.meta.window_ms = m.value("window_ms", 0.0);
    c.meta.frame_rate_hz = m.value("frame_rate_hz", 0.0);
    c.meta.batches = m.value("batches", 0);
    c.meta.min_samples = m.value("min_samples", std::size_t{0});
    c.offsets_ms = doc.at("offsets_ms").get<std::vector<double>>();
    for (const auto& a : doc.at("accuracies")) {
      if (a.is_null())
        c.accuracies.emplace_back(std::nullopt);
      else
        c.accuracies.emplace_back(a.get<double>());
    }
    c.n_samples = doc.at("n_samples").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("curve document: ") + e.what());
  }
  if (c.accuracies.size() != c.offsets_ms.size() || c.n_samples.size() != c.offsets_ms.size())
    throw FormatError("curve document: array lengths differ");
  return c;
}

DecodabilityCurve read_curve(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open curve file");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = std::move(buf).str();
  if (path.extension() == ".csv") return curve_from_csv(text, path.string());
  const json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw FormatError(path.string() + ": not valid JSON");
  return curve_from_json(doc);
}

} // namespace decodewin
