#include "decodewin/cli.hpp"

#include "decodewin/curves.hpp"
#include "decodewin/errors.hpp"
#include "decodewin/manifest.hpp"
#include "decodewin/random.hpp"
#include "decodewin/svg.hpp"
#include "decodewin/synthlab.hpp"
#include "decodewin/tensorio.hpp"
#include "decodewin/windowing.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

namespace decodewin {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct SynthArgs {
  SynthConfig config;
  std::string encoder = "both";
  double context_limit_ms = 0.0;
  std::string out;
};

struct CurveArgs {
  std::string features;
  std::string alignments;
  std::string out;
  double window_ms = 1200.0;
  int folds = 3;
  std::string sample_fraction = "1/15";
  int batches = 20;
  std::string phone_subset = "all";
  std::uint64_t seed = 0;
  std::size_t min_samples = 0;
  double delay_ms = 0.0;
  double shift_onsets_ms = 0.0;
  TrainConfig train;
};

struct NormalizeArgs {
  std::string in;
  std::string out;
};

struct PeaksArgs {
  std::vector<std::string> inputs;
  std::string out;
};

struct CompareArgs {
  std::string a;
  std::string b;
  double theta = 0.5;
  std::string out;
  std::string svg;
};

struct ValidateArgs {
  std::vector<std::string> paths;
  std::string out;
};

struct ReplayArgs {
  std::string manifest;
};

double parse_fraction(const std::string& text) {
  auto parse = [&](std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw UsageError("cannot parse sample fraction '" + text + "'");
    return v;
  };
  const auto slash = text.find('/');
  double value = slash == std::string::npos
                     ? parse(text)
                     : parse(std::string_view(text).substr(0, slash)) / parse(std::string_view(text).substr(slash + 1));
  if (!(value > 0.0) || value > 1.0) throw UsageError("sample fraction must lie in (0, 1], got '" + text + "'");
  return value;
}

std::string with_suffix(const std::string& prefix, const char* suffix) { return prefix + suffix; }

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- synth

int cmd_synth(const SynthArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  SynthConfig cfg = a.config;
  if (a.context_limit_ms > 0.0) cfg.context_limit_ms = a.context_limit_ms;
  cfg.validate();
  if (a.encoder != "audio" && a.encoder != "audiovisual" && a.encoder != "both")
    throw UsageError("--encoder must be audio, audiovisual or both");

  const fs::path dir(a.out);
  fs::create_directories(dir);
  const GroundTruth truth = gen_ground_truth(cfg);
  write_alignments(truth.all_phones(), dir / "alignments.tsv");

  std::vector<std::pair<SynthEncoder, std::string>> encoders;
  if (a.encoder != "audiovisual") encoders.emplace_back(SynthEncoder::Audio, "audio");
  if (a.encoder != "audio") encoders.emplace_back(SynthEncoder::AudioVisual, "audiovisual");
  for (const auto& [enc, sub] : encoders) {
    fs::create_directories(dir / sub);
    const SynthCorpus corpus = synthesize(truth, cfg, enc);
    for (const auto& m : corpus.features) write_feature_file(m, dir / sub / (m.utterance_id + ".fdt"));
    out << "wrote " << corpus.features.size() << " " << sub << " feature files ("
        << corpus.features.front().frame_rate_hz << " Hz, dim " << corpus.features.front().dim << ")\n";
  }

  RunManifest manifest;
  manifest.command = "synth";
  manifest.argv = argv;
  manifest.seed = cfg.seed;
  manifest.config = {{"utterances", cfg.n_utterances},
                     {"utterance_s", cfg.utterance_s},
                     {"classes", cfg.n_classes},
                     {"min_dur_ms", cfg.min_duration_ms},
                     {"max_dur_ms", cfg.max_duration_ms},
                     {"base_rate_hz", cfg.base_rate_hz},
                     {"video_rate_hz", cfg.video_rate_hz},
                     {"video_lead_ms", cfg.video_lead_ms},
                     {"noise", cfg.noise_sigma},
                     {"audio_delay_ms", cfg.audio_delay_ms},
                     {"context_limit_ms", cfg.context_limit_ms ? json(*cfg.context_limit_ms) : json(nullptr)},
                     {"smoothing_ms", cfg.smoothing_ms},
                     {"encoder", a.encoder},
                     {"seed", cfg.seed}};
  manifest.write(dir / "manifest.json");
  return kExitOk;
}

// ---------------------------------------------------------------- curve

std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw IoError(dir.string(), "not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ext) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_curve(const CurveArgs& a, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  a.train.validate();
  const double fraction = parse_fraction(a.sample_fraction);
  const PhoneSubset subset = PhoneSubset::parse(a.phone_subset);
  if (a.batches < 1) throw UsageError("--batches must be at least 1");
  if (a.folds < 2) throw UsageError("--folds must be at least 2");

  RunManifest manifest;
  manifest.command = "curve";
  manifest.argv = argv;
  manifest.seed = a.seed;

  if (!fs::exists(a.alignments)) throw IoError(a.alignments, "alignment file not found");
  std::vector<PhoneRecord> phones = read_alignments(a.alignments);
  manifest.add_input(a.alignments);
  if (a.shift_onsets_ms != 0.0) {
    ShiftResult shifted = shift_onsets(phones, a.shift_onsets_ms);
    if (shifted.dropped > 0) err << "shift-onsets: dropped " << shifted.dropped << " records with negative onset\n";
    phones = std::move(shifted.records);
  }
  phones = filter_phones(phones, subset);

  const auto files = list_files(a.features, ".fdt");
  if (files.empty()) throw IoError(a.features, "no .fdt files in directory");
  std::set<std::string> wanted;
  for (const auto& p : phones) wanted.insert(p.utterance_id);
  std::vector<FeatureMatrix> features;
  for (const auto& f : files) {
    FeatureMatrix m = read_feature_file(f);
    manifest.add_input(f);
    if (!features.empty()) {
      const auto& first = features.front();
      if (m.encoder_tag != first.encoder_tag || m.layer != first.layer)
        throw ValidationError(f.string() + ": encoder tag/layer differs from other feature files");
    }
    if (wanted.contains(m.utterance_id) || features.empty()) features.push_back(std::move(m));
  }

  const WindowSpec spec{a.window_ms, features.front().frame_rate_hz};
  const OffsetDataset full = build_offset_dataset(features, phones, spec);
  const std::vector<std::string> utts(wanted.begin(), wanted.end());
  const FoldPlan plan = make_folds(utts, a.folds, a.seed);
  const OffsetDataset data = subsample(full, fraction, mix_seed(a.seed));

  CurveSettings settings;
  settings.batches = a.batches;
  settings.min_samples = a.min_samples;
  DecodabilityCurve curve = compute_curve(data, plan, a.train, settings);
  curve.meta.encoder_tag = features.front().encoder_tag;
  curve.meta.layer = features.front().layer;
  curve.meta.phone_subset = subset.name();
  curve.meta.delay_ms = a.delay_ms;

  manifest.config = {{"features", a.features},
                     {"alignments", a.alignments},
                     {"window_ms", a.window_ms},
                     {"frame_rate_hz", spec.frame_rate_hz},
                     {"folds", a.folds},
                     {"sample_fraction", a.sample_fraction},
                     {"batches", a.batches},
                     {"phone_subset", subset.name()},
                     {"seed", a.seed},
                     {"min_samples", curve.meta.min_samples},
                     {"delay_ms", a.delay_ms},
                     {"shift_onsets_ms", a.shift_onsets_ms},
                     {"l2", a.train.l2_strength},
                     {"max_iter", a.train.max_iterations},
                     {"tol", a.train.grad_tolerance}};

  write_text_file(with_suffix(a.out, ".csv"), curve_to_csv(curve));
  write_text_file(with_suffix(a.out, ".json"), dump(to_json(curve)));
  emit_svg(std::span(&curve, 1), with_suffix(a.out, ".svg"));
  manifest.write(with_suffix(a.out, ".manifest.json"));

  const PeakReport peak = find_peak(curve);
  out << curve.size() << " offsets, " << data.instances.size() << " phone instances, " << data.class_vocab.size()
      << " classes; peak " << format_double(peak.peak_value) << " at " << format_double(peak.peak_time_ms) << " ms\n";
  return kExitOk;
}

// ---------------------------------------------------------------- normalize

int cmd_normalize(const NormalizeArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const DecodabilityCurve curve = normalize_curve(read_curve(a.in));
  write_text_file(with_suffix(a.out, ".csv"), curve_to_csv(curve));
  write_text_file(with_suffix(a.out, ".json"), dump(to_json(curve)));
  RunManifest manifest;
  manifest.command = "normalize";
  manifest.argv = argv;
  manifest.seed = curve.meta.seed;
  manifest.config = {{"in", a.in}};
  manifest.add_input(a.in);
  manifest.write(with_suffix(a.out, ".manifest.json"));
  out << "normalized " << curve.size() << " points\n";
  return kExitOk;
}

// ---------------------------------------------------------------- peaks

int cmd_peaks(const PeaksArgs& a, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  json rows = json::array();
  RunManifest manifest;
  manifest.command = "peaks";
  manifest.argv = argv;
  manifest.config = {{"inputs", a.inputs}};
  out << "file\tencoder_tag\tlayer\tsubset\tdelay_ms\tpeak_time_ms\tpeak_value\n";
  std::size_t failed = 0;
  for (const auto& path : a.inputs) {
    try {
      const PeakReport p = find_peak(read_curve(path));
      const std::string layer = p.meta.layer ? std::to_string(*p.meta.layer) : "-";
      out << path << '\t' << p.meta.encoder_tag << '\t' << layer << '\t' << p.meta.phone_subset << '\t'
          << format_double(p.meta.delay_ms) << '\t' << format_double(p.peak_time_ms) << '\t'
          << format_double(p.peak_value) << '\n';
      json row = to_json(p);
      row["file"] = path;
      rows.push_back(std::move(row));
      manifest.add_input(path);
    } catch (const std::exception& e) {
      ++failed;
      err << "peaks: " << path << ": " << e.what() << '\n';
    }
  }
  if (!a.out.empty()) {
    write_text_file(with_suffix(a.out, ".json"), dump(rows));
    manifest.write(with_suffix(a.out, ".manifest.json"));
  }
  return failed == a.inputs.size() ? kExitCompute : kExitOk;
}

// ---------------------------------------------------------------- compare

int cmd_compare(const CompareArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  if (!(a.theta > 0.0) || a.theta > 1.0) throw UsageError("--theta must lie in (0, 1]");
  const DecodabilityCurve ca = read_curve(a.a);
  const DecodabilityCurve cb = read_curve(a.b);
  const CurveComparison cmp = compare_curves(ca, cb, a.theta);
  const std::string text = dump(to_json(cmp));
  out << text;
  if (!a.svg.empty()) {
    const std::vector<DecodabilityCurve> both{ca, cb};
    emit_svg(both, a.svg);
  }
  if (!a.out.empty()) {
    write_text_file(with_suffix(a.out, ".json"), text);
    RunManifest manifest;
    manifest.command = "compare";
    manifest.argv = argv;
    manifest.config = {{"a", a.a}, {"b", a.b}, {"theta", a.theta}, {"svg", a.svg}};
    manifest.add_input(a.a);
    manifest.add_input(a.b);
    manifest.write(with_suffix(a.out, ".manifest.json"));
  }
  return kExitOk;
}

// ---------------------------------------------------------------- validate

int cmd_validate(const ValidateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  std::vector<fs::path> files;
  for (const auto& p : a.paths) {
    if (fs::is_directory(p)) {
      for (const auto& entry : fs::recursive_directory_iterator(p)) {
        const auto ext = entry.path().extension();
        if (entry.is_regular_file() && (ext == ".fdt" || ext == ".tsv")) files.push_back(entry.path());
      }
    } else {
      files.emplace_back(p);
    }
  }
  std::sort(files.begin(), files.end());

  std::size_t errors = 0;
  std::map<std::string, double> durations; // utterance -> seconds covered by features
  std::vector<PhoneRecord> phones;
  RunManifest manifest;
  manifest.command = "validate";
  manifest.argv = argv;
  manifest.config = {{"paths", a.paths}};
  for (const auto& f : files) {
    try {
      if (f.extension() == ".tsv") {
        auto recs = read_alignments(f);
        out << "OK    " << f.generic_string() << " (" << recs.size() << " phone records)\n";
        phones.insert(phones.end(), recs.begin(), recs.end());
      } else {
        const FeatureMatrix m = read_feature_file(f);
        out << "OK    " << f.generic_string() << " (" << m.frames << "x" << m.dim << " @ " << m.frame_rate_hz
            << " Hz)\n";
        durations[m.utterance_id] = static_cast<double>(m.frames) / m.frame_rate_hz;
      }
      manifest.add_input(f);
    } catch (const std::exception& e) {
      ++errors;
      out << "ERROR " << f.generic_string() << ": " << e.what() << '\n';
    }
  }
  if (!durations.empty()) {
    std::set<std::string> reported;
    for (const auto& p : phones) {
      const auto it = durations.find(p.utterance_id);
      if (it == durations.end()) {
        if (reported.insert(p.utterance_id).second) {
          ++errors;
          out << "ERROR utterance '" << p.utterance_id << "' has alignments but no feature file\n";
        }
      } else if (p.onset_s >= it->second && reported.insert(p.utterance_id).second) {
        ++errors;
        out << "ERROR utterance '" << p.utterance_id << "' has a phone onset beyond its last frame\n";
      }
    }
  }
  out << files.size() << " files checked, " << errors << " errors\n";
  if (!a.out.empty()) manifest.write(with_suffix(a.out, ".manifest.json"));
  return errors == 0 ? kExitOk : kExitUsage;
}

// ---------------------------------------------------------------- replay

int cmd_replay(const ReplayArgs& a, std::ostream& out, std::ostream& err) {
  const RunManifest m = read_manifest(a.manifest);
  if (m.version != kToolkitVersion)
    err << "replay: manifest written by version " << m.version << ", running " << kToolkitVersion << '\n';
  for (const auto& [path, digest] : m.inputs) {
    const std::string now = hex64(fnv1a64_file(path));
    if (now != digest) throw ValidationError("input changed since the manifest was written: " + path);
  }
  if (m.argv.empty() || m.argv.front() == "replay") throw UsageError("manifest does not describe a replayable run");
  return run_cli(m.argv, out, err);
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Phone decodability windows over frame-level speech features", "decodewin"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate synthetic phone streams, encoded features and alignments");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--utterances", synth.config.n_utterances, "Number of utterances")->capture_default_str();
  s->add_option("--utterance-s", synth.config.utterance_s, "Utterance length in seconds")->capture_default_str();
  s->add_option("--classes", synth.config.n_classes, "Number of phone classes")->capture_default_str();
  s->add_option("--min-dur-ms", synth.config.min_duration_ms)->capture_default_str();
  s->add_option("--max-dur-ms", synth.config.max_duration_ms)->capture_default_str();
  s->add_option("--video-lead-ms", synth.config.video_lead_ms)->capture_default_str()->check(CLI::NonNegativeNumber);
  s->add_option("--noise", synth.config.noise_sigma, "Gaussian noise sigma")->capture_default_str()->check(CLI::NonNegativeNumber);
  s->add_option("--audio-delay-ms", synth.config.audio_delay_ms)->capture_default_str()->check(CLI::NonNegativeNumber);
  s->add_option("--context-limit-ms", synth.context_limit_ms, "Zero audio taps beyond +/- limit/2 (needs --smoothing-ms)")
      ->check(CLI::PositiveNumber);
  s->add_option("--smoothing-ms", synth.config.smoothing_ms, "Moving-average width on the audio stream")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  s->add_option("--encoder", synth.encoder, "audio | audiovisual | both")
      ->capture_default_str()->check(CLI::IsMember({"audio", "audiovisual", "both"}));
  s->add_option("--seed", synth.config.seed)->capture_default_str();

  CurveArgs curve;
  auto* c = app.add_subcommand("curve", "Compute a decodability curve");
  c->add_option("--features", curve.features, "Directory of .fdt files")->required();
  c->add_option("--alignments", curve.alignments, "Alignment TSV")->required();
  c->add_option("--out", curve.out, "Output prefix (.csv/.json/.svg/.manifest.json)")->required();
  c->add_option("--window-ms", curve.window_ms)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--folds", curve.folds)->capture_default_str();
  c->add_option("--sample-fraction", curve.sample_fraction, "Fraction of phone instances, e.g. 1/15")->capture_default_str();
  c->add_option("--batches", curve.batches)->capture_default_str();
  c->add_option("--phone-subset", curve.phone_subset, "all | plosive | comma-separated labels")->capture_default_str();
  c->add_option("--seed", curve.seed)->capture_default_str();
  c->add_option("--min-samples", curve.min_samples, "Per-offset minimum (0 = 10 x classes)")->capture_default_str();
  c->add_option("--delay-ms", curve.delay_ms, "Audio delay of the input data (metadata)")->capture_default_str();
  c->add_option("--shift-onsets-ms", curve.shift_onsets_ms, "Shift every alignment interval")->capture_default_str();
  c->add_option("--l2", curve.train.l2_strength)->capture_default_str()->check(CLI::NonNegativeNumber);
  c->add_option("--max-iter", curve.train.max_iterations)->capture_default_str();
  c->add_option("--tol", curve.train.grad_tolerance)->capture_default_str()->check(CLI::PositiveNumber);

  NormalizeArgs norm;
  auto* n = app.add_subcommand("normalize", "Divide a curve by its maximum");
  n->add_option("--in", norm.in, "Curve .json or .csv")->required();
  n->add_option("--out", norm.out, "Output prefix")->required();

  PeaksArgs peaks;
  auto* p = app.add_subcommand("peaks", "Tabulate peak times of curves");
  p->add_option("curves", peaks.inputs, "Curve files")->required();
  p->add_option("--out", peaks.out, "Output prefix for JSON table and manifest");

  CompareArgs cmp;
  auto* k = app.add_subcommand("compare", "Compare two curves");
  k->add_option("a", cmp.a, "First curve")->required();
  k->add_option("b", cmp.b, "Second curve")->required();
  k->add_option("--theta", cmp.theta, "Decodability-onset threshold in (0, 1]")->capture_default_str();
  k->add_option("--out", cmp.out, "Output prefix for JSON and manifest");
  k->add_option("--svg", cmp.svg, "Write an overlay plot");

  ValidateArgs val;
  auto* v = app.add_subcommand("validate", "Check feature files and alignment TSVs");
  v->add_option("paths", val.paths, "Files or directories")->required();
  v->add_option("--out", val.out, "Output prefix for the manifest");

  ReplayArgs rep;
  auto* r = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  r->add_option("manifest", rep.manifest)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, args, out);
    if (c->parsed()) return cmd_curve(curve, args, out, err);
    if (n->parsed()) return cmd_normalize(norm, args, out);
    if (p->parsed()) return cmd_peaks(peaks, args, out, err);
    if (k->parsed()) return cmd_compare(cmp, args, out);
    if (v->parsed()) return cmd_validate(val, args, out);
    if (r->parsed()) return cmd_replay(rep, out, err);
  } catch (const ComputeError& e) {
    err << "error: " << e.what() << '\n';
    return kExitCompute;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitCompute;
  }
  return kExitUsage;
}

} // namespace decodewin
