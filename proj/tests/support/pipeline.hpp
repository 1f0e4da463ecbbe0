#pragma once

#include "decodewin/curves.hpp"
#include "decodewin/synthlab.hpp"
#include "decodewin/windowing.hpp"

#include "../oracles/oracles.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

inline std::vector<oracle::Utterance> oracle_view(const decodewin::GroundTruth& gt, decodewin::SynthEncoder enc) {
  std::vector<oracle::Utterance> out;
  for (const auto& u : gt.utterances) {
    oracle::Utterance o;
    for (std::size_t i = 0; i < u.phones.size(); ++i)
      o.phones.push_back({u.phones[i].onset_s, u.phones[i].offset_s, u.phone_classes[i]});
    o.out_frames = enc == decodewin::SynthEncoder::Audio ? u.base_frames / 2 : u.video_frames;
    out.push_back(std::move(o));
  }
  return out;
}

inline oracle::Layout oracle_layout(const decodewin::SynthConfig& cfg, decodewin::SynthEncoder enc) {
  oracle::Layout l;
  l.base_rate_hz = cfg.base_rate_hz;
  l.audio_delay_ms = cfg.audio_delay_ms;
  l.video_rate_hz = cfg.video_rate_hz;
  if (enc == decodewin::SynthEncoder::Audio) {
    l.stack = 2;
  } else {
    l.stack = cfg.stack_factor();
    l.video_lead_ms = cfg.video_lead_ms;
  }
  return l;
}

struct PipelineRun {
  decodewin::GroundTruth truth;
  decodewin::OffsetDataset dataset;
  decodewin::DecodabilityCurve curve;
};

inline PipelineRun run_pipeline(const decodewin::SynthConfig& cfg, decodewin::SynthEncoder enc,
                                double window_ms = 1200.0, std::uint64_t fold_seed = 7) {
  using namespace decodewin;
  PipelineRun r;
  r.truth = gen_ground_truth(cfg);
  const SynthCorpus corpus = synthesize(r.truth, cfg, enc);
  const WindowSpec spec{window_ms, corpus.features.front().frame_rate_hz};
  r.dataset = build_offset_dataset(corpus.features, corpus.phones, spec);
  std::vector<std::string> ids;
  for (const auto& u : r.truth.utterances) ids.push_back(u.utterance_id);
  const FoldPlan plan = make_folds(ids, 3, fold_seed);
  r.curve = compute_curve(r.dataset, plan, TrainConfig{});
  return r;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("decodewin_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Random problem for the trainer: N x D standard normal features, labels in [0, K).
struct Problem {
  std::size_t n = 0, d = 0, k = 0;
  std::vector<float> xf;
  std::vector<double> x;
  std::vector<int> y;
};

inline Problem random_problem(std::size_t n, std::size_t d, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> cls(0, static_cast<int>(k) - 1);
  Problem p{n, d, k, {}, {}, {}};
  for (std::size_t i = 0; i < n * d; ++i) {
    const auto v = static_cast<float>(nd(gen));
    p.xf.push_back(v);
    p.x.push_back(v);
  }
  for (std::size_t i = 0; i < n; ++i) p.y.push_back(i < k ? static_cast<int>(i) : cls(gen));
  return p;
}

} // namespace testsupport
