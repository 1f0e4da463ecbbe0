#include "decodewin/synthlab.hpp"

#include "decodewin/errors.hpp"
#include "decodewin/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace decodewin {
namespace {

const std::array<std::string, 39> kLabels = {
    "P",  "B",  "T",  "D",  "K",  "G",  "AA", "AE", "AH", "AO", "AW", "AY", "CH",
    "DH", "EH", "ER", "EY", "F",  "HH", "IH", "IY", "JH", "L",  "M",  "N",  "NG",
    "OW", "OY", "R",  "S",  "SH", "TH", "UH", "UW", "V",  "W",  "Y",  "Z",  "ZH"};

enum RngStream : std::uint64_t { kPhoneStream = 0, kAudioNoise = 1, kVideoNoise = 2 };

std::string utterance_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "utt%05zu", i);
  return buf;
}

void add_noise(std::span<float> row, double sigma, Rng& rng) {
  if (sigma == 0.0) return;
  for (float& v : row) v = static_cast<float>(v + sigma * rng.normal());
}

} // namespace

void SynthConfig::validate() const {
  if (n_utterances < 1) throw UsageError("n_utterances must be at least 1");
  if (!(utterance_s > 0.0)) throw UsageError("utterance_s must be positive");
  if (n_classes < 1 || n_classes > max_synth_classes())
    throw UsageError("n_classes must lie in [1, " + std::to_string(max_synth_classes()) + "]");
  if (!(min_duration_ms > 0.0) || min_duration_ms > max_duration_ms)
    throw UsageError("phone durations need 0 < min <= max");
  if (!(base_rate_hz > 0.0) || !(video_rate_hz > 0.0)) throw UsageError("frame rates must be positive");
  const double ratio = base_rate_hz / video_rate_hz;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0)
    throw UsageError("base rate must be an integer multiple of the video rate");
  if (!(noise_sigma >= 0.0)) throw UsageError("noise_sigma must be non-negative");
  if (!(audio_delay_ms >= 0.0)) throw UsageError("audio_delay_ms must be non-negative");
  if (!(video_lead_ms >= 0.0)) throw UsageError("video_lead_ms must be non-negative");
  if (context_limit_ms && !(*context_limit_ms > 0.0)) throw UsageError("context_limit_ms must be positive");
  if (!(smoothing_ms >= 0.0)) throw UsageError("smoothing_ms must be non-negative");
  if (std::floor(utterance_s * video_rate_hz + 1e-9) < 1.0)
    throw UsageError("utterance shorter than one video frame");
}

int SynthConfig::stack_factor() const { return static_cast<int>(std::lround(base_rate_hz / video_rate_hz)); }

const std::string& synth_label(int k) { return kLabels.at(static_cast<std::size_t>(k)); }

int max_synth_classes() { return static_cast<int>(kLabels.size()); }

int UtteranceTruth::class_at(double t_s) const {
  if (t_s < 0.0 || phones.empty()) return -1;
  auto it = std::upper_bound(phones.begin(), phones.end(), t_s,
                             [](double t, const PhoneRecord& p) { return t < p.onset_s; });
  if (it == phones.begin()) return -1;
  return phone_classes[static_cast<std::size_t>(std::distance(phones.begin(), it) - 1)];
}

std::vector<PhoneRecord> GroundTruth::all_phones() const {
  std::vector<PhoneRecord> out;
  for (const auto& u : utterances) out.insert(out.end(), u.phones.begin(), u.phones.end());
  return out;
}

GroundTruth gen_ground_truth(const SynthConfig& config) {
  config.validate();
  GroundTruth gt;
  const auto video_frames = static_cast<std::size_t>(std::floor(config.utterance_s * config.video_rate_hz + 1e-9));
  const std::size_t base_frames = video_frames * static_cast<std::size_t>(config.stack_factor());
  // Phone boundaries live on an integer microsecond grid so TSV round trips are exact.
  const auto end_us = static_cast<std::int64_t>(std::llround(static_cast<double>(base_frames) * 1e6 / config.base_rate_hz));

  for (int u = 0; u < config.n_utterances; ++u) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(u), kPhoneStream));
    UtteranceTruth truth;
    truth.utterance_id = utterance_name(static_cast<std::size_t>(u));
    truth.base_frames = base_frames;
    truth.video_frames = video_frames;

    std::int64_t t_us = 0;
    while (t_us < end_us) {
      const auto dur_us = std::llround(rng.uniform(config.min_duration_ms, config.max_duration_ms) * 1000.0);
      const int cls = static_cast<int>(rng.index(static_cast<std::uint64_t>(config.n_classes)));
      const std::int64_t stop = std::min<std::int64_t>(t_us + std::max<std::int64_t>(dur_us, 1), end_us);
      truth.phones.push_back({truth.utterance_id, synth_label(cls), static_cast<double>(t_us) / 1e6,
                              static_cast<double>(stop) / 1e6});
      truth.phone_classes.push_back(cls);
      t_us = stop;
    }

    truth.frame_classes.resize(base_frames);
    for (std::size_t t = 0; t < base_frames; ++t)
      truth.frame_classes[t] = truth.class_at(static_cast<double>(t) / config.base_rate_hz);
    gt.utterances.push_back(std::move(truth));
  }
  return gt;
}

Stream render_audio_stream(const UtteranceTruth& truth, const SynthConfig& config, std::size_t utterance_index) {
  Stream s;
  s.rate_hz = config.base_rate_hz;
  s.frames = truth.base_frames;
  s.dim = static_cast<std::size_t>(config.n_classes);
  s.data.assign(s.frames * s.dim, 0.0f);
  Rng rng(derive_seed(config.seed, utterance_index, kAudioNoise));
  const double delay_s = config.audio_delay_ms / 1000.0;
  for (std::size_t t = 0; t < s.frames; ++t) {
    const double time = static_cast<double>(t) / config.base_rate_hz - delay_s;
    if (time < 0.0) continue; // before the delayed signal starts: silence
    auto row = s.row(t);
    row[static_cast<std::size_t>(truth.class_at(time))] = 1.0f;
    add_noise(row, config.noise_sigma, rng);
  }
  return s;
}

Stream render_video_stream(const UtteranceTruth& truth, const SynthConfig& config, std::size_t utterance_index) {
  Stream s;
  s.rate_hz = config.video_rate_hz;
  s.frames = truth.video_frames;
  s.dim = static_cast<std::size_t>(config.n_classes);
  s.data.assign(s.frames * s.dim, 0.0f);
  Rng rng(derive_seed(config.seed, utterance_index, kVideoNoise));
  const double lead_s = config.video_lead_ms / 1000.0;
  for (std::size_t k = 0; k < s.frames; ++k) {
    const double time = (static_cast<double>(k) + 0.5) / config.video_rate_hz + lead_s;
    auto row = s.row(k);
    row[static_cast<std::size_t>(truth.class_at(time))] = 1.0f;
    add_noise(row, config.noise_sigma, rng);
  }
  return s;
}

Stream apply_context_limit(const Stream& base, std::optional<double> context_limit_ms, double smoothing_ms) {
  if (!(smoothing_ms > 0.0)) return base;
  const auto half = static_cast<std::int64_t>(std::llround(smoothing_ms / 2.0 * base.rate_hz / 1000.0));
  std::int64_t reach = half;
  if (context_limit_ms) {
    const auto limit = static_cast<std::int64_t>(std::floor(*context_limit_ms / 2.0 * base.rate_hz / 1000.0 + 1e-9));
    reach = std::min(reach, limit);
  }
  const double norm = 1.0 / static_cast<double>(2 * half + 1);

  Stream out = base;
  const auto frames = static_cast<std::int64_t>(base.frames);
  std::vector<double> acc(base.dim);
  for (std::int64_t t = 0; t < frames; ++t) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::int64_t s = std::max<std::int64_t>(0, t - reach); s <= std::min(frames - 1, t + reach); ++s) {
      const auto row = base.row(static_cast<std::size_t>(s));
      for (std::size_t d = 0; d < base.dim; ++d) acc[d] += row[d];
    }
    auto dst = out.row(static_cast<std::size_t>(t));
    for (std::size_t d = 0; d < base.dim; ++d) dst[d] = static_cast<float>(acc[d] * norm);
  }
  return out;
}

FeatureMatrix encode_audio_only(const Stream& audio, const SynthConfig& config) {
  if (std::abs(audio.rate_hz - config.base_rate_hz) > 1e-9)
    throw ValidationError("audio stream is not at the base rate");
  FeatureMatrix m;
  m.frame_rate_hz = audio.rate_hz / 2.0;
  m.frames = audio.frames / 2;
  m.dim = 2 * audio.dim;
  m.encoder_tag = encoder_tag(SynthEncoder::Audio);
  m.data.reserve(m.frames * m.dim);
  for (std::size_t k = 0; k < m.frames; ++k) {
    for (std::size_t half = 0; half < 2; ++half) {
      const auto row = audio.row(2 * k + half);
      m.data.insert(m.data.end(), row.begin(), row.end());
    }
  }
  return m;
}

FeatureMatrix encode_audio_visual(const Stream& audio, const Stream& video, const SynthConfig& config) {
  const auto stack = static_cast<std::size_t>(config.stack_factor());
  if (audio.frames != stack * video.frames) {
    throw ValidationError("audio/video length mismatch: " + std::to_string(audio.frames) + " base frames vs " +
                          std::to_string(video.frames) + " video frames");
  }
  FeatureMatrix m;
  m.frame_rate_hz = video.rate_hz;
  m.frames = video.frames;
  m.dim = stack * audio.dim + video.dim;
  m.encoder_tag = encoder_tag(SynthEncoder::AudioVisual);
  m.data.reserve(m.frames * m.dim);
  for (std::size_t k = 0; k < m.frames; ++k) {
    for (std::size_t s = 0; s < stack; ++s) {
      const auto row = audio.row(stack * k + s);
      m.data.insert(m.data.end(), row.begin(), row.end());
    }
    const auto v = video.row(k);
    m.data.insert(m.data.end(), v.begin(), v.end());
  }
  return m;
}

std::string encoder_tag(SynthEncoder encoder) {
  return encoder == SynthEncoder::Audio ? "synth-audio" : "synth-av";
}

SynthCorpus synthesize(const GroundTruth& truth, const SynthConfig& config, SynthEncoder encoder) {
  config.validate();
  SynthCorpus corpus;
  corpus.phones = truth.all_phones();
  for (std::size_t u = 0; u < truth.utterances.size(); ++u) {
    const auto& utt = truth.utterances[u];
    Stream audio = apply_context_limit(render_audio_stream(utt, config, u), config.context_limit_ms,
                                       config.smoothing_ms);
    FeatureMatrix m = encoder == SynthEncoder::Audio
                          ? encode_audio_only(audio, config)
                          : encode_audio_visual(audio, render_video_stream(utt, config, u), config);
    m.utterance_id = utt.utterance_id;
    corpus.features.push_back(std::move(m));
  }
  return corpus;
}

} // namespace decodewin
