#pragma once

#include "decodewin/tensorio.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace decodewin {

/// Controls for the synthetic phone-stream generator and emulated encoders.
struct SynthConfig {
  int n_utterances = 50;
  double utterance_s = 10.0;
  int n_classes = 10;
  double min_duration_ms = 60.0;
  double max_duration_ms = 200.0;
  double base_rate_hz = 100.0;
  double video_rate_hz = 25.0;
  double video_lead_ms = 150.0;
  double noise_sigma = 0.05;
  double audio_delay_ms = 0.0;
  std::optional<double> context_limit_ms;
  double smoothing_ms = 0.0; // 0 disables the temporal smoothing kernel
  std::uint64_t seed = 1;

  void validate() const;
  int stack_factor() const; // base frames per video frame
};

/// Label of synthetic class `k`; plosives come first so subsets are non-trivial.
const std::string& synth_label(int k);

/// Largest supported class count (size of the label inventory).
int max_synth_classes();

struct UtteranceTruth {
  std::string utterance_id;
  std::vector<PhoneRecord> phones;
  std::vector<int> phone_classes; // class id per phone
  std::vector<int> frame_classes; // class active at the start of each base frame
  std::size_t base_frames = 0;
  std::size_t video_frames = 0;

  double duration_s(double base_rate_hz) const { return static_cast<double>(base_frames) / base_rate_hz; }
  /// Class active at time t (t clipped to the last phone past the end); -1 before 0.
  int class_at(double t_s) const;
};

struct GroundTruth {
  std::vector<UtteranceTruth> utterances;

  std::vector<PhoneRecord> all_phones() const;
};

/// Row-major frames x dim matrix at some frame rate.
struct Stream {
  double rate_hz = 0.0;
  std::size_t frames = 0;
  std::size_t dim = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t t) const { return {data.data() + t * dim, dim}; }
  std::span<float> row(std::size_t t) { return {data.data() + t * dim, dim}; }
};

GroundTruth gen_ground_truth(const SynthConfig& config);

/// Base frame t is the one-hot of the phone active at t/base_rate - delay, plus
/// N(0, sigma^2) noise. Frames before the delayed start are exactly zero.
Stream render_audio_stream(const UtteranceTruth& truth, const SynthConfig& config, std::size_t utterance_index);

/// Video frame k encodes the phone active at the middle of its exposure
/// ((k + 0.5)/video_rate) plus the visual lead, clipped to the final phone.
Stream render_video_stream(const UtteranceTruth& truth, const SynthConfig& config, std::size_t utterance_index);

/// Moving-average smoothing of width smoothing_ms whose taps outside
/// +/- context_limit_ms/2 of each output frame are zeroed first. Identity when
/// smoothing is disabled.
Stream apply_context_limit(const Stream& base, std::optional<double> context_limit_ms, double smoothing_ms);

/// Concatenates consecutive base-frame pairs: 2K dims at half the base rate.
FeatureMatrix encode_audio_only(const Stream& audio, const SynthConfig& config);

/// Stacks four base frames and appends the video frame: 5K dims at the video rate.
FeatureMatrix encode_audio_visual(const Stream& audio, const Stream& video, const SynthConfig& config);

enum class SynthEncoder { Audio, AudioVisual };

struct SynthCorpus {
  std::vector<FeatureMatrix> features;
  std::vector<PhoneRecord> phones;
};

/// Renders every utterance of `truth` through the chosen encoder
/// (audio smoothing/context limit applied before encoding).
SynthCorpus synthesize(const GroundTruth& truth, const SynthConfig& config, SynthEncoder encoder);

std::string encoder_tag(SynthEncoder encoder);

} // namespace decodewin
