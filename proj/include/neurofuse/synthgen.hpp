#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "neurofuse/core.hpp"
#include "neurofuse/io.hpp"

namespace neurofuse::synth {

/// Shape and class structure of a synthetic recording corpus.
struct SynthSpec {
  int n_participants = 16;
  int n_sessions = 3;
  int trials_per_session = 15;
  Index channels = kRawChannels;
  double sampling_rate = 1000.0;
  double trial_seconds = 72.0;
  double eye_segment_seconds = 4.0;
  BandSpec bands = BandSpec::power_spectrum_default();
  RowMatrixXd class_profiles;   // kNumEmotions x n_bands sinusoid amplitudes
  RowMatrixXd eye_class_means;  // kNumEmotions x kEyeFeatures
  double noise_level = 1.0;     // RMS of the 1/f background

  // Per-trial log-normal gain jitter (std of the log), scaled by noise_level:
  // one factor per band shared by all channels, one per channel and band.
  double band_gain_jitter = 0.25;
  double channel_gain_jitter = 0.25;
  // Eye features: per-trial offset and per-row noise, scaled by noise_level.
  double eye_trial_jitter = 0.3;
  double eye_row_noise = 0.5;

  // Slow amplitude drift, one cycle per trial with a random phase per band.
  bool temporal_correlation = true;
  double drift_depth = 0.3;

  std::uint64_t rng_seed = 0;

  SynthSpec();

  Index samples_per_trial() const;
  Index eye_rows() const;
  std::size_t total_trials() const;
  void validate() const;
};

/// Base amplitude 1 in every band; class c doubles band (c + 1) mod n_bands.
RowMatrixXd default_class_profiles(std::size_t n_bands);
/// Fixed per-class 33-vectors, independent of rng_seed.
RowMatrixXd default_eye_class_means();

void to_json(nlohmann::json& j, const SynthSpec& spec);
void from_json(const nlohmann::json& j, SynthSpec& spec);

struct SynthTrial {
  RawTrial raw;
  FeatureMatrix eye;
};

/// Draws one trial: 1/f background plus per-band sinusoids at random
/// in-band frequencies and phases, and the matching eye feature rows.
SynthTrial generate_trial(EmotionLabel label, const SynthSpec& spec, Rng& rng);

/// Per-session label order: each class trials_per_session / 5 times, never
/// the same class twice in a row (rejection-sampled shuffle).
std::vector<EmotionLabel> session_schedule(const SynthSpec& spec, Rng& rng);

struct TrialPlan {
  int participant = 0;
  int session = 0;
  int trial = 0;
  EmotionLabel label = EmotionLabel::from_code(0);
  std::uint64_t seed = 0;
};

/// Every trial of the corpus in participant, session, trial order, each
/// with its own child seed.
std::vector<TrialPlan> plan_corpus(const SynthSpec& spec);

SynthTrial generate_planned(const TrialPlan& plan, const SynthSpec& spec);

/// Writes `<p>_<s>_<t>_raw.npy`, `<p>_<s>_<t>_EYE.npy` per trial and
/// manifest.json into `dir`.
io::Manifest generate_corpus(const SynthSpec& spec, const std::filesystem::path& dir);

}  // namespace neurofuse::synth
