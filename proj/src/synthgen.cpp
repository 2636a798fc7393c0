#include "neurofuse/synthgen.hpp"

#include "neurofuse/fft.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace neurofuse::synth {

namespace {

constexpr std::uint64_t kEyeMeanSeed = 0x5eed'e7e5ULL;
constexpr std::uint64_t kScheduleStream = 101;
constexpr std::uint64_t kTrialStream = 202;
constexpr std::size_t kPinkWarmup = 4096;
constexpr Index kResync = 1024;

nlohmann::json matrix_json(const RowMatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

RowMatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return {};
  RowMatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) throw ValidationError("ragged matrix in synth spec");
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  return m;
}

// Paul Kellet's refined pink-noise filter.
class PinkFilter {
 public:
  double operator()(double white) {
    b_[0] = 0.99886 * b_[0] + white * 0.0555179;
    b_[1] = 0.99332 * b_[1] + white * 0.0750759;
    b_[2] = 0.96900 * b_[2] + white * 0.1538520;
    b_[3] = 0.86650 * b_[3] + white * 0.3104856;
    b_[4] = 0.55000 * b_[4] + white * 0.5329522;
    b_[5] = -0.7616 * b_[5] - white * 0.0168980;
    const double out = b_[0] + b_[1] + b_[2] + b_[3] + b_[4] + b_[5] + b_[6] + white * 0.5362;
    b_[6] = white * 0.115926;
    return out;
  }

 private:
  std::array<double, 7> b_{};
};

void add_pink_noise(std::span<double> out, double rms, Rng& rng) {
  PinkFilter filter;
  for (std::size_t i = 0; i < kPinkWarmup; ++i) filter(rng.normal());
  std::vector<double> noise(out.size());
  double mean = 0.0;
  for (auto& v : noise) {
    v = filter(rng.normal());
    mean += v;
  }
  mean /= static_cast<double>(noise.size());
  double power = 0.0;
  for (auto& v : noise) {
    v -= mean;
    power += v * v;
  }
  const double current = std::sqrt(power / static_cast<double>(noise.size()));
  const double scale = current > 0.0 ? rms / current : 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * noise[i];
}

// Adds amplitude * envelope[n] * sin(2 pi f n / fs + phase) using a rotating
// phasor, recomputed exactly every kResync samples.
void add_sinusoid(std::span<double> out, const double* envelope, double amplitude, double freq, double fs,
                  double phase) {
  const double omega = 2.0 * std::numbers::pi * freq / fs;
  const std::complex<double> step = std::polar(1.0, omega);
  const Index n = static_cast<Index>(out.size());
  for (Index start = 0; start < n; start += kResync) {
    std::complex<double> z = std::polar(1.0, omega * static_cast<double>(start) + phase);
    const Index stop = std::min(n, start + kResync);
    for (Index i = start; i < stop; ++i) {
      out[i] += amplitude * envelope[i] * z.imag();
      z = dsp::cmul(z, step);
    }
  }
}

}  // namespace

SynthSpec::SynthSpec()
    : class_profiles(default_class_profiles(bands.n_bands())), eye_class_means(default_eye_class_means()) {}

Index SynthSpec::samples_per_trial() const {
  return static_cast<Index>(std::llround(trial_seconds * sampling_rate));
}

Index SynthSpec::eye_rows() const { return static_cast<Index>(std::floor(trial_seconds / eye_segment_seconds)); }

std::size_t SynthSpec::total_trials() const {
  return static_cast<std::size_t>(n_participants) * static_cast<std::size_t>(n_sessions) *
         static_cast<std::size_t>(trials_per_session);
}

void SynthSpec::validate() const {
  if (n_participants < 1 || n_sessions < 1 || trials_per_session < 1) {
    throw ValidationError("synth spec needs at least one participant, session and trial");
  }
  if (n_sessions > 3 || trials_per_session > 15) {
    throw ValidationError("synth spec allows at most 3 sessions of 15 trials");
  }
  if (trials_per_session % kNumEmotions != 0) {
    throw ValidationError("trials_per_session must be divisible by 5");
  }
  if (channels < 1) throw ValidationError("synth spec needs at least one channel");
  if (!(sampling_rate > 0.0) || !(trial_seconds > 0.0) || !(eye_segment_seconds > 0.0)) {
    throw ValidationError("sampling rate and durations must be positive");
  }
  if (eye_rows() < 1) throw ValidationError("trial shorter than one eye segment");
  bands.validate("synth bands");
  if (class_profiles.rows() != kNumEmotions || class_profiles.cols() != static_cast<Index>(bands.n_bands())) {
    throw ValidationError("class_profiles must be 5 x n_bands");
  }
  if (eye_class_means.rows() != kNumEmotions || eye_class_means.cols() != kEyeFeatures) {
    throw ValidationError("eye_class_means must be 5 x 33");
  }
  if (!class_profiles.allFinite() || (class_profiles.array() < 0.0).any()) {
    throw ValidationError("class amplitudes must be finite and >= 0");
  }
  if (!eye_class_means.allFinite()) throw ValidationError("eye class means must be finite");
  for (double v : {noise_level, band_gain_jitter, channel_gain_jitter, eye_trial_jitter, eye_row_noise, drift_depth}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("noise and jitter levels must be finite and >= 0");
  }
  if (drift_depth >= 1.0) throw ValidationError("drift_depth must be below 1");
}

RowMatrixXd default_class_profiles(std::size_t n_bands) {
  RowMatrixXd p = RowMatrixXd::Ones(kNumEmotions, static_cast<Index>(n_bands));
  if (n_bands == 0) return p;
  for (int c = 0; c < kNumEmotions; ++c) p(c, static_cast<Index>((c + 1) % n_bands)) = 2.0;
  return p;
}

RowMatrixXd default_eye_class_means() {
  Rng rng(kEyeMeanSeed);
  RowMatrixXd m(kNumEmotions, kEyeFeatures);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = 0.6 * rng.normal();
  return m;
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = nlohmann::json{{"n_participants", s.n_participants},
                     {"n_sessions", s.n_sessions},
                     {"trials_per_session", s.trials_per_session},
                     {"channels", s.channels},
                     {"sampling_rate", s.sampling_rate},
                     {"trial_seconds", s.trial_seconds},
                     {"eye_segment_seconds", s.eye_segment_seconds},
                     {"bands", s.bands.edges},
                     {"class_profiles", matrix_json(s.class_profiles)},
                     {"eye_class_means", matrix_json(s.eye_class_means)},
                     {"noise_level", s.noise_level},
                     {"band_gain_jitter", s.band_gain_jitter},
                     {"channel_gain_jitter", s.channel_gain_jitter},
                     {"eye_trial_jitter", s.eye_trial_jitter},
                     {"eye_row_noise", s.eye_row_noise},
                     {"temporal_correlation", s.temporal_correlation},
                     {"drift_depth", s.drift_depth},
                     {"rng_seed", s.rng_seed}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  try {
    s = SynthSpec{};
    s.n_participants = j.value("n_participants", s.n_participants);
    s.n_sessions = j.value("n_sessions", s.n_sessions);
    s.trials_per_session = j.value("trials_per_session", s.trials_per_session);
    s.channels = j.value("channels", s.channels);
    s.sampling_rate = j.value("sampling_rate", s.sampling_rate);
    s.trial_seconds = j.value("trial_seconds", s.trial_seconds);
    s.eye_segment_seconds = j.value("eye_segment_seconds", s.eye_segment_seconds);
    if (j.contains("bands")) {
      s.bands.edges = j.at("bands").get<std::vector<double>>();
      s.class_profiles = default_class_profiles(s.bands.n_bands());
    }
    if (j.contains("class_profiles")) s.class_profiles = matrix_from_json(j.at("class_profiles"));
    if (j.contains("eye_class_means")) s.eye_class_means = matrix_from_json(j.at("eye_class_means"));
    s.noise_level = j.value("noise_level", s.noise_level);
    s.band_gain_jitter = j.value("band_gain_jitter", s.band_gain_jitter);
    s.channel_gain_jitter = j.value("channel_gain_jitter", s.channel_gain_jitter);
    s.eye_trial_jitter = j.value("eye_trial_jitter", s.eye_trial_jitter);
    s.eye_row_noise = j.value("eye_row_noise", s.eye_row_noise);
    s.temporal_correlation = j.value("temporal_correlation", s.temporal_correlation);
    s.drift_depth = j.value("drift_depth", s.drift_depth);
    s.rng_seed = j.value("rng_seed", s.rng_seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid synth spec: ") + e.what());
  }
}

SynthTrial generate_trial(EmotionLabel label, const SynthSpec& spec, Rng& rng) {
  spec.validate();
  const Index n = spec.samples_per_trial();
  const Index nb = static_cast<Index>(spec.bands.n_bands());
  const double fs = spec.sampling_rate;
  const double nyquist = fs / 2.0;
  const double jitter = spec.noise_level;

  std::vector<double> band_gain(static_cast<std::size_t>(nb));
  for (auto& g : band_gain) g = std::exp(spec.band_gain_jitter * jitter * rng.normal());

  RowMatrixXd envelope = RowMatrixXd::Ones(nb, n);
  if (spec.temporal_correlation && spec.drift_depth > 0.0) {
    for (Index b = 0; b < nb; ++b) {
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (Index i = 0; i < n; ++i) {
        envelope(b, i) = 1.0 + spec.drift_depth * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) /
                                                                 static_cast<double>(n) + phase);
      }
    }
  }

  SynthTrial out;
  out.raw.label = label;
  out.raw.sampling_rate = fs;
  out.raw.samples = RowMatrixXd::Zero(spec.channels, n);
  for (Index c = 0; c < spec.channels; ++c) {
    std::span<double> row(out.raw.samples.row(c).data(), static_cast<std::size_t>(n));
    for (Index b = 0; b < nb; ++b) {
      const double lo = spec.bands.low(static_cast<std::size_t>(b));
      const double hi = std::min(spec.bands.high(static_cast<std::size_t>(b)), nyquist);
      const double quarter = (hi - lo) / 4.0;
      const double freq = rng.uniform(lo + quarter, hi - quarter);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double gain = std::exp(spec.channel_gain_jitter * jitter * rng.normal());
      const double amplitude = spec.class_profiles(label.code(), b) * band_gain[static_cast<std::size_t>(b)] * gain;
      if (amplitude > 0.0) add_sinusoid(row, envelope.row(b).data(), amplitude, freq, fs, phase);
    }
    if (spec.noise_level > 0.0) add_pink_noise(row, spec.noise_level, rng);
  }

  out.eye.kind = FeatureKind::eye;
  out.eye.row_seconds = spec.eye_segment_seconds;
  out.eye.row_step_seconds = spec.eye_segment_seconds;
  const Index rows = spec.eye_rows();
  Eigen::RowVectorXd offset(kEyeFeatures);
  for (Index k = 0; k < kEyeFeatures; ++k) offset(k) = spec.eye_trial_jitter * jitter * rng.normal();
  out.eye.data.resize(rows, kEyeFeatures);
  for (Index r = 0; r < rows; ++r) {
    for (Index k = 0; k < kEyeFeatures; ++k) {
      out.eye.data(r, k) = spec.eye_class_means(label.code(), k) + offset(k) + spec.eye_row_noise * jitter * rng.normal();
    }
  }
  out.eye.col_names.reserve(kEyeFeatures);
  for (Index k = 0; k < kEyeFeatures; ++k) out.eye.col_names.push_back("eye_f" + std::to_string(k));
  return out;
}

std::vector<EmotionLabel> session_schedule(const SynthSpec& spec, Rng& rng) {
  const int per_class = spec.trials_per_session / kNumEmotions;
  std::vector<int> codes;
  for (int c = 0; c < kNumEmotions; ++c) codes.insert(codes.end(), static_cast<std::size_t>(per_class), c);
  for (;;) {
    rng.shuffle(codes);
    bool ok = true;
    for (std::size_t i = 1; i < codes.size() && ok; ++i) ok = codes[i] != codes[i - 1];
    if (ok) break;
  }
  std::vector<EmotionLabel> labels;
  labels.reserve(codes.size());
  for (int c : codes) labels.push_back(EmotionLabel::from_code(c));
  return labels;
}

std::vector<TrialPlan> plan_corpus(const SynthSpec& spec) {
  spec.validate();
  std::vector<TrialPlan> plans;
  plans.reserve(spec.total_trials());
  for (int p = 1; p <= spec.n_participants; ++p) {
    for (int s = 1; s <= spec.n_sessions; ++s) {
      const std::uint64_t session_id = static_cast<std::uint64_t>(p) * 16 + static_cast<std::uint64_t>(s);
      Rng rng(derive_seed(spec.rng_seed, kScheduleStream, session_id));
      const auto labels = session_schedule(spec, rng);
      for (int t = 1; t <= spec.trials_per_session; ++t) {
        TrialPlan plan;
        plan.participant = p;
        plan.session = s;
        plan.trial = t;
        plan.label = labels[static_cast<std::size_t>(t - 1)];
        plan.seed = derive_seed(spec.rng_seed, kTrialStream, session_id * 64 + static_cast<std::uint64_t>(t));
        plans.push_back(plan);
      }
    }
  }
  return plans;
}

SynthTrial generate_planned(const TrialPlan& plan, const SynthSpec& spec) {
  Rng rng(plan.seed);
  SynthTrial t = generate_trial(plan.label, spec, rng);
  t.raw.participant = plan.participant;
  t.raw.session = plan.session;
  t.raw.trial_index = plan.trial;
  return t;
}

io::Manifest generate_corpus(const SynthSpec& spec, const std::filesystem::path& dir) {
  const auto plans = plan_corpus(spec);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  io::Manifest manifest;
  manifest.root = dir;
  manifest.provenance = {{"source", "synthetic"}, {"synth_spec", spec}};
  manifest.trials.resize(plans.size());
  parallel_for(plans.size(), [&](std::size_t i) {
    const TrialPlan& plan = plans[i];
    const SynthTrial trial = generate_planned(plan, spec);
    const std::string stem = io::trial_stem(plan.participant, plan.session, plan.trial);
    io::ManifestEntry& e = manifest.trials[i];
    e.participant = plan.participant;
    e.session = plan.session;
    e.trial = plan.trial;
    e.label = plan.label;
    e.sampling_rate = spec.sampling_rate;
    e.raw_path = stem + "_raw.npy";
    e.eye_path = stem + "_EYE.npy";
    io::write_npy(dir / e.raw_path, trial.raw.samples);
    io::write_npy(dir / e.eye_path, trial.eye.data);
  });
  manifest.validate(true);
  manifest.save();
  return manifest;
}

}  // namespace neurofuse::synth
