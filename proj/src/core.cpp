#include "neurofuse/core.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

namespace neurofuse {

namespace {

constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "disgust", "fear", "sad", "neutral", "happy"};

}  // namespace

EmotionLabel EmotionLabel::from_code(int code) {
  if (code < 0 || code >= kNumEmotions) {
    throw ValidationError("invalid label code " + std::to_string(code) + " (expected 0..4)");
  }
  return EmotionLabel(code);
}

EmotionLabel EmotionLabel::from_name(std::string_view name) {
  for (int i = 0; i < kNumEmotions; ++i) {
    if (kEmotionNames[i] == name) return EmotionLabel(i);
  }
  throw ValidationError("unknown emotion name '" + std::string(name) + "'");
}

std::string_view EmotionLabel::name() const noexcept { return kEmotionNames[code_]; }

Eigen::Matrix<double, kNumEmotions, 1> label_to_onehot(EmotionLabel label) {
  Eigen::Matrix<double, kNumEmotions, 1> v = Eigen::Matrix<double, kNumEmotions, 1>::Zero();
  v[label.code()] = 1.0;
  return v;
}

Eigen::Matrix<double, kNumEmotions, 1> label_to_onehot(int code) {
  return label_to_onehot(EmotionLabel::from_code(code));
}

void BandSpec::validate(std::string_view what) const {
  if (edges.size() < 2) {
    throw ValidationError(std::string(what) + ": need at least two edges");
  }
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!std::isfinite(edges[i]) || edges[i] <= 0.0) {
      throw ValidationError(std::string(what) + ": edges must be finite and > 0");
    }
    if (i > 0 && !(edges[i] > edges[i - 1])) {
      throw ValidationError(std::string(what) + ": edges must be strictly ascending");
    }
  }
}

void RawTrial::validate() const {
  if (session < 1 || session > 3) throw ValidationError("session must be in 1..3");
  if (trial_index < 1 || trial_index > 15) throw ValidationError("trial index must be in 1..15");
  if (!(sampling_rate > 0.0)) throw ValidationError("sampling rate must be > 0");
  if (samples.size() == 0) throw ValidationError("trial has no samples");
  if (!samples.allFinite()) throw ValidationError("trial contains non-finite samples");
}

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::power_spectrum: return "power_spectrum";
    case FeatureKind::de: return "de";
    case FeatureKind::eye: return "eye";
    case FeatureKind::fused: return "fused";
  }
  return "unknown";
}

void FeatureMatrix::validate() const {
  if (!data.allFinite()) {
    throw NumericalError(std::string(to_string(kind)) + " feature matrix contains non-finite values");
  }
  if (!col_names.empty() && static_cast<Index>(col_names.size()) != data.cols()) {
    throw ValidationError(std::string(to_string(kind)) + " column names do not match width");
  }
}

std::string_view to_string(SplitMode mode) {
  return mode == SplitMode::window ? "window" : "trial";
}

SplitMode split_mode_from_string(std::string_view s) {
  if (s == "window") return SplitMode::window;
  if (s == "trial") return SplitMode::trial;
  throw ValidationError("split mode must be 'window' or 'trial', got '" + std::string(s) + "'");
}

std::string_view to_string(ScalerFit fit) { return fit == ScalerFit::train ? "train" : "all"; }

ScalerFit scaler_fit_from_string(std::string_view s) {
  if (s == "train") return ScalerFit::train;
  if (s == "all") return ScalerFit::all;
  throw ValidationError("scaler fit must be 'train' or 'all', got '" + std::string(s) + "'");
}

void PipelineConfig::validate() const {
  if (window_len < 2) throw ValidationError("window_len must be >= 2");
  if (hop == 0 || hop > window_len) throw ValidationError("hop must satisfy 0 < hop <= window_len");
  band_edges.validate("band_edges");
  de_bands.validate("de_bands");
  if (!(de_segment_seconds > 0.0)) throw ValidationError("de_segment_seconds must be > 0");
  if (!(de_sampling_rate > 0.0)) throw ValidationError("de_sampling_rate must be > 0");
  if (!(bandpass_low > 0.0 && bandpass_low < bandpass_high)) {
    throw ValidationError("bandpass must satisfy 0 < low < high");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train_fraction must lie in (0, 1)");
  }
  if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
}

void to_json(nlohmann::json& j, const PipelineConfig& cfg) {
  j = nlohmann::json{
      {"window_len", cfg.window_len},
      {"hop", cfg.hop},
      {"band_edges", cfg.band_edges.edges},
      {"de_bands", cfg.de_bands.edges},
      {"de_segment_seconds", cfg.de_segment_seconds},
      {"de_sampling_rate", cfg.de_sampling_rate},
      {"bandpass", {cfg.bandpass_low, cfg.bandpass_high}},
      {"train_fraction", cfg.train_fraction},
      {"batch_size", cfg.batch_size},
      {"rng_seed", cfg.rng_seed},
      {"split_mode", to_string(cfg.split_mode)},
      {"epochs", cfg.epochs},
      {"learning_rate", cfg.learning_rate},
      {"scaler_fit", to_string(cfg.scaler_fit)},
      {"stratify", cfg.stratify},
  };
}

void from_json(const nlohmann::json& j, PipelineConfig& cfg) {
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "window_len") value.get_to(cfg.window_len);
      else if (key == "hop") value.get_to(cfg.hop);
      else if (key == "band_edges") value.get_to(cfg.band_edges.edges);
      else if (key == "de_bands") value.get_to(cfg.de_bands.edges);
      else if (key == "de_segment_seconds") value.get_to(cfg.de_segment_seconds);
      else if (key == "de_sampling_rate") value.get_to(cfg.de_sampling_rate);
      else if (key == "bandpass") {
        auto bp = value.get<std::vector<double>>();
        if (bp.size() != 2) throw ValidationError("bandpass must be [low, high]");
        cfg.bandpass_low = bp[0];
        cfg.bandpass_high = bp[1];
      } else if (key == "train_fraction") value.get_to(cfg.train_fraction);
      else if (key == "batch_size") value.get_to(cfg.batch_size);
      else if (key == "rng_seed") value.get_to(cfg.rng_seed);
      else if (key == "split_mode") cfg.split_mode = split_mode_from_string(value.get<std::string>());
      else if (key == "epochs") value.get_to(cfg.epochs);
      else if (key == "learning_rate") value.get_to(cfg.learning_rate);
      else if (key == "scaler_fit") cfg.scaler_fit = scaler_fit_from_string(value.get<std::string>());
      else if (key == "stratify") value.get_to(cfg.stratify);
      else throw ValidationError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ValidationError("Rng::below requires n > 0");
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

Rng seeded_rng(std::uint64_t seed) { return Rng(seed); }

std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("NEUROFUSE_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
  }
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace neurofuse
