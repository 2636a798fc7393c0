#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace neurofuse {

// Row-major dense types. Rows are windows/samples throughout the pipeline.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RowMatrixXd = RowMatrix<double>;
using Index = Eigen::Index;

// Exit-code contract of the CLI: 1 validation, 2 I/O, 3 numerical failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

inline constexpr int kNumEmotions = 5;

/// One of the five emotion classes, coded disgust=0, fear=1, sad=2,
/// neutral=3, happy=4.
class EmotionLabel {
 public:
  static EmotionLabel from_code(int code);
  static EmotionLabel from_name(std::string_view name);

  int code() const noexcept { return code_; }
  std::string_view name() const noexcept;

  friend bool operator==(EmotionLabel, EmotionLabel) = default;

 private:
  explicit EmotionLabel(int code) : code_(code) {}
  int code_;
};

Eigen::Matrix<double, kNumEmotions, 1> label_to_onehot(EmotionLabel label);
// Throws ValidationError for codes outside 0..4.
Eigen::Matrix<double, kNumEmotions, 1> label_to_onehot(int code);

/// Ascending band edges; consecutive pairs form half-open bands [f1, f2).
struct BandSpec {
  std::vector<double> edges;

  std::size_t n_bands() const { return edges.empty() ? 0 : edges.size() - 1; }
  double low(std::size_t band) const { return edges.at(band); }
  double high(std::size_t band) const { return edges.at(band + 1); }
  void validate(std::string_view what = "bands") const;

  static BandSpec power_spectrum_default() { return {{0.5, 4, 7, 12, 16, 30, 100}}; }
  static BandSpec de_default() { return {{1, 4, 8, 14, 31, 51}}; }
};

// Channel and width conventions of the recording layout.
inline constexpr Index kRawChannels = 66;
inline constexpr Index kDeChannels = 62;
inline constexpr Index kEyeFeatures = 33;

/// One film-clip recording: channel-major samples (channels x n_samples).
struct RawTrial {
  int participant = 0;
  int session = 0;
  int trial_index = 0;
  EmotionLabel label = EmotionLabel::from_code(0);
  double sampling_rate = 1000.0;
  RowMatrixXd samples;

  Index channels() const { return samples.rows(); }
  Index n_samples() const { return samples.cols(); }
  void validate() const;
};

enum class FeatureKind { power_spectrum, de, eye, fused };
std::string_view to_string(FeatureKind kind);

/// Rows are time windows or segments, columns are named feature dimensions.
struct FeatureMatrix {
  FeatureKind kind = FeatureKind::fused;
  RowMatrixXd data;
  double row_seconds = 0.0;       // duration covered by one row
  double row_step_seconds = 0.0;  // start-to-start spacing of rows
  std::vector<std::string> col_names;

  Index rows() const { return data.rows(); }
  Index cols() const { return data.cols(); }
  /// Checks finiteness and that col_names (when present) match the width.
  void validate() const;
};

enum class SplitMode { window, trial };
enum class ScalerFit { train, all };

std::string_view to_string(SplitMode mode);
SplitMode split_mode_from_string(std::string_view s);
std::string_view to_string(ScalerFit fit);
ScalerFit scaler_fit_from_string(std::string_view s);

struct PipelineConfig {
  std::size_t window_len = 200;
  std::size_t hop = 50;
  BandSpec band_edges = BandSpec::power_spectrum_default();
  BandSpec de_bands = BandSpec::de_default();
  double de_segment_seconds = 4.0;
  double de_sampling_rate = 200.0;
  double bandpass_low = 1.0;
  double bandpass_high = 75.0;
  double train_fraction = 0.7;
  std::size_t batch_size = 1000;
  std::uint64_t rng_seed = 0;
  SplitMode split_mode = SplitMode::window;

  // Training knobs that have no published value.
  std::size_t epochs = 3;
  double learning_rate = 1e-3;
  ScalerFit scaler_fit = ScalerFit::train;
  bool stratify = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& cfg);
void from_json(const nlohmann::json& j, PipelineConfig& cfg);

/// Deterministic random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard, so identical seeds produce identical raw draws on every
/// conforming platform. All derived quantities (uniform reals, normals,
/// bounded integers, shuffles) are computed here rather than through the
/// implementation-defined std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n), unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

Rng seeded_rng(std::uint64_t seed);

/// Worker cap from NEUROFUSE_THREADS (defaults to hardware concurrency).
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Callers
/// write results into pre-sized slots so output order never depends on
/// scheduling. The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace neurofuse
