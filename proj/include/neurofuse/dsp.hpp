#pragma once

#include <span>
#include <vector>

#include "neurofuse/core.hpp"
#include "neurofuse/fft.hpp"

namespace neurofuse::dsp {

/// A length-W view into one channel's samples.
struct Window {
  std::span<const double> samples;
  Index channel = 0;
  std::size_t start_index = 0;
};

/// floor((n - window_len) / hop) + 1; throws when n < window_len.
std::size_t window_count(std::size_t n, std::size_t window_len, std::size_t hop);

/// Full windows starting at 0, hop, 2*hop, ...; trailing samples are dropped.
std::vector<Window> slide_windows(std::span<const double> signal, std::size_t window_len,
                                  std::size_t hop, Index channel = 0);

struct Spectrum {
  std::vector<double> magnitudes;  // |X_k|, k = 0..W/2
  double bin_hz = 0.0;             // fs / W
};

Spectrum magnitude_spectrum(std::span<const double> window, double fs);

struct BandPower {
  Eigen::VectorXd absolute;
  Eigen::VectorXd relative;
  /// Set when the in-band total is at most 1e-12 of the whole spectrum's
  /// magnitude sum (no in-band energy beyond round-off); relative is then
  /// uniform.
  bool degenerate = false;
};

/// Sum of DFT magnitudes |X_k| over the bins with f1 <= k*fs/W < f2, per
/// band, plus each band's share of the total. Magnitudes, not squared
/// magnitudes, are summed. Band edges may reach but not exceed fs/2.
BandPower bin_power(std::span<const double> window, const BandSpec& bands, double fs);
BandPower bin_power(const Window& window, const BandSpec& bands, double fs);

/// Half-open bin range [first, last) for each band of a length-W transform.
std::vector<std::pair<std::size_t, std::size_t>> band_bin_ranges(const BandSpec& bands,
                                                                 std::size_t window_len, double fs);

/// Absolute band powers of every window of every channel, laid out channel
/// major: column c * n_bands + b holds band b of channel c.
FeatureMatrix extract_power_spectrum(const RawTrial& trial, const PipelineConfig& cfg);

/// Brick-wall filter: transform, zero every bin whose frequency lies outside
/// [low, high], transform back and keep the real part.
std::vector<double> bandpass(std::span<const double> signal, double fs, double low, double high);

/// Every factor-th sample starting at index 0.
std::vector<double> downsample(std::span<const double> signal, std::size_t factor);

struct Entropy {
  double value = 0.0;
  /// Zero-variance segment; value is the floor 0.5 * ln(2*pi*e*1e-12).
  bool degenerate = false;
};

inline constexpr double kVarianceFloor = 1e-12;

/// Gaussian differential entropy 0.5 * ln(2*pi*e*s^2), s^2 the unbiased
/// sample variance.
Entropy differential_entropy(std::span<const double> segment);

/// Per channel (first 62): bandpass to the configured range, decimate to the
/// DE sampling rate, isolate each DE band, and take the entropy of
/// consecutive non-overlapping segments. Columns are channel major.
FeatureMatrix extract_de(const RawTrial& trial, const PipelineConfig& cfg);

}  // namespace neurofuse::dsp
