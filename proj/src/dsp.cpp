#include "neurofuse/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace neurofuse::dsp {

namespace {

bool keep_bin(std::size_t k, std::size_t n, double fs, double low, double high) {
  const double f = static_cast<double>(std::min(k, n - k)) * fs / static_cast<double>(n);
  return f >= low && f <= high;
}

void apply_bandpass_mask(std::span<Complex> spectrum, double fs, double low, double high) {
  const std::size_t n = spectrum.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (!keep_bin(k, n, fs, low, high)) spectrum[k] = Complex{};
  }
}

void check_bandpass(double fs, double low, double high) {
  if (!(low > 0.0 && low < high && high < fs / 2.0)) {
    throw ValidationError("invalid bandpass [" + std::to_string(low) + ", " + std::to_string(high) +
                          "] Hz for fs=" + std::to_string(fs) + " (need 0 < low < high < fs/2)");
  }
}

std::vector<std::string> channel_band_names(std::string_view prefix, Index channels,
                                            std::size_t bands) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(channels) * bands);
  for (Index c = 0; c < channels; ++c) {
    for (std::size_t b = 0; b < bands; ++b) {
      names.push_back(std::string(prefix) + "_ch" + std::to_string(c) + "_b" + std::to_string(b));
    }
  }
  return names;
}

}  // namespace

std::size_t window_count(std::size_t n, std::size_t window_len, std::size_t hop) {
  if (window_len == 0 || hop == 0) throw ValidationError("window length and hop must be >= 1");
  if (n < window_len) {
    throw ValidationError("insufficient samples: " + std::to_string(n) + " < window length " +
                          std::to_string(window_len));
  }
  return (n - window_len) / hop + 1;
}

std::vector<Window> slide_windows(std::span<const double> signal, std::size_t window_len,
                                  std::size_t hop, Index channel) {
  const std::size_t count = window_count(signal.size(), window_len, hop);
  std::vector<Window> windows;
  windows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    windows.push_back({signal.subspan(i * hop, window_len), channel, i * hop});
  }
  return windows;
}

Spectrum magnitude_spectrum(std::span<const double> window, double fs) {
  const ComplexVector x = fft(window);
  Spectrum s;
  s.bin_hz = fs / static_cast<double>(window.size());
  s.magnitudes.resize(window.size() / 2 + 1);
  for (std::size_t k = 0; k < s.magnitudes.size(); ++k) s.magnitudes[k] = magnitude(x[k]);
  return s;
}

std::vector<std::pair<std::size_t, std::size_t>> band_bin_ranges(const BandSpec& bands,
                                                                 std::size_t window_len, double fs) {
  bands.validate();
  if (window_len < 2) throw ValidationError("window length must be >= 2");
  if (!(fs > 0.0)) throw ValidationError("sampling rate must be > 0");
  if (bands.edges.back() > fs / 2.0) {
    throw ValidationError("invalid band: edge " + std::to_string(bands.edges.back()) +
                          " Hz exceeds Nyquist " + std::to_string(fs / 2.0) + " Hz");
  }
  const std::size_t n_bins = window_len / 2 + 1;
  auto first_bin_at_or_above = [&](double f) {
    std::size_t k = 0;
    while (k < n_bins && static_cast<double>(k) * fs / static_cast<double>(window_len) < f) ++k;
    return k;
  };
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t b = 0; b < bands.n_bands(); ++b) {
    ranges.emplace_back(first_bin_at_or_above(bands.low(b)), first_bin_at_or_above(bands.high(b)));
  }
  return ranges;
}

BandPower bin_power(std::span<const double> window, const BandSpec& bands, double fs) {
  const auto ranges = band_bin_ranges(bands, window.size(), fs);
  const Spectrum spectrum = magnitude_spectrum(window, fs);
  BandPower out;
  out.absolute = Eigen::VectorXd::Zero(static_cast<Index>(ranges.size()));
  for (std::size_t b = 0; b < ranges.size(); ++b) {
    double sum = 0.0;
    for (std::size_t k = ranges[b].first; k < ranges[b].second; ++k) sum += spectrum.magnitudes[k];
    out.absolute[static_cast<Index>(b)] = sum;
  }
  const double total = out.absolute.sum();
  // in-band sums at round-off level (a constant window) carry no shape
  double spectrum_total = 0.0;
  for (double m : spectrum.magnitudes) spectrum_total += m;
  if (total > 1e-12 * spectrum_total) {
    out.relative = out.absolute / total;
  } else {
    out.relative = Eigen::VectorXd::Constant(out.absolute.size(), 1.0 / static_cast<double>(ranges.size()));
    out.degenerate = true;
  }
  return out;
}

BandPower bin_power(const Window& window, const BandSpec& bands, double fs) {
  return bin_power(window.samples, bands, fs);
}

FeatureMatrix extract_power_spectrum(const RawTrial& trial, const PipelineConfig& cfg) {
  cfg.validate();
  if (trial.channels() != kRawChannels) {
    throw ValidationError("power spectrum expects " + std::to_string(kRawChannels) +
                          " channels, trial has " + std::to_string(trial.channels()));
  }
  const std::size_t w = cfg.window_len;
  const std::size_t n = static_cast<std::size_t>(trial.n_samples());
  const std::size_t n_windows = window_count(n, w, cfg.hop);
  const auto ranges = band_bin_ranges(cfg.band_edges, w, trial.sampling_rate);
  const std::size_t n_bands = ranges.size();

  FeatureMatrix out;
  out.kind = FeatureKind::power_spectrum;
  out.data.resize(static_cast<Index>(n_windows), trial.channels() * static_cast<Index>(n_bands));
  out.row_seconds = static_cast<double>(w) / trial.sampling_rate;
  out.row_step_seconds = static_cast<double>(cfg.hop) / trial.sampling_rate;
  out.col_names = channel_band_names("ps", trial.channels(), n_bands);

  const FftPlan& plan = fft_plan(w);
  ComplexVector buf(w);
  std::vector<double> mag_a(w / 2 + 1), mag_b(w / 2 + 1);
  auto store = [&](const std::vector<double>& mags, std::size_t row, Index channel) {
    for (std::size_t b = 0; b < n_bands; ++b) {
      double sum = 0.0;
      for (std::size_t k = ranges[b].first; k < ranges[b].second; ++k) sum += mags[k];
      out.data(static_cast<Index>(row), channel * static_cast<Index>(n_bands) + static_cast<Index>(b)) = sum;
    }
  };

  for (Index c = 0; c < trial.channels(); ++c) {
    const double* signal = trial.samples.row(c).data();
    // Two real windows share one complex transform: z = a + i*b.
    for (std::size_t i = 0; i < n_windows; i += 2) {
      const bool pair = i + 1 < n_windows;
      const double* a = signal + i * cfg.hop;
      const double* b = pair ? signal + (i + 1) * cfg.hop : nullptr;
      for (std::size_t j = 0; j < w; ++j) buf[j] = Complex(a[j], pair ? b[j] : 0.0);
      plan.forward(buf);
      for (std::size_t k = 0; k <= w / 2; ++k) {
        const Complex zk = buf[k];
        const Complex zm = std::conj(buf[(w - k) % w]);
        mag_a[k] = 0.5 * magnitude(zk + zm);
        mag_b[k] = 0.5 * magnitude(zk - zm);
      }
      store(mag_a, i, c);
      if (pair) store(mag_b, i + 1, c);
    }
  }
  out.validate();
  return out;
}

std::vector<double> bandpass(std::span<const double> signal, double fs, double low, double high) {
  check_bandpass(fs, low, high);
  if (signal.empty()) return {};
  ComplexVector spectrum = fft(signal);
  apply_bandpass_mask(spectrum, fs, low, high);
  fft_plan(spectrum.size()).inverse(spectrum);
  std::vector<double> out(signal.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = spectrum[i].real();
  return out;
}

std::vector<double> downsample(std::span<const double> signal, std::size_t factor) {
  if (factor == 0) throw ValidationError("downsample factor must be >= 1");
  std::vector<double> out;
  out.reserve((signal.size() + factor - 1) / factor);
  for (std::size_t i = 0; i < signal.size(); i += factor) out.push_back(signal[i]);
  return out;
}

Entropy differential_entropy(std::span<const double> segment) {
  if (segment.size() < 2) throw ValidationError("differential entropy needs at least 2 samples");
  const double n = static_cast<double>(segment.size());
  double mean = 0.0;
  for (double x : segment) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : segment) ss += (x - mean) * (x - mean);
  const double variance = ss / (n - 1.0);
  constexpr double kTwoPiE = 2.0 * std::numbers::pi * std::numbers::e;
  if (!(variance > 0.0)) return {0.5 * std::log(kTwoPiE * kVarianceFloor), true};
  return {0.5 * std::log(kTwoPiE * variance), false};
}

FeatureMatrix extract_de(const RawTrial& trial, const PipelineConfig& cfg) {
  cfg.validate();
  if (trial.channels() < kDeChannels) {
    throw ValidationError("differential entropy expects at least " + std::to_string(kDeChannels) +
                          " channels, trial has " + std::to_string(trial.channels()));
  }
  const double fs = trial.sampling_rate;
  const double ratio = fs / cfg.de_sampling_rate;
  const auto factor = static_cast<std::size_t>(std::llround(ratio));
  if (factor < 1 || std::abs(ratio - static_cast<double>(factor)) > 1e-9) {
    throw ValidationError("sampling rate " + std::to_string(fs) +
                          " Hz is not an integer multiple of the DE rate " +
                          std::to_string(cfg.de_sampling_rate) + " Hz");
  }
  check_bandpass(fs, cfg.bandpass_low, cfg.bandpass_high);
  const BandSpec& bands = cfg.de_bands;
  for (std::size_t b = 0; b < bands.n_bands(); ++b) {
    check_bandpass(cfg.de_sampling_rate, bands.low(b), bands.high(b));
  }
  const std::size_t seg_len =
      static_cast<std::size_t>(std::llround(cfg.de_segment_seconds * cfg.de_sampling_rate));
  if (seg_len < 2) throw ValidationError("DE segment must span at least 2 samples");

  const std::size_t n = static_cast<std::size_t>(trial.n_samples());
  const std::size_t n_ds = (n + factor - 1) / factor;
  const std::size_t n_segments = n_ds / seg_len;
  if (n_segments == 0) {
    throw ValidationError("trial shorter than one DE segment (" + std::to_string(n_ds) + " < " +
                          std::to_string(seg_len) + " samples after decimation)");
  }
  const std::size_t n_bands = bands.n_bands();

  FeatureMatrix out;
  out.kind = FeatureKind::de;
  out.data.resize(static_cast<Index>(n_segments), kDeChannels * static_cast<Index>(n_bands));
  out.row_seconds = cfg.de_segment_seconds;
  out.row_step_seconds = cfg.de_segment_seconds;
  out.col_names = channel_band_names("de", kDeChannels, n_bands);

  const FftPlan& full_plan = fft_plan(n);
  const FftPlan& ds_plan = fft_plan(n_ds);
  ComplexVector full(n), decimated(n_ds), band(n_ds);
  std::vector<double> part(seg_len);

  auto store = [&](const ComplexVector& filtered, bool imaginary, Index channel, std::size_t b) {
    for (std::size_t s = 0; s < n_segments; ++s) {
      for (std::size_t j = 0; j < seg_len; ++j) {
        const Complex z = filtered[s * seg_len + j];
        part[j] = imaginary ? z.imag() : z.real();
      }
      out.data(static_cast<Index>(s), channel * static_cast<Index>(n_bands) + static_cast<Index>(b)) =
          differential_entropy(part).value;
    }
  };

  // Channels are filtered in pairs packed as real and imaginary parts; the
  // masks are symmetric so the two signals never mix.
  for (Index c = 0; c < kDeChannels; c += 2) {
    const bool pair = c + 1 < kDeChannels;
    const double* a = trial.samples.row(c).data();
    const double* b = pair ? trial.samples.row(c + 1).data() : nullptr;
    for (std::size_t i = 0; i < n; ++i) full[i] = Complex(a[i], pair ? b[i] : 0.0);
    full_plan.forward(full);
    apply_bandpass_mask(full, fs, cfg.bandpass_low, cfg.bandpass_high);
    full_plan.inverse(full);
    for (std::size_t i = 0; i < n_ds; ++i) decimated[i] = full[i * factor];
    ds_plan.forward(decimated);
    for (std::size_t bi = 0; bi < n_bands; ++bi) {
      band = decimated;
      apply_bandpass_mask(band, cfg.de_sampling_rate, bands.low(bi), bands.high(bi));
      ds_plan.inverse(band);
      store(band, false, c, bi);
      if (pair) store(band, true, c + 1, bi);
    }
  }
  out.validate();
  return out;
}

}  // namespace neurofuse::dsp
