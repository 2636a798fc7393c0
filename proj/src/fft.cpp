#include "neurofuse/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "neurofuse/core.hpp"

namespace neurofuse::dsp {

namespace {

constexpr std::size_t kMaxDirectRadix = 61;

std::vector<std::size_t> factorize(std::size_t n) {
  std::vector<std::size_t> f;
  while (n % 4 == 0) {
    f.push_back(4);
    n /= 4;
  }
  while (n % 2 == 0) {
    f.push_back(2);
    n /= 2;
  }
  for (std::size_t p = 3; p * p <= n; p += 2) {
    while (n % p == 0) {
      f.push_back(p);
      n /= p;
    }
  }
  if (n > 1) f.push_back(n);
  return f;
}

Complex unit_root(std::size_t j, std::size_t n) {
  const double angle = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
  return {std::cos(angle), std::sin(angle)};
}

}  // namespace

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (n == 0) throw ValidationError("fft length must be >= 1");
  if (is_power_of_two(n)) {
    twiddles_.resize(n / 2);
    for (std::size_t j = 0; j < n / 2; ++j) twiddles_[j] = unit_root(j, n);
    bit_reverse_.resize(n);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
      bit_reverse_[i] = r;
    }
    return;
  }
  factors_ = factorize(n);
  if (*std::max_element(factors_.begin(), factors_.end()) > kMaxDirectRadix) {
    factors_.clear();
    const std::size_t m = next_power_of_two(2 * n - 1);
    inner_ = std::make_unique<FftPlan>(m);
    chirp_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the angle argument small.
      const std::size_t k2 = static_cast<std::size_t>((static_cast<unsigned __int128>(k) * k) % (2 * n));
      const double angle = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
      chirp_[k] = {std::cos(angle), std::sin(angle)};
    }
    chirp_spectrum_.assign(m, Complex{});
    chirp_spectrum_[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n; ++k) {
      chirp_spectrum_[k] = std::conj(chirp_[k]);
      chirp_spectrum_[m - k] = std::conj(chirp_[k]);
    }
    inner_->forward(chirp_spectrum_);
    return;
  }
  twiddles_.resize(n);
  for (std::size_t j = 0; j < n; ++j) twiddles_[j] = unit_root(j, n);
}

FftPlan::~FftPlan() = default;
FftPlan::FftPlan(FftPlan&&) noexcept = default;
FftPlan& FftPlan::operator=(FftPlan&&) noexcept = default;

void FftPlan::forward(std::span<Complex> data) const {
  if (data.size() != n_) throw ValidationError("fft plan length mismatch");
  if (n_ == 1) return;
  if (!bit_reverse_.empty()) {
    radix2(data.data());
  } else if (inner_) {
    bluestein(data.data());
  } else {
    scratch_.assign(data.begin(), data.end());
    mixed(scratch_.data(), 1, data.data(), n_, 0);
  }
}

void FftPlan::inverse(std::span<Complex> data) const {
  for (auto& z : data) z = std::conj(z);
  forward(data);
  const double scale = 1.0 / static_cast<double>(n_);
  for (auto& z : data) z = std::conj(z) * scale;
}

void FftPlan::radix2(Complex* data) const {
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t j = bit_reverse_[i];
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex t = cmul(data[start + k + half], twiddles_[k * step]);
        const Complex u = data[start + k];
        data[start + k] = u + t;
        data[start + k + half] = u - t;
      }
    }
  }
}

// Decimation in time: the p interleaved sub-sequences of `in` are transformed
// into consecutive blocks of `out`, then combined with radix-p butterflies.
void FftPlan::mixed(const Complex* in, std::size_t stride, Complex* out, std::size_t n,
                    std::size_t factor) const {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const std::size_t p = factors_[factor];
  const std::size_t m = n / p;
  for (std::size_t r = 0; r < p; ++r) {
    mixed(in + r * stride, stride * p, out + r * m, m, factor + 1);
  }
  const std::size_t tw_step = n_ / n;

  if (p == 2) {
    for (std::size_t k = 0; k < m; ++k) {
      const Complex a = out[k];
      const Complex b = cmul(out[k + m], twiddles_[k * tw_step]);
      out[k] = a + b;
      out[k + m] = a - b;
    }
    return;
  }
  if (p == 4) {
    for (std::size_t k = 0; k < m; ++k) {
      const Complex a0 = out[k];
      const Complex a1 = cmul(out[k + m], twiddles_[k * tw_step]);
      const Complex a2 = cmul(out[k + 2 * m], twiddles_[2 * k * tw_step]);
      const Complex a3 = cmul(out[k + 3 * m], twiddles_[3 * k * tw_step]);
      const Complex s02 = a0 + a2, d02 = a0 - a2;
      const Complex s13 = a1 + a3, d13 = a1 - a3;
      // -i * d13
      const Complex rot{d13.imag(), -d13.real()};
      out[k] = s02 + s13;
      out[k + m] = d02 + rot;
      out[k + 2 * m] = s02 - s13;
      out[k + 3 * m] = d02 - rot;
    }
    return;
  }

  Complex tmp[kMaxDirectRadix];
  const std::size_t root_step = n_ / p;
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t r = 0; r < p; ++r) {
      tmp[r] = cmul(out[r * m + k], twiddles_[r * k * tw_step]);  // r * k < n
    }
    for (std::size_t q = 0; q < p; ++q) {
      Complex acc = tmp[0];
      std::size_t idx = 0;  // (r * q) mod p
      for (std::size_t r = 1; r < p; ++r) {
        idx += q;
        if (idx >= p) idx -= p;
        acc += cmul(tmp[r], twiddles_[idx * root_step]);
      }
      out[q * m + k] = acc;
    }
  }
}

void FftPlan::bluestein(Complex* data) const {
  const std::size_t m = inner_->size();
  scratch_.assign(m, Complex{});
  for (std::size_t k = 0; k < n_; ++k) scratch_[k] = cmul(data[k], chirp_[k]);
  inner_->forward(scratch_);
  for (std::size_t k = 0; k < m; ++k) scratch_[k] = cmul(scratch_[k], chirp_spectrum_[k]);
  inner_->inverse(scratch_);
  for (std::size_t k = 0; k < n_; ++k) data[k] = cmul(scratch_[k], chirp_[k]);
}

const FftPlan& fft_plan(std::size_t n) {
  thread_local std::unordered_map<std::size_t, std::unique_ptr<FftPlan>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlan>(n);
  return *slot;
}

ComplexVector fft(std::span<const Complex> x) {
  ComplexVector out(x.begin(), x.end());
  fft_plan(out.size()).forward(out);
  return out;
}

ComplexVector fft(std::span<const double> x) {
  ComplexVector out(x.begin(), x.end());
  fft_plan(out.size()).forward(out);
  return out;
}

ComplexVector ifft(std::span<const Complex> spectrum) {
  ComplexVector out(spectrum.begin(), spectrum.end());
  fft_plan(out.size()).inverse(out);
  return out;
}

}  // namespace neurofuse::dsp
