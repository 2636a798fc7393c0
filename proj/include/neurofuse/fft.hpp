#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace neurofuse::dsp {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

/// Plain complex product. std::complex's operator* goes through a library
/// call that handles inf/nan corner cases, which dominates FFT inner loops.
inline Complex cmul(Complex a, Complex b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

/// |z| without hypot's overflow guards; spectra here stay far from the
/// double range limits.
inline double magnitude(Complex z) { return std::sqrt(z.real() * z.real() + z.imag() * z.imag()); }

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }
std::size_t next_power_of_two(std::size_t n);

/// Precomputed transform of one length.
///
/// Powers of two use an iterative radix-2 kernel. Other lengths use a
/// recursive mixed-radix Cooley-Tukey decomposition; if the length has a
/// prime factor above 61 the whole transform goes through Bluestein's chirp-z
/// reduction to a power-of-two convolution. Every path computes the exact DFT
/// X_k = sum_n x_n exp(-2*pi*i*k*n/N) with no forward normalization.
///
/// A plan owns scratch space and must not be used from two threads at once;
/// fft_plan() hands out per-thread instances.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);
  ~FftPlan();
  FftPlan(FftPlan&&) noexcept;
  FftPlan& operator=(FftPlan&&) noexcept;

  std::size_t size() const noexcept { return n_; }

  void forward(std::span<Complex> data) const;
  /// Inverse transform including the 1/N factor.
  void inverse(std::span<Complex> data) const;

 private:
  void radix2(Complex* data) const;
  void mixed(const Complex* in, std::size_t stride, Complex* out, std::size_t n,
             std::size_t factor) const;
  void bluestein(Complex* data) const;

  std::size_t n_ = 0;
  std::vector<std::size_t> factors_;
  ComplexVector twiddles_;  // exp(-2*pi*i*j/n), j < n
  std::vector<std::size_t> bit_reverse_;

  // Bluestein state.
  std::unique_ptr<FftPlan> inner_;
  ComplexVector chirp_;
  ComplexVector chirp_spectrum_;

  mutable ComplexVector scratch_;
};

/// Per-thread cached plan for length n.
const FftPlan& fft_plan(std::size_t n);

ComplexVector fft(std::span<const Complex> x);
ComplexVector fft(std::span<const double> x);
ComplexVector ifft(std::span<const Complex> spectrum);

}  // namespace neurofuse::dsp
