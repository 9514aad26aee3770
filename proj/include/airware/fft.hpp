#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <numbers>
#include <span>
#include <vector>

#include "airware/error.hpp"

namespace airware::dsp {

using Complex = std::complex<double>;

/// Iterative radix-2 Cooley-Tukey transform for one power-of-two size.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    require(n >= 1 && (n & (n - 1)) == 0, ErrorCode::InvalidArgument,
            "FFT size must be a power of two, got " + std::to_string(n));
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    reversed_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      reversed_[i] = r;
    }
    twiddles_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddles_[k] = {std::cos(a), std::sin(a)};
    }
  }

  std::size_t size() const { return n_; }

  /// In-place forward DFT: X[k] = sum_t x[t] exp(-2 pi i k t / n).
  void forward(std::span<Complex> data) const {
    require(data.size() == n_, ErrorCode::ShapeMismatch, "FFT input length mismatch");
    for (std::size_t i = 0; i < n_; ++i)
      if (i < reversed_[i]) std::swap(data[i], data[reversed_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t j = 0; j < half; ++j) {
          const Complex w = twiddles_[j * stride];
          const Complex a = data[start + j];
          const Complex b = data[start + j + half] * w;
          data[start + j] = a + b;
          data[start + j + half] = a - b;
        }
      }
    }
  }

 private:
  std::size_t n_;
  std::vector<std::size_t> reversed_;
  std::vector<Complex> twiddles_;
};

/// Per-thread plan cache.
inline const FftPlan& fft_plan(std::size_t n) {
  thread_local std::map<std::size_t, FftPlan> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, FftPlan(n)).first;
  return it->second;
}

inline std::vector<Complex> fft(std::vector<Complex> data) {
  fft_plan(data.size()).forward(data);
  return data;
}

/// Transforms two real sequences with one complex FFT. Outputs hold bins
/// 0..n/2 of each spectrum.
inline void fft_real_pair(std::span<const double> a, std::span<const double> b, std::span<Complex> out_a,
                          std::span<Complex> out_b, std::vector<Complex>& scratch) {
  const std::size_t n = a.size();
  require(b.size() == n && out_a.size() == n / 2 + 1 && out_b.size() == n / 2 + 1, ErrorCode::ShapeMismatch,
          "fft_real_pair size mismatch");
  scratch.resize(n);
  for (std::size_t i = 0; i < n; ++i) scratch[i] = {a[i], b[i]};
  fft_plan(n).forward(scratch);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const Complex z = scratch[k];
    const Complex zc = std::conj(scratch[(n - k) % n]);
    out_a[k] = 0.5 * (z + zc);
    out_b[k] = Complex(0.0, -0.5) * (z - zc);
  }
}

}  // namespace airware::dsp
