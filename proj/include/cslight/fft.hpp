#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace cslight {

using ComplexVector = std::vector<std::complex<double>>;

/// FFTW plan pair for a fixed length. forward() applies sum x_n e^{-2 pi i k n / N};
/// inverse() applies the conjugate kernel and divides by N, so inverse(forward(x)) == x.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);
  ~FftPlan();
  FftPlan(FftPlan&&) noexcept;
  FftPlan& operator=(FftPlan&&) noexcept;
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::size_t size() const { return n_; }
  void forward(std::span<std::complex<double>> data) const;
  void inverse(std::span<std::complex<double>> data) const;

 private:
  struct Impl;
  std::size_t n_ = 0;
  std::unique_ptr<Impl> impl_;
};

/// Cached plan for length n. Plans are created once per length and shared.
const FftPlan& fft_plan(std::size_t n);

/// Frequency of FFT bin k for spacing dt, in standard order (0, df, ..., -df).
double fft_frequency(std::size_t k, std::size_t n, double dt);

}  // namespace cslight
