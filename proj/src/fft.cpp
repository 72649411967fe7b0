#include "cslight/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace cslight {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct FftPlan::Impl {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

FftPlan::FftPlan(std::size_t n) : n_(n), impl_(std::make_unique<Impl>()) {
  if (n == 0) throw std::invalid_argument("FFT length must be positive");
  std::lock_guard lock(planner_mutex());
  auto* buf = fftw_alloc_complex(n);
  const int len = static_cast<int>(n);
  impl_->forward = fftw_plan_dft_1d(len, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  impl_->backward = fftw_plan_dft_1d(len, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(buf);
  if (!impl_->forward || !impl_->backward) throw std::runtime_error("FFTW planning failed");
}

FftPlan::~FftPlan() {
  if (!impl_) return;
  std::lock_guard lock(planner_mutex());
  if (impl_->forward) fftw_destroy_plan(impl_->forward);
  if (impl_->backward) fftw_destroy_plan(impl_->backward);
}

FftPlan::FftPlan(FftPlan&&) noexcept = default;
FftPlan& FftPlan::operator=(FftPlan&&) noexcept = default;

void FftPlan::forward(std::span<std::complex<double>> data) const {
  if (data.size() != n_) throw std::invalid_argument("FFT length mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(impl_->forward, p, p);
}

void FftPlan::inverse(std::span<std::complex<double>> data) const {
  if (data.size() != n_) throw std::invalid_argument("FFT length mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(impl_->backward, p, p);
  const double scale = 1.0 / static_cast<double>(n_);
  for (auto& v : data) v *= scale;
}

const FftPlan& fft_plan(std::size_t n) {
  static std::mutex cache_mutex;
  static std::map<std::size_t, std::unique_ptr<FftPlan>> cache;
  std::lock_guard lock(cache_mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlan>(n);
  return *slot;
}

double fft_frequency(std::size_t k, std::size_t n, double dt) {
  const double df = 1.0 / (static_cast<double>(n) * dt);
  const auto half = (n + 1) / 2;
  return k < half ? static_cast<double>(k) * df
                  : (static_cast<double>(k) - static_cast<double>(n)) * df;
}

}  // namespace cslight
