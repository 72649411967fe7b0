#include "cslight/faddeeva.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cslight::special {

namespace {

constexpr int weideman_terms = 32;
constexpr double inv_sqrt_pi = 0.56418958354775628695;

struct WeidemanCoefficients {
  double scale = 0.0;
  std::array<double, weideman_terms> a{};  // highest power first, for Horner

  WeidemanCoefficients() {
    constexpr int m = 2 * weideman_terms;
    constexpr int m2 = 2 * m;
    scale = std::sqrt(weideman_terms / std::sqrt(2.0));
    // f sampled on t = L tan(theta/2), theta = k pi / M, k = -M+1..M-1, padded
    // with a leading zero; a_n are the cosine coefficients of that sequence.
    std::array<double, m2> f{};
    for (int k = -m + 1; k <= m - 1; ++k) {
      const double theta = k * M_PI / m;
      const double t = scale * std::tan(0.5 * theta);
      f[static_cast<std::size_t>(k + m)] = std::exp(-t * t) * (scale * scale + t * t);
    }
    // fftshift of [0, f...] places index M at position 0.
    std::array<double, m2> shifted{};
    for (int i = 0; i < m2; ++i) shifted[static_cast<std::size_t>(i)] = f[static_cast<std::size_t>((i + m) % m2)];
    for (int n = 1; n <= weideman_terms; ++n) {
      double acc = 0.0;
      for (int j = 0; j < m2; ++j) acc += shifted[static_cast<std::size_t>(j)] * std::cos(2.0 * M_PI * n * j / m2);
      a[static_cast<std::size_t>(weideman_terms - n)] = acc / m2;
    }
  }
};

const WeidemanCoefficients& coefficients() {
  static const WeidemanCoefficients c;
  return c;
}

std::complex<double> weideman(std::complex<double> z) {
  const auto& c = coefficients();
  const std::complex<double> i(0.0, 1.0);
  const std::complex<double> denom = c.scale - i * z;
  const std::complex<double> zz = (c.scale + i * z) / denom;
  std::complex<double> p = 0.0;
  for (double coeff : c.a) p = p * zz + coeff;
  return 2.0 * p / (denom * denom) + inv_sqrt_pi / denom;
}

std::complex<double> continued_fraction(std::complex<double> z) {
  // w(z) = (i/sqrt(pi)) / (z - (1/2)/(z - 1/(z - (3/2)/(z - ...))))
  constexpr int depth = 40;
  std::complex<double> tail = z;
  for (int k = depth; k >= 1; --k) tail = z - (0.5 * k) / tail;
  return std::complex<double>(0.0, inv_sqrt_pi) / tail;
}

}  // namespace

std::complex<double> faddeeva(std::complex<double> z) {
  if (z.imag() < 0.0) {
    // Not needed by the line-shape code; reflection keeps the function total.
    const std::complex<double> zc = -z;
    return 2.0 * std::exp(-zc * zc) - faddeeva(zc);
  }
  if (std::abs(z) > 8.0) return continued_fraction(z);
  return weideman(z);
}

double erfcx(double x) {
  if (x < 0.0) {
    if (x < -26.0) return std::numeric_limits<double>::infinity();
    return 2.0 * std::exp(x * x) - erfcx(-x);
  }
  if (x < 0.5) return std::exp(x * x) * std::erfc(x);
  return faddeeva(std::complex<double>(0.0, x)).real();
}

double voigt(double x, double sigma, double gamma) {
  if (sigma <= 0.0) {
    if (gamma <= 0.0) throw std::invalid_argument("voigt needs sigma > 0 or gamma > 0");
    return gamma / (M_PI * (x * x + gamma * gamma));
  }
  const std::complex<double> z(x / (sigma * M_SQRT2), gamma / (sigma * M_SQRT2));
  return faddeeva(z).real() / (sigma * std::sqrt(2.0 * M_PI));
}

double voigt_fwhm(double lorentzian_fwhm, double gaussian_fwhm) {
  return 0.5346 * lorentzian_fwhm +
         std::sqrt(0.2166 * lorentzian_fwhm * lorentzian_fwhm + gaussian_fwhm * gaussian_fwhm);
}

double gaussian_fwhm_for_voigt(double target, double lorentzian_fwhm) {
  const double lin = target - 0.5346 * lorentzian_fwhm;
  const double g2 = lin * lin - 0.2166 * lorentzian_fwhm * lorentzian_fwhm;
  if (lin < 0.0 || g2 < 0.0) throw std::invalid_argument("Voigt FWHM smaller than its Lorentzian part");
  return std::sqrt(g2);
}

}  // namespace cslight::special
