#pragma once

#include <complex>

namespace cslight::special {

/// Scaled complex error function w(z) = exp(-z^2) erfc(-i z), for Im z >= 0.
///
/// Weideman's rational expansion (32 terms) inside |z| < 8, Laplace continued
/// fraction outside. Relative accuracy is better than 1e-12 over the upper
/// half plane; see test_faddeeva for the reference table.
std::complex<double> faddeeva(std::complex<double> z);

/// erfcx(x) = exp(x^2) erfc(x) for real x.
double erfcx(double x);

/// Area-normalized Voigt profile: Gaussian of standard deviation sigma
/// convolved with a Lorentzian of half width gamma, V = Re w(z) / (sigma sqrt(2 pi)).
double voigt(double x, double sigma, double gamma);

/// FWHM combination rule for a Voigt profile from its Lorentzian and Gaussian FWHMs.
double voigt_fwhm(double lorentzian_fwhm, double gaussian_fwhm);

/// Inverts voigt_fwhm for the Gaussian FWHM; throws if voigt_fwhm < lorentzian_fwhm.
double gaussian_fwhm_for_voigt(double voigt_fwhm, double lorentzian_fwhm);

}  // namespace cslight::special
