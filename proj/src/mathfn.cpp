#include "specshare/mathfn.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace specshare {

double gauss_pdf(double x, double mu, double S) {
  double d = x - mu;
  return std::sqrt(S / (2.0 * M_PI)) * std::exp(-0.5 * S * d * d);
}

double log_gauss_pdf(double x, double mu, double S) {
  double d = x - mu;
  return 0.5 * std::log(S / (2.0 * M_PI)) - 0.5 * S * d * d;
}

double gauss_cdf(double x, double mu, double S) {
  return 0.5 * std::erfc(-(x - mu) * std::sqrt(0.5 * S));
}

double poisson_cdf(double tau, double nu) {
  if (tau < 0) return 0.0;
  // sum_{i<=tau} e^-nu nu^i/i! = Q(tau+1, nu)
  return boost::math::gamma_q(std::floor(tau) + 1.0, nu);
}

double log_poisson_sf(double tau, double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("log_poisson_sf: nu must be positive");
  if (tau < 0) return 0.0;
  double a = std::floor(tau) + 1.0;  // P(T > tau) = regularized lower gamma P(a, nu)
  if (nu >= a) return std::log(boost::math::gamma_p(a, nu));
  // Right tail: P(a, x) = x^a e^-x / Gamma(a+1) * sum_n x^n / prod_{m<=n}(a+m),
  // evaluated in log space so the result stays finite long after the survival
  // probability underflows.
  double term = 1.0, sum = 1.0;
  for (int n = 1; n < 100000; ++n) {
    term *= nu / (a + static_cast<double>(n));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return a * std::log(nu) - nu - std::lgamma(a + 1.0) + std::log(sum);
}

double digamma(double x) { return boost::math::digamma(x); }

}  // namespace specshare
