#pragma once

#include <cmath>
#include <stdexcept>

namespace specshare {

// Gaussians are parameterized by mean and precision S = 1/variance throughout.
double gauss_pdf(double x, double mu, double S);
double log_gauss_pdf(double x, double mu, double S);
double gauss_cdf(double x, double mu, double S);

// log P(T > tau) for T ~ Poisson(nu). Stable deep into the right tail, where
// the survival itself underflows a double.
double log_poisson_sf(double tau, double nu);
double poisson_cdf(double tau, double nu);

double digamma(double x);

// Recursive adaptive Simpson. Sets *converged to false when the depth cap is
// hit before the tolerance is met.
namespace detail {
inline double simpson_step(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adaptive_simpson_rec(const F& f, double a, double fa, double b, double fb, double m,
                            double fm, double whole, double tol, int depth, bool* converged) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson_step(a, fa, m, fm, flm);
  double right = simpson_step(m, fm, b, fb, frm);
  double delta = left + right - whole;
  if (std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0) {
    *converged = false;
    return left + right;
  }
  return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, converged) +
         adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, converged);
}
}  // namespace detail

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double tol, int max_depth, bool* converged) {
  *converged = true;
  if (a >= b) return 0.0;
  double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  double whole = detail::simpson_step(a, fa, b, fb, fm);
  return detail::adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, max_depth, converged);
}

}  // namespace specshare
