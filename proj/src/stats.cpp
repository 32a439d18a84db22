#include "mrcd/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mrcd::stats {

namespace {

constexpr int kMaxIter = 500;
constexpr double kEps = 1e-15;

// Series expansion of P(a, x); converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < kMaxIter; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x); converges quickly for x >= a + 1.
double gamma_q_contfrac(double a, double x) {
  const double fpmin = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
  if (a <= 0.0) throw std::invalid_argument("gamma_p: a must be positive");
  if (x < 0.0) throw std::invalid_argument("gamma_p: x must be nonnegative");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

double gamma_q(double a, double x) {
  if (a <= 0.0) throw std::invalid_argument("gamma_q: a must be positive");
  if (x < 0.0) throw std::invalid_argument("gamma_q: x must be nonnegative");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_contfrac(a, x);
}

double chi2_cdf(std::size_t k, double x) {
  if (k == 0) throw std::invalid_argument("chi2_cdf: dof must be positive");
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * static_cast<double>(k), 0.5 * x);
}

double chi2_sf(std::size_t k, double x) {
  if (k == 0) throw std::invalid_argument("chi2_sf: dof must be positive");
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * static_cast<double>(k), 0.5 * x);
}

double chi2_quantile_upper(std::size_t k, double pfa) {
  if (k == 0) throw std::invalid_argument("chi2_quantile_upper: dof must be positive");
  if (!(pfa > 0.0 && pfa < 1.0)) {
    throw std::invalid_argument("chi2_quantile_upper: pfa must lie in (0, 1)");
  }
  const double kk = static_cast<double>(k);

  // Wilson-Hilferty starting point, then Newton on the survival function with
  // a bisection bracket as safety net.
  double z;
  {
    // Rational approximation of the standard normal upper quantile
    // (Abramowitz & Stegun 26.2.23, |error| < 4.5e-4), refined by Newton below.
    double p = pfa;
    bool flip = false;
    if (p > 0.5) {
      p = 1.0 - p;
      flip = true;
    }
    double t = std::sqrt(-2.0 * std::log(p));
    z = t - (2.515517 + 0.802853 * t + 0.010328 * t * t) /
                (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    if (flip) z = -z;
  }
  double wh = 1.0 - 2.0 / (9.0 * kk) + z * std::sqrt(2.0 / (9.0 * kk));
  double x = kk * wh * wh * wh;
  if (!(x > 0.0)) x = kk;

  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    double sf = chi2_sf(k, x);
    double diff = sf - pfa;
    if (std::fabs(diff) < 1e-14 * pfa + 1e-300) break;
    if (diff > 0.0) {
      lo = x;  // sf too large -> x too small
    } else {
      hi = x;
    }
    // chi2 pdf at x
    double logpdf = -0.5 * x + (0.5 * kk - 1.0) * std::log(x) - std::lgamma(0.5 * kk) -
                    0.5 * kk * std::log(2.0);
    double pdf = std::exp(logpdf);
    double step = (pdf > 0.0) ? diff / pdf : 0.0;
    double xn = x + step;  // sf' = -pdf, Newton: x - (sf-pfa)/(-pdf)
    if (!(xn > lo) || !(xn < hi) || pdf == 0.0) {
      xn = std::isinf(hi) ? 2.0 * x : 0.5 * (lo + hi);
    }
    if (std::fabs(xn - x) < 1e-14 * std::fabs(x)) {
      x = xn;
      break;
    }
    x = xn;
  }
  return x;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double NormalSampler::next_uniform() {
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

double NormalSampler::next() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] so the log is finite.
  double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace mrcd::stats
