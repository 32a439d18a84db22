#pragma once

#include <cstdint>
#include <random>

namespace mrcd::stats {

/// Lower regularized incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
double gamma_p(double a, double x);

/// Upper regularized incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

/// Chi-square CDF with k degrees of freedom.
double chi2_cdf(std::size_t k, double x);

/// Chi-square survival function P[X > x].
double chi2_sf(std::size_t k, double x);

/// Upper-tail quantile: the threshold t with P[X > t] = pfa for X ~ chi2_k.
/// Throws std::invalid_argument for pfa outside (0, 1) or k == 0.
double chi2_quantile_upper(std::size_t k, double pfa);

/// splitmix64 step; used to derive independent stream seeds from a master seed.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seeded standard-normal sampler. Box-Muller over mt19937_64 so that output
/// is identical across standard library implementations.
class NormalSampler {
public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double next();

  /// Uniform on [0, 1).
  double next_uniform();

  std::mt19937_64& engine() { return rng_; }

private:
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mrcd::stats
