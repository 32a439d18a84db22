#include "mrcd/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "mrcd/stats.hpp"

namespace mrcd {

namespace {

/// Unbiased-enough uniform index in [0, n) from a raw 64-bit draw.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>((static_cast<__uint128_t>(rng()) * n) >> 64);
}

void check_region(const std::vector<std::size_t>& region, std::size_t pixels) {
  if (region.empty()) throw std::invalid_argument("change rule: empty region");
  for (std::size_t p : region) {
    if (p >= pixels) throw std::invalid_argument("change rule: region pixel out of bounds");
  }
}

}  // namespace

ChangeRule parse_change_rule(const std::string& name) {
  if (name == "zero" || name == "zero_abundance") return ChangeRule::zero_abundance;
  if (name == "same" || name == "same_abundance") return ChangeRule::same_abundance;
  if (name == "block" || name == "block_abundance") return ChangeRule::block_abundance;
  throw std::invalid_argument("unknown change rule: " + name);
}

std::string change_rule_name(ChangeRule rule) {
  switch (rule) {
    case ChangeRule::zero_abundance: return "zero_abundance";
    case ChangeRule::same_abundance: return "same_abundance";
    case ChangeRule::block_abundance: return "block_abundance";
  }
  return "?";
}

std::vector<double> apply_change_rule(const std::vector<double>& abundances, std::size_t k,
                                      std::size_t rows, std::size_t cols,
                                      const std::vector<std::size_t>& region, ChangeRule rule,
                                      std::uint64_t seed) {
  const std::size_t n = rows * cols;
  if (abundances.size() != k * n) {
    throw std::invalid_argument("apply_change_rule: abundance matrix shape mismatch");
  }
  check_region(region, n);
  std::vector<double> out = abundances;
  std::mt19937_64 rng(seed);

  switch (rule) {
    case ChangeRule::zero_abundance: {
      if (k < 2) {
        throw std::invalid_argument("zero_abundance: needs at least two endmembers");
      }
      std::size_t dominant = 0;
      double best = -1.0;
      for (std::size_t i = 0; i < k; ++i) {
        double s = 0.0;
        for (std::size_t p : region) s += out[i * n + p];
        if (s > best) {
          best = s;
          dominant = i;
        }
      }
      for (std::size_t p : region) {
        out[dominant * n + p] = 0.0;
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) s += out[i * n + p];
        if (s > 1e-12) {
          for (std::size_t i = 0; i < k; ++i) out[i * n + p] /= s;
        } else {
          // the dominant endmember held the whole pixel; spread uniformly
          const double u = 1.0 / static_cast<double>(k - 1);
          for (std::size_t i = 0; i < k; ++i) out[i * n + p] = (i == dominant) ? 0.0 : u;
        }
      }
      break;
    }
    case ChangeRule::same_abundance: {
      const std::size_t src = uniform_index(rng, n);
      for (std::size_t p : region) {
        for (std::size_t i = 0; i < k; ++i) out[i * n + p] = abundances[i * n + src];
      }
      break;
    }
    case ChangeRule::block_abundance: {
      std::size_t min_i = rows, min_j = cols, max_i = 0, max_j = 0;
      for (std::size_t p : region) {
        auto [i, j] = unflatten_index(p, cols);
        min_i = std::min(min_i, i);
        min_j = std::min(min_j, j);
        max_i = std::max(max_i, i);
        max_j = std::max(max_j, j);
      }
      const std::size_t bh = max_i - min_i + 1;
      const std::size_t bw = max_j - min_j + 1;
      const std::size_t src_i0 = uniform_index(rng, rows - bh + 1);
      const std::size_t src_j0 = uniform_index(rng, cols - bw + 1);
      // read from the pristine input so overlapping source/target stays exact
      for (std::size_t p : region) {
        auto [i, j] = unflatten_index(p, cols);
        const std::size_t src = flatten_index(src_i0 + (i - min_i), src_j0 + (j - min_j), cols);
        for (std::size_t q = 0; q < k; ++q) out[q * n + p] = abundances[q * n + src];
      }
      break;
    }
  }
  return out;
}

ChangeMask build_mask(const std::vector<ChangeRegion>& regions, std::size_t rows,
                      std::size_t cols) {
  ChangeMask mask(rows, cols);
  for (const ChangeRegion& r : regions) {
    for (std::size_t p : r.pixels) {
      if (p >= mask.pixels()) throw std::invalid_argument("build_mask: pixel out of bounds");
      mask.at(p) = 1;
    }
  }
  return mask;
}

ChangeMask degrade_mask(const ChangeMask& d_hr, const SpatialDegradation& spatial) {
  if (d_hr.rows() % spatial.d_r() != 0 || d_hr.cols() % spatial.d_c() != 0) {
    throw std::invalid_argument("degrade_mask: grid dims not divisible by decimation factors");
  }
  const std::size_t mr = d_hr.rows() / spatial.d_r();
  const std::size_t mc = d_hr.cols() / spatial.d_c();
  ChangeMask out(mr, mc);
  for (std::size_t i = 0; i < d_hr.rows(); ++i) {
    for (std::size_t j = 0; j < d_hr.cols(); ++j) {
      if (d_hr.at(i, j)) out.at(i / spatial.d_r(), j / spatial.d_c()) = 1;
    }
  }
  return out;
}

std::vector<std::size_t> random_rectangle_region(std::size_t rows, std::size_t cols,
                                                 std::size_t min_side, std::size_t max_side,
                                                 std::uint64_t seed) {
  if (min_side == 0 || min_side > max_side) {
    throw std::invalid_argument("random_rectangle_region: bad side range");
  }
  if (max_side > rows || max_side > cols) {
    throw std::invalid_argument("random_rectangle_region: sides exceed grid");
  }
  std::mt19937_64 rng(seed);
  const std::size_t span = max_side - min_side + 1;
  const std::size_t h = min_side + uniform_index(rng, span);
  const std::size_t w = min_side + uniform_index(rng, span);
  const std::size_t i0 = uniform_index(rng, rows - h + 1);
  const std::size_t j0 = uniform_index(rng, cols - w + 1);
  std::vector<std::size_t> region;
  region.reserve(h * w);
  for (std::size_t i = i0; i < i0 + h; ++i) {
    for (std::size_t j = j0; j < j0 + w; ++j) region.push_back(flatten_index(i, j, cols));
  }
  return region;
}

SimulatedPair simulate_pair_from_unmix(const UnmixResult& um, std::size_t rows, std::size_t cols,
                                       const ChangeSpec& spec, const DegradationModel& model,
                                       TemporalConfig config, const NoiseModel& noise) {
  const std::size_t n = rows * cols;
  const std::size_t k = um.k;
  const std::size_t bands = um.endmembers.size() / std::max<std::size_t>(k, 1);
  if (um.abundances.size() != k * n) {
    throw std::invalid_argument("simulate_pair: abundance matrix does not match the grid");
  }

  // Apply the rules in order; each draws its own stream off the spec seed.
  std::uint64_t chain = spec.seed;
  std::vector<double> a2 = um.abundances;
  for (const ChangeRegion& region : spec.regions) {
    const std::uint64_t rule_seed = stats::splitmix64(chain);
    a2 = apply_change_rule(a2, k, rows, cols, region.pixels, region.rule, rule_seed);
  }

  SimulatedPair pair;
  pair.config = config;
  pair.x_t1 = reconstruct(um.endmembers, bands, um.abundances, k, rows, cols);
  pair.x_t2 = reconstruct(um.endmembers, bands, a2, k, rows, cols);
  pair.d_hr = build_mask(spec.regions, rows, cols);
  pair.d_lr = degrade_mask(pair.d_hr, model.spatial);

  const ImageCube& spectral_src = (config == TemporalConfig::config1) ? pair.x_t1 : pair.x_t2;
  const ImageCube& spatial_src = (config == TemporalConfig::config1) ? pair.x_t2 : pair.x_t1;
  pair.y_hr = apply_spectral(model.response, spectral_src);
  pair.y_lr = decimate(model.spatial, apply_blur(model.spatial, spatial_src));

  bool any_noise = false;
  for (double v : noise.lambda_hr) any_noise = any_noise || v > 0.0;
  for (double v : noise.lambda_lr) any_noise = any_noise || v > 0.0;
  if (any_noise) {
    pair.y_hr = add_noise(noise, pair.y_hr, NoiseSide::HR);
    pair.y_lr = add_noise(noise, pair.y_lr, NoiseSide::LR);
  }
  return pair;
}

SimulatedPair simulate_pair(const ImageCube& x_ref, const ChangeSpec& spec,
                            const DegradationModel& model, TemporalConfig config,
                            const NoiseModel& noise, std::size_t k) {
  if (k == 0) k = estimate_k(x_ref);
  std::uint64_t chain = spec.seed ^ 0x756e6d6978ULL;  // distinct stream for the unmix step
  const std::uint64_t unmix_seed = stats::splitmix64(chain);
  UnmixResult um = unmix(x_ref, k, unmix_seed);
  return simulate_pair_from_unmix(um, x_ref.rows(), x_ref.cols(), spec, model, config, noise);
}

ImageCube make_synthetic_reference(std::size_t bands, std::size_t rows, std::size_t cols,
                                   std::size_t k, std::uint64_t seed) {
  if (k < 2 || bands < 2) {
    throw std::invalid_argument("make_synthetic_reference: need at least 2 bands and blobs");
  }
  stats::NormalSampler rng(seed);

  // Endmember spectra: smooth positive bumps over the band axis.
  std::vector<double> endmembers(bands * k, 0.0);
  for (std::size_t e = 0; e < k; ++e) {
    const double center = rng.next_uniform() * static_cast<double>(bands - 1);
    const double width = 0.12 * static_cast<double>(bands) * (1.0 + 0.8 * rng.next_uniform());
    const double height = 0.5 + rng.next_uniform();
    const double floor_level = 0.08 + 0.12 * rng.next_uniform();
    for (std::size_t b = 0; b < bands; ++b) {
      const double t = (static_cast<double>(b) - center) / width;
      endmembers[b * k + e] = floor_level + height * std::exp(-0.5 * t * t);
    }
  }

  // Abundance fields: Gaussian blobs sharpened through a softmax so most
  // pixels are strongly dominated by one endmember.
  const std::size_t n = rows * cols;
  std::vector<double> logits(k * n);
  for (std::size_t e = 0; e < k; ++e) {
    const double ci = rng.next_uniform() * static_cast<double>(rows);
    const double cj = rng.next_uniform() * static_cast<double>(cols);
    const double radius =
        (0.15 + 0.25 * rng.next_uniform()) * static_cast<double>(std::min(rows, cols));
    const double gain = 2.5 + 1.5 * rng.next_uniform();
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        const double di = (static_cast<double>(i) - ci) / radius;
        const double dj = (static_cast<double>(j) - cj) / radius;
        logits[e * n + flatten_index(i, j, cols)] = gain * std::exp(-0.5 * (di * di + dj * dj));
      }
    }
  }
  // Blend in per-pixel simplex jitter so the scene carries fine-scale texture
  // like a real acquisition instead of perfectly smooth fields.
  constexpr double kTexture = 0.2;
  std::vector<double> abundances(k * n);
  for (std::size_t p = 0; p < n; ++p) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < k; ++e) mx = std::max(mx, logits[e * n + p]);
    double denom = 0.0;
    for (std::size_t e = 0; e < k; ++e) denom += std::exp(3.0 * (logits[e * n + p] - mx));
    for (std::size_t e = 0; e < k; ++e) {
      abundances[e * n + p] = std::exp(3.0 * (logits[e * n + p] - mx)) / denom;
    }
    double jitter_sum = 0.0;
    std::vector<double> jitter(k);
    for (std::size_t e = 0; e < k; ++e) {
      jitter[e] = std::exp(1.5 * rng.next());
      jitter_sum += jitter[e];
    }
    for (std::size_t e = 0; e < k; ++e) {
      abundances[e * n + p] =
          (1.0 - kTexture) * abundances[e * n + p] + kTexture * jitter[e] / jitter_sum;
    }
  }
  return reconstruct(endmembers, bands, abundances, k, rows, cols);
}

}  // namespace mrcd
