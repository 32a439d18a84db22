#include "mrcd/operators.hpp"

#include <cmath>
#include <stdexcept>

#include "mrcd/kernels.hpp"
#include "mrcd/stats.hpp"

namespace mrcd {

SpectralResponse::SpectralResponse(std::size_t out_bands, std::size_t in_bands,
                                   std::vector<double> weights)
    : out_bands_(out_bands), in_bands_(in_bands), weights_(std::move(weights)) {
  if (out_bands_ == 0 || in_bands_ == 0) {
    throw std::invalid_argument("SpectralResponse: band counts must be positive");
  }
  if (out_bands_ > in_bands_) {
    throw std::invalid_argument("SpectralResponse: output bands must not exceed input bands");
  }
  if (weights_.size() != out_bands_ * in_bands_) {
    throw std::invalid_argument("SpectralResponse: weight size mismatch");
  }
  for (std::size_t o = 0; o < out_bands_; ++o) {
    double sum = 0.0;
    for (std::size_t i = 0; i < in_bands_; ++i) {
      double w = weights_[o * in_bands_ + i];
      if (!(w >= 0.0)) throw std::invalid_argument("SpectralResponse: negative weight");
      sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-6) {
      throw std::invalid_argument("SpectralResponse: row " + std::to_string(o) +
                                  " does not sum to 1");
    }
    // renormalize exactly so adjoint identities are tight
    for (std::size_t i = 0; i < in_bands_; ++i) weights_[o * in_bands_ + i] /= sum;
  }
}

SpectralResponse make_pan_response(std::size_t m_bands, std::size_t n_avg) {
  if (n_avg == 0 || n_avg > m_bands) {
    throw std::invalid_argument("make_pan_response: n_avg must lie in [1, m_bands]");
  }
  std::vector<double> w(m_bands, 0.0);
  for (std::size_t i = 0; i < n_avg; ++i) w[i] = 1.0 / static_cast<double>(n_avg);
  return SpectralResponse(1, m_bands, std::move(w));
}

SpectralResponse make_ms_response(
    std::size_t m_bands, const std::vector<std::pair<std::size_t, std::size_t>>& groups) {
  if (groups.empty()) throw std::invalid_argument("make_ms_response: no groups");
  std::vector<double> w(groups.size() * m_bands, 0.0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto [begin, end] = groups[g];
    if (begin >= end) throw std::invalid_argument("make_ms_response: empty group");
    if (end > m_bands) throw std::invalid_argument("make_ms_response: group exceeds band count");
    const double weight = 1.0 / static_cast<double>(end - begin);
    for (std::size_t i = begin; i < end; ++i) w[g * m_bands + i] = weight;
  }
  return SpectralResponse(groups.size(), m_bands, std::move(w));
}

std::vector<std::pair<std::size_t, std::size_t>> default_ms_groups(std::size_t m_bands) {
  if (m_bands < 4) throw std::invalid_argument("default_ms_groups: need at least 4 bands");
  std::vector<std::pair<std::size_t, std::size_t>> groups(4);
  for (std::size_t g = 0; g < 4; ++g) {
    groups[g] = {m_bands * g / 4, m_bands * (g + 1) / 4};
  }
  return groups;
}

SpatialDegradation::SpatialDegradation(std::vector<double> kernel, std::size_t kernel_size,
                                       std::size_t d_r, std::size_t d_c)
    : kernel_(std::move(kernel)), ksize_(kernel_size), d_r_(d_r), d_c_(d_c) {
  if (ksize_ == 0 || ksize_ % 2 == 0) {
    throw std::invalid_argument("SpatialDegradation: kernel size must be odd");
  }
  if (kernel_.size() != ksize_ * ksize_) {
    throw std::invalid_argument("SpatialDegradation: kernel size mismatch");
  }
  if (d_r_ == 0 || d_c_ == 0) {
    throw std::invalid_argument("SpatialDegradation: decimation factors must be positive");
  }
  double sum = 0.0;
  for (double v : kernel_) {
    if (!std::isfinite(v)) throw std::invalid_argument("SpatialDegradation: non-finite kernel");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-6 || sum <= 0.0) {
    throw std::invalid_argument("SpatialDegradation: kernel must sum to 1");
  }
  const std::size_t n = ksize_ * ksize_;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::fabs(kernel_[i] - kernel_[n - 1 - i]) > 1e-9) {
      throw std::invalid_argument("SpatialDegradation: kernel must be center-symmetric");
    }
  }
  for (double& v : kernel_) v /= sum;
}

std::vector<double> make_gaussian_kernel(std::size_t size, double sigma) {
  if (size == 0 || size % 2 == 0) {
    throw std::invalid_argument("make_gaussian_kernel: size must be odd");
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("make_gaussian_kernel: sigma must be positive");
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(size) / 2;
  std::vector<double> k(size * size);
  double sum = 0.0;
  for (std::ptrdiff_t i = -h; i <= h; ++i) {
    for (std::ptrdiff_t j = -h; j <= h; ++j) {
      double v = std::exp(-0.5 * (static_cast<double>(i * i + j * j)) / (sigma * sigma));
      k[(i + h) * static_cast<std::ptrdiff_t>(size) + (j + h)] = v;
      sum += v;
    }
  }
  for (double& v : k) v /= sum;
  return k;
}

void NoiseModel::validate() const {
  for (double v : lambda_hr) {
    if (!(v >= 0.0)) throw std::invalid_argument("NoiseModel: negative HR variance");
  }
  for (double v : lambda_lr) {
    if (!(v >= 0.0)) throw std::invalid_argument("NoiseModel: negative LR variance");
  }
}

ImageCube apply_spectral(const SpectralResponse& response, const ImageCube& x) {
  if (x.bands() != response.in_bands()) {
    throw std::invalid_argument("apply_spectral: cube has " + std::to_string(x.bands()) +
                                " bands, response expects " +
                                std::to_string(response.in_bands()));
  }
  ImageCube out(response.out_bands(), x.rows(), x.cols());
  const std::size_t n = x.pixels();
  for (std::size_t o = 0; o < response.out_bands(); ++o) {
    double* dst = out.band(o);
    for (std::size_t i = 0; i < response.in_bands(); ++i) {
      const double w = response.at(o, i);
      if (w != 0.0) kernels::axpy(dst, w, x.band(i), n);
    }
  }
  return out;
}

namespace {

ImageCube convolve_all_bands(const std::vector<double>& kernel, std::size_t ksize,
                             const ImageCube& x) {
  if (x.rows() < ksize || x.cols() < ksize) {
    throw std::invalid_argument("apply_blur: grid smaller than kernel");
  }
  ImageCube out(x.bands(), x.rows(), x.cols());
  for (std::size_t b = 0; b < x.bands(); ++b) {
    kernels::conv2d_circular(x.band(b), out.band(b), x.rows(), x.cols(), kernel.data(), ksize);
  }
  return out;
}

}  // namespace

ImageCube apply_blur(const SpatialDegradation& spatial, const ImageCube& x) {
  return convolve_all_bands(spatial.kernel(), spatial.kernel_size(), x);
}

ImageCube blur_adjoint(const SpatialDegradation& spatial, const ImageCube& x) {
  const std::size_t n = spatial.kernel().size();
  std::vector<double> flipped(n);
  for (std::size_t i = 0; i < n; ++i) flipped[i] = spatial.kernel()[n - 1 - i];
  return convolve_all_bands(flipped, spatial.kernel_size(), x);
}

ImageCube decimate(const SpatialDegradation& spatial, const ImageCube& x) {
  if (spatial.d_r() == 1 && spatial.d_c() == 1) return x;
  if (x.rows() % spatial.d_r() != 0 || x.cols() % spatial.d_c() != 0) {
    throw std::invalid_argument("decimate: grid dims not divisible by decimation factors");
  }
  const std::size_t mr = x.rows() / spatial.d_r();
  const std::size_t mc = x.cols() / spatial.d_c();
  ImageCube out(x.bands(), mr, mc);
  for (std::size_t b = 0; b < x.bands(); ++b) {
    const double* src = x.band(b);
    double* dst = out.band(b);
    for (std::size_t i = 0; i < mr; ++i) {
      const double* src_row = src + (i * spatial.d_r()) * x.cols();
      for (std::size_t j = 0; j < mc; ++j) dst[i * mc + j] = src_row[j * spatial.d_c()];
    }
  }
  return out;
}

ImageCube upsample(const SpatialDegradation& spatial, const ImageCube& x_lr) {
  if (spatial.d_r() == 1 && spatial.d_c() == 1) return x_lr;
  const std::size_t nr = x_lr.rows() * spatial.d_r();
  const std::size_t nc = x_lr.cols() * spatial.d_c();
  ImageCube out(x_lr.bands(), nr, nc);  // zero-initialized
  for (std::size_t b = 0; b < x_lr.bands(); ++b) {
    const double* src = x_lr.band(b);
    double* dst = out.band(b);
    for (std::size_t i = 0; i < x_lr.rows(); ++i) {
      double* dst_row = dst + (i * spatial.d_r()) * nc;
      for (std::size_t j = 0; j < x_lr.cols(); ++j) {
        dst_row[j * spatial.d_c()] = src[i * x_lr.cols() + j];
      }
    }
  }
  return out;
}

ImageCube add_noise(const NoiseModel& noise, const ImageCube& x, NoiseSide side) {
  noise.validate();
  const std::vector<double>& lambda = (side == NoiseSide::HR) ? noise.lambda_hr : noise.lambda_lr;
  if (lambda.size() != x.bands()) {
    throw std::invalid_argument("add_noise: variance vector length " +
                                std::to_string(lambda.size()) + " does not match band count " +
                                std::to_string(x.bands()));
  }
  // Independent streams for the two sides of one model.
  std::uint64_t state = noise.seed ^ (side == NoiseSide::HR ? 0x4852ULL : 0x4c52ULL);
  std::uint64_t stream_seed = stats::splitmix64(state);
  stats::NormalSampler sampler(stream_seed);

  ImageCube out = x;
  const std::size_t n = x.pixels();
  for (std::size_t b = 0; b < x.bands(); ++b) {
    if (lambda[b] == 0.0) {
      // keep the stream position independent of variance values
      for (std::size_t p = 0; p < n; ++p) sampler.next();
      continue;
    }
    const double sd = std::sqrt(lambda[b]);
    double* row = out.band(b);
    for (std::size_t p = 0; p < n; ++p) row[p] += sd * sampler.next();
  }
  return out;
}

}  // namespace mrcd
