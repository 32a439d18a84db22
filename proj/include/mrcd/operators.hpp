#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mrcd/image.hpp"

namespace mrcd {

/// Band-averaging spectral response: maps an m-band spectrum to fewer output
/// bands. Rows are normalized to sum to one.
class SpectralResponse {
public:
  SpectralResponse(std::size_t out_bands, std::size_t in_bands, std::vector<double> weights);

  std::size_t out_bands() const { return out_bands_; }
  std::size_t in_bands() const { return in_bands_; }
  double at(std::size_t o, std::size_t i) const { return weights_[o * in_bands_ + i]; }
  const std::vector<double>& weights() const { return weights_; }

private:
  std::size_t out_bands_;
  std::size_t in_bands_;
  std::vector<double> weights_;  // row-major out_bands x in_bands
};

/// PAN response: one row averaging the first n_avg of m_bands uniformly.
SpectralResponse make_pan_response(std::size_t m_bands, std::size_t n_avg);

/// MS response: one row per group, uniform within each contiguous band range
/// [begin, end). Groups must be non-empty and within [0, m_bands).
SpectralResponse make_ms_response(std::size_t m_bands,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& groups);

/// Four contiguous near-equal groups spanning all bands.
std::vector<std::pair<std::size_t, std::size_t>> default_ms_groups(std::size_t m_bands);

/// Blur + decimation pair defining the spatial degradation R = B S.
/// The kernel is odd-sized, center-symmetric and normalized to sum one; the
/// blur is a per-band cyclic convolution. Decimation keeps phase (0,0) of
/// every d_r x d_c block.
class SpatialDegradation {
public:
  SpatialDegradation(std::vector<double> kernel, std::size_t kernel_size, std::size_t d_r,
                     std::size_t d_c);

  std::size_t kernel_size() const { return ksize_; }
  std::size_t d_r() const { return d_r_; }
  std::size_t d_c() const { return d_c_; }
  std::size_t block_pixels() const { return d_r_ * d_c_; }
  const std::vector<double>& kernel() const { return kernel_; }

private:
  std::vector<double> kernel_;
  std::size_t ksize_;
  std::size_t d_r_;
  std::size_t d_c_;
};

/// size x size Gaussian kernel with the given standard deviation, sum one.
std::vector<double> make_gaussian_kernel(std::size_t size, double sigma);

/// Per-band diagonal Gaussian noise, reproducible from the seed. Variances of
/// zero are allowed and add nothing.
struct NoiseModel {
  std::vector<double> lambda_hr;  // one variance per HR-image band
  std::vector<double> lambda_lr;  // one variance per LR-image band
  std::uint64_t seed = 0;

  void validate() const;
};

enum class NoiseSide { HR, LR };

/// Everything that relates the latent image to an observed pair: spectral
/// response, spatial degradation, and the per-band noise variances used to
/// weight the data terms.
struct DegradationModel {
  SpectralResponse response;
  SpatialDegradation spatial;
  std::vector<double> lambda_hr;  // variances, length response.out_bands()
  std::vector<double> lambda_lr;  // variances, length response.in_bands()
};

/// Y = L X: combines bands per pixel. Input must have L.in_bands() bands.
ImageCube apply_spectral(const SpectralResponse& response, const ImageCube& x);

/// Per-band cyclic convolution with the kernel. Grid must be at least as
/// large as the kernel in both dimensions.
ImageCube apply_blur(const SpatialDegradation& spatial, const ImageCube& x);

/// Adjoint of apply_blur (convolution with the flipped kernel; identical to
/// apply_blur for the center-symmetric kernels this type enforces).
ImageCube blur_adjoint(const SpatialDegradation& spatial, const ImageCube& x);

/// Keeps one pixel per d_r x d_c block at phase (0,0). Grid dimensions must
/// be divisible by the factors.
ImageCube decimate(const SpatialDegradation& spatial, const ImageCube& x);

/// Adjoint of decimate: zero-fill at non-sampled positions.
ImageCube upsample(const SpatialDegradation& spatial, const ImageCube& x_lr);

/// Adds zero-mean Gaussian noise per band with the side's variance vector.
/// The stream is derived from (seed, side), so HR and LR draws are
/// independent yet reproducible.
ImageCube add_noise(const NoiseModel& noise, const ImageCube& x, NoiseSide side);

}  // namespace mrcd
