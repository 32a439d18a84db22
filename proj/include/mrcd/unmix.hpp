#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mrcd/image.hpp"

namespace mrcd {

/// Linear mixing decomposition X ~= M A with nonnegative abundances summing
/// to one per pixel.
struct UnmixResult {
  std::size_t k = 0;
  std::vector<double> endmembers;  // bands x k, row-major
  std::vector<double> abundances;  // k x pixels, row-major
  std::vector<std::size_t> endmember_pixels;  // data columns the endmembers came from
};

/// Smallest K whose leading principal components capture at least
/// energy_fraction of the data energy (squared singular values of the data
/// matrix). Throws on constant (zero-variance) cubes.
std::size_t estimate_k(const ImageCube& x, double energy_fraction = 0.999);

/// Vertex component analysis: projects onto the K-dimensional signal
/// subspace, then repeatedly picks the pixel with the largest |projection|
/// onto a seeded random direction orthogonal to the endmembers selected so
/// far (the first pick maximizes the subspace projection norm). Returns the
/// selected data columns.
/// Deterministic for a fixed seed.
UnmixResult vca(const ImageCube& x, std::size_t k, std::uint64_t seed);

/// Fully constrained least squares: per pixel, argmin ||x_p - M a||_2 with
/// a >= 0 and sum(a) = 1, by an active-set method with the sum-to-one handled
/// as an exact equality. M is bands x k, row-major, full column rank.
std::vector<double> fcls(const ImageCube& x, const std::vector<double>& endmembers,
                         std::size_t k);

/// Single-pixel variant; x_p has `bands` entries.
std::vector<double> fcls_pixel(const double* x_p, std::size_t bands,
                               const std::vector<double>& endmembers, std::size_t k);

/// X = M A on an explicit spatial grid.
ImageCube reconstruct(const std::vector<double>& endmembers, std::size_t bands,
                      const std::vector<double>& abundances, std::size_t k, std::size_t rows,
                      std::size_t cols);

/// VCA + FCLS in one call.
UnmixResult unmix(const ImageCube& x, std::size_t k, std::uint64_t seed);

}  // namespace mrcd
