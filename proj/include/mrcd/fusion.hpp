#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "mrcd/image.hpp"
#include "mrcd/operators.hpp"

namespace mrcd {

/// The MAP inverse problem: recover the pseudo-latent high-resolution
/// hyperspectral image jointly explaining a spectrally degraded HR observation
/// and a spatially degraded LR observation, under per-band Gaussian noise and
/// a Gaussian prior centered on prior_mean.
struct FusionProblem {
  ImageCube y_hr;  // response.out_bands() x HR grid
  ImageCube y_lr;  // response.in_bands() x LR grid
  SpectralResponse response;
  SpatialDegradation spatial;
  std::vector<double> lambda_hr;  // per-band noise variances, > 0
  std::vector<double> lambda_lr;
  double lambda_reg = 1e-4;                   // regularization weight, >= 0
  std::optional<ImageCube> prior_mean = {};   // defaults to an interpolation of y_lr

  void validate() const;
  std::size_t latent_bands() const { return response.in_bands(); }
};

struct FusionConfig {
  std::size_t max_iter = 500;
  double tol = 1e-6;  // relative gradient-norm tolerance
};

struct FusionResult {
  ImageCube x_hat;
  std::vector<double> objective_trace;  // objective at x0 and after each iteration
  std::size_t iterations = 0;
  bool converged = false;
};

/// Negative log-posterior (up to the constant):
/// 1/2 ||Lam_HR^{-1/2}(Y_HR - L X)||_F^2 + 1/2 ||Lam_LR^{-1/2}(Y_LR - X B S)||_F^2
/// + lambda_reg/2 ||X - prior_mean||_F^2.
double objective(const FusionProblem& p, const ImageCube& x);

/// Analytic gradient of `objective` with respect to X; same shape as X.
ImageCube objective_gradient(const FusionProblem& p, const ImageCube& x);

/// Prior center used when prior_mean is unset: zero-interpolation of y_lr to
/// the HR grid through the blur adjoint, weight-normalized per pixel; pixels
/// with no kernel support fall back to the per-band mean of y_lr.
ImageCube default_prior_mean(const FusionProblem& p);

/// Preconditioned conjugate gradient on the normal equations, operator-form
/// products throughout. Throws if the objective turns non-finite.
FusionResult fuse(const FusionProblem& p, const FusionConfig& cfg = {});

}  // namespace mrcd
