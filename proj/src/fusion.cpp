#include "mrcd/fusion.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "mrcd/kernels.hpp"

namespace mrcd {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_positive(const std::vector<double>& v, const char* name) {
  for (double x : v) {
    if (!(x > 0.0)) {
      throw std::invalid_argument(std::string("FusionProblem: ") + name +
                                  " variances must be positive");
    }
  }
}

/// L^T applied to an out_bands() cube.
ImageCube spectral_adjoint(const SpectralResponse& response, const ImageCube& r) {
  ImageCube out(response.in_bands(), r.rows(), r.cols());
  const std::size_t n = r.pixels();
  for (std::size_t o = 0; o < response.out_bands(); ++o) {
    const double* src = r.band(o);
    for (std::size_t i = 0; i < response.in_bands(); ++i) {
      const double w = response.at(o, i);
      if (w != 0.0) kernels::axpy(out.band(i), w, src, n);
    }
  }
  return out;
}

void scale_bands_inplace(ImageCube& x, const std::vector<double>& inv_weights) {
  const std::size_t n = x.pixels();
  for (std::size_t b = 0; b < x.bands(); ++b) {
    double* row = x.band(b);
    const double w = inv_weights[b];
    for (std::size_t p = 0; p < n; ++p) row[p] *= w;
  }
}

ImageCube forward_lr(const FusionProblem& p, const ImageCube& x) {
  return decimate(p.spatial, apply_blur(p.spatial, x));
}

ImageCube adjoint_lr(const FusionProblem& p, const ImageCube& r_lr) {
  return blur_adjoint(p.spatial, upsample(p.spatial, r_lr));
}

std::vector<double> inverted(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = 1.0 / v[i];
  return out;
}

// x -= y, returning x by value would copy; mutate in place.
void sub_inplace(ImageCube& x, const ImageCube& y) {
  for (std::size_t i = 0; i < x.data().size(); ++i) x.data()[i] -= y.data()[i];
}

double weighted_residual_energy(const ImageCube& obs, const ImageCube& model,
                                const std::vector<double>& lambda) {
  const std::size_t n = obs.pixels();
  double acc = 0.0;
  std::vector<double> diff(n);
  for (std::size_t b = 0; b < obs.bands(); ++b) {
    const double* a = obs.band(b);
    const double* m = model.band(b);
    for (std::size_t p = 0; p < n; ++p) diff[p] = a[p] - m[p];
    acc += kernels::sumsq(diff.data(), n) / lambda[b];
  }
  return 0.5 * acc;
}

}  // namespace

void FusionProblem::validate() const {
  if (y_hr.bands() != response.out_bands()) {
    throw std::invalid_argument("FusionProblem: y_hr band count does not match the response");
  }
  if (y_lr.bands() != response.in_bands()) {
    throw std::invalid_argument("FusionProblem: y_lr band count does not match the response");
  }
  if (y_hr.rows() != y_lr.rows() * spatial.d_r() || y_hr.cols() != y_lr.cols() * spatial.d_c()) {
    throw std::invalid_argument("FusionProblem: grids inconsistent with the decimation factors");
  }
  if (lambda_hr.size() != y_hr.bands() || lambda_lr.size() != y_lr.bands()) {
    throw std::invalid_argument("FusionProblem: variance vector lengths do not match band counts");
  }
  check_positive(lambda_hr, "HR");
  check_positive(lambda_lr, "LR");
  if (!(lambda_reg >= 0.0)) {
    throw std::invalid_argument("FusionProblem: lambda_reg must be nonnegative");
  }
  if (prior_mean) {
    if (prior_mean->bands() != latent_bands() || prior_mean->rows() != y_hr.rows() ||
        prior_mean->cols() != y_hr.cols()) {
      throw std::invalid_argument("FusionProblem: prior_mean shape mismatch");
    }
  }
}

ImageCube default_prior_mean(const FusionProblem& p) {
  // Numerator: zero-interpolated y_lr pushed through the blur adjoint.
  ImageCube num = adjoint_lr(p, p.y_lr);
  // Weight: same transport applied to an all-ones LR image.
  ImageCube ones(1, p.y_lr.rows(), p.y_lr.cols());
  for (double& v : ones.data()) v = 1.0;
  ImageCube weight = adjoint_lr(p, ones);

  std::vector<double> band_mean(p.y_lr.bands(), 0.0);
  for (std::size_t b = 0; b < p.y_lr.bands(); ++b) {
    const double* row = p.y_lr.band(b);
    double s = 0.0;
    for (std::size_t q = 0; q < p.y_lr.pixels(); ++q) s += row[q];
    band_mean[b] = s / static_cast<double>(p.y_lr.pixels());
  }

  const std::size_t n = num.pixels();
  for (std::size_t b = 0; b < num.bands(); ++b) {
    double* row = num.band(b);
    const double* w = weight.band(0);
    for (std::size_t q = 0; q < n; ++q) {
      row[q] = (w[q] > 1e-12) ? row[q] / w[q] : band_mean[b];
    }
  }
  return num;
}

double objective(const FusionProblem& p, const ImageCube& x) {
  p.validate();
  if (x.bands() != p.latent_bands() || x.rows() != p.y_hr.rows() || x.cols() != p.y_hr.cols()) {
    throw std::invalid_argument("objective: x shape mismatch");
  }
  double value = weighted_residual_energy(p.y_hr, apply_spectral(p.response, x), p.lambda_hr) +
                 weighted_residual_energy(p.y_lr, forward_lr(p, x), p.lambda_lr);
  if (p.lambda_reg > 0.0) {
    const ImageCube xbar = p.prior_mean ? *p.prior_mean : default_prior_mean(p);
    std::vector<double> diff(x.data().size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = x.data()[i] - xbar.data()[i];
    value += 0.5 * p.lambda_reg * kernels::sumsq(diff.data(), diff.size());
  }
  return value;
}

ImageCube objective_gradient(const FusionProblem& p, const ImageCube& x) {
  p.validate();
  if (x.bands() != p.latent_bands() || x.rows() != p.y_hr.rows() || x.cols() != p.y_hr.cols()) {
    throw std::invalid_argument("objective_gradient: x shape mismatch");
  }
  const std::vector<double> w_hr = inverted(p.lambda_hr);
  const std::vector<double> w_lr = inverted(p.lambda_lr);

  ImageCube r_hr = apply_spectral(p.response, x);
  sub_inplace(r_hr, p.y_hr);          // L x - y_hr
  scale_bands_inplace(r_hr, w_hr);    // Lam_HR^{-1} (L x - y_hr)
  ImageCube grad = spectral_adjoint(p.response, r_hr);

  ImageCube r_lr = forward_lr(p, x);
  sub_inplace(r_lr, p.y_lr);
  scale_bands_inplace(r_lr, w_lr);
  ImageCube g_lr = adjoint_lr(p, r_lr);
  for (std::size_t i = 0; i < grad.data().size(); ++i) grad.data()[i] += g_lr.data()[i];

  if (p.lambda_reg > 0.0) {
    const ImageCube xbar = p.prior_mean ? *p.prior_mean : default_prior_mean(p);
    for (std::size_t i = 0; i < grad.data().size(); ++i) {
      grad.data()[i] += p.lambda_reg * (x.data()[i] - xbar.data()[i]);
    }
  }
  return grad;
}

FusionResult fuse(const FusionProblem& p, const FusionConfig& cfg) {
  p.validate();
  const std::size_t mb = p.latent_bands();
  const std::size_t n = p.y_hr.pixels();
  const std::size_t total = mb * n;
  const std::vector<double> w_hr = inverted(p.lambda_hr);
  const std::vector<double> w_lr = inverted(p.lambda_lr);
  const ImageCube xbar = p.prior_mean ? *p.prior_mean : default_prior_mean(p);

  // Pin the prior center so per-iteration objective evaluations reuse it.
  FusionProblem pinned = p;
  pinned.prior_mean = xbar;

  // Normal-equation operator A(X) = L^T W_HR L X + W_LR X (B S S^T B^T) + reg X.
  auto apply_A = [&](const ImageCube& v) {
    ImageCube hv = apply_spectral(p.response, v);
    scale_bands_inplace(hv, w_hr);
    ImageCube out = spectral_adjoint(p.response, hv);

    ImageCube lv = forward_lr(p, v);
    scale_bands_inplace(lv, w_lr);
    ImageCube back = adjoint_lr(p, lv);
    for (std::size_t i = 0; i < total; ++i) out.data()[i] += back.data()[i];

    if (p.lambda_reg > 0.0) kernels::axpy(out.data().data(), p.lambda_reg, v.data().data(), total);
    return out;
  };

  // Right-hand side b = L^T W_HR Y_HR + (W_LR Y_LR) S^T B^T + reg * xbar.
  ImageCube b = [&] {
    ImageCube yh = p.y_hr;
    scale_bands_inplace(yh, w_hr);
    ImageCube out = spectral_adjoint(p.response, yh);
    ImageCube yl = p.y_lr;
    scale_bands_inplace(yl, w_lr);
    ImageCube back = adjoint_lr(p, yl);
    for (std::size_t i = 0; i < total; ++i) out.data()[i] += back.data()[i];
    if (p.lambda_reg > 0.0) {
      kernels::axpy(out.data().data(), p.lambda_reg, xbar.data().data(), total);
    }
    return out;
  }();

  // Band-space block-Jacobi preconditioner:
  // P = L^T W_HR L + (||k||^2 / d) W_LR + reg I, applied per pixel column.
  Eigen::LLT<Eigen::MatrixXd> precond;
  {
    Eigen::MatrixXd L(p.response.out_bands(), mb);
    for (std::size_t o = 0; o < p.response.out_bands(); ++o) {
      for (std::size_t i = 0; i < mb; ++i) L(o, i) = p.response.at(o, i);
    }
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(mb, mb);
    for (std::size_t o = 0; o < p.response.out_bands(); ++o) {
      P += w_hr[o] * (L.row(o).transpose() * L.row(o));
    }
    const double ksq =
        kernels::sumsq(p.spatial.kernel().data(), p.spatial.kernel().size());
    const double alpha = ksq / static_cast<double>(p.spatial.block_pixels());
    for (std::size_t i = 0; i < mb; ++i) P(i, i) += alpha * w_lr[i] + p.lambda_reg;
    // spectral rows can repeat; nudge so LLT always succeeds
    P.diagonal().array() += 1e-14 * P.trace() / static_cast<double>(mb);
    precond.compute(P);
    if (precond.info() != Eigen::Success) {
      throw std::runtime_error("fuse: preconditioner factorization failed");
    }
  }
  auto apply_precond = [&](const ImageCube& r) {
    ImageCube z = r;
    Eigen::Map<RowMatrix> zm(z.data().data(), static_cast<Eigen::Index>(mb),
                             static_cast<Eigen::Index>(n));
    // solveInPlace expects column-major; solve through a transposed view
    Eigen::MatrixXd cols = zm;
    zm = precond.solve(cols);
    return z;
  };

  FusionResult result;
  result.x_hat = xbar;  // warm start at the prior center
  ImageCube& x = result.x_hat;

  ImageCube ax = apply_A(x);
  ImageCube r = b;
  for (std::size_t i = 0; i < total; ++i) r.data()[i] -= ax.data()[i];

  const double grad0 = std::sqrt(kernels::sumsq(r.data().data(), total));
  double obj = objective(pinned, x);
  if (!std::isfinite(obj)) throw std::runtime_error("fuse: non-finite objective at start");
  result.objective_trace.push_back(obj);

  if (grad0 == 0.0) {
    result.converged = true;
    return result;
  }

  ImageCube z = apply_precond(r);
  ImageCube dir = z;
  double rz = kernels::dot(r.data().data(), z.data().data(), total);

  for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
    ImageCube adir = apply_A(dir);
    const double dad = kernels::dot(dir.data().data(), adir.data().data(), total);
    if (!(dad > 0.0)) {
      throw std::runtime_error("fuse: conjugate-gradient breakdown (non-positive curvature)");
    }
    const double alpha = rz / dad;
    kernels::axpy(x.data().data(), alpha, dir.data().data(), total);
    kernels::axpy(r.data().data(), -alpha, adir.data().data(), total);

    obj = objective(pinned, x);
    if (!std::isfinite(obj)) {
      throw std::runtime_error("fuse: non-finite objective at iteration " + std::to_string(it));
    }
    result.objective_trace.push_back(obj);
    result.iterations = it;

    const double grad_norm = std::sqrt(kernels::sumsq(r.data().data(), total));
    if (grad_norm <= cfg.tol * grad0) {
      result.converged = true;
      break;
    }

    z = apply_precond(r);
    const double rz_next = kernels::dot(r.data().data(), z.data().data(), total);
    const double beta = rz_next / rz;
    rz = rz_next;
    kernels::xpay(dir.data().data(), beta, z.data().data(), total);
  }
  return result;
}

}  // namespace mrcd
