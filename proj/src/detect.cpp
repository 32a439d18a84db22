#include "mrcd/detect.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "mrcd/kernels.hpp"
#include "mrcd/stats.hpp"

namespace mrcd {

namespace {

constexpr double kVarianceFloor = 1e-12;

void check_same_shape(const ImageCube& y1, const ImageCube& y2, const char* who) {
  if (y1.bands() != y2.bands() || y1.rows() != y2.rows() || y1.cols() != y2.cols()) {
    throw std::invalid_argument(std::string(who) + ": images must share shape");
  }
  if (y1.bands() == 0 || y1.pixels() == 0) {
    throw std::invalid_argument(std::string(who) + ": empty image");
  }
}

/// Weighted band means; weights must be nonnegative with positive total.
Eigen::VectorXd weighted_mean(const ImageCube& y, const std::vector<double>& w, double wsum) {
  const std::size_t ell = y.bands();
  const std::size_t n = y.pixels();
  Eigen::VectorXd mu(ell);
  for (std::size_t b = 0; b < ell; ++b) {
    mu(static_cast<Eigen::Index>(b)) = kernels::dot(y.band(b), w.data(), n) / wsum;
  }
  return mu;
}

/// Maximum-likelihood (weighted) cross-covariance between two centered cubes.
Eigen::MatrixXd weighted_cross_cov(const ImageCube& a, const Eigen::VectorXd& mu_a,
                                   const ImageCube& b, const Eigen::VectorXd& mu_b,
                                   const std::vector<double>& w, double wsum) {
  const std::size_t ell = a.bands();
  const std::size_t n = a.pixels();
  // Materialize centered rows of a and weighted centered rows of b, then
  // every covariance entry is a single dot.
  std::vector<double> ca(ell * n), wcb(ell * n);
  for (std::size_t i = 0; i < ell; ++i) {
    const double* ra = a.band(i);
    const double* rb = b.band(i);
    const double ma = mu_a(static_cast<Eigen::Index>(i));
    const double mb = mu_b(static_cast<Eigen::Index>(i));
    double* da = ca.data() + i * n;
    double* db = wcb.data() + i * n;
    for (std::size_t p = 0; p < n; ++p) {
      da[p] = ra[p] - ma;
      db[p] = w[p] * (rb[p] - mb);
    }
  }
  Eigen::MatrixXd cov(ell, ell);
  for (std::size_t i = 0; i < ell; ++i) {
    for (std::size_t j = 0; j < ell; ++j) {
      cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          kernels::dot(ca.data() + i * n, wcb.data() + j * n, n) / wsum;
    }
  }
  return cov;
}

/// Adds a ridge when the matrix is numerically singular (condition > 1e12).
void ridge_if_needed(Eigen::MatrixXd& sigma, const char* who) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin <= 0.0 || lmax / lmin > 1e12) {
    const double ridge = 1e-8 * sigma.trace() / static_cast<double>(sigma.rows());
    sigma.diagonal().array() += (ridge > 0.0 ? ridge : 1e-12);
    std::cerr << who << ": near-singular covariance, ridge-regularized\n";
  }
}

std::vector<double> uniform_weights(std::size_t n) { return std::vector<double>(n, 1.0); }

}  // namespace

DetectorMethod parse_detector_method(const std::string& name) {
  if (name == "cva") return DetectorMethod::cva;
  if (name == "scva") return DetectorMethod::scva;
  if (name == "mad") return DetectorMethod::mad;
  if (name == "irmad") return DetectorMethod::irmad;
  throw std::invalid_argument("unknown detector method: " + name);
}

std::string detector_method_name(DetectorMethod m) {
  switch (m) {
    case DetectorMethod::cva: return "cva";
    case DetectorMethod::scva: return "scva";
    case DetectorMethod::mad: return "mad";
    case DetectorMethod::irmad: return "irmad";
  }
  return "?";
}

void DetectorConfig::validate() const {
  if (method == DetectorMethod::scva && window % 2 == 0) {
    throw std::invalid_argument("DetectorConfig: scva window must be odd");
  }
  if (pfa.has_value() == threshold.has_value()) {
    throw std::invalid_argument("DetectorConfig: exactly one of pfa/threshold must be set");
  }
  if (pfa && !(*pfa > 0.0 && *pfa < 1.0)) {
    throw std::invalid_argument("DetectorConfig: pfa must lie in (0, 1)");
  }
  if (threshold && !(*threshold >= 0.0)) {
    throw std::invalid_argument("DetectorConfig: threshold must be nonnegative");
  }
}

ChangeEnergyMap cva_energy(const ImageCube& y1, const ImageCube& y2) {
  check_same_shape(y1, y2, "cva_energy");
  const std::size_t ell = y1.bands();
  const std::size_t n = y1.pixels();
  const std::vector<double> w = uniform_weights(n);
  const double wsum = static_cast<double>(n);

  const Eigen::VectorXd mu1 = weighted_mean(y1, w, wsum);
  const Eigen::VectorXd mu2 = weighted_mean(y2, w, wsum);
  Eigen::MatrixXd sigma = weighted_cross_cov(y1, mu1, y1, mu1, w, wsum) +
                          weighted_cross_cov(y2, mu2, y2, mu2, w, wsum);
  ridge_if_needed(sigma, "cva_energy");
  const Eigen::MatrixXd inv = sigma.inverse();

  // diff rows once, then one fused multiply-add pass per (i, j) pair
  std::vector<double> diff(ell * n);
  for (std::size_t b = 0; b < ell; ++b) {
    const double* a = y1.band(b);
    const double* c = y2.band(b);
    double* d = diff.data() + b * n;
    for (std::size_t p = 0; p < n; ++p) d[p] = a[p] - c[p];
  }

  ChangeEnergyMap v(y1.rows(), y1.cols(), ell);
  for (std::size_t i = 0; i < ell; ++i) {
    for (std::size_t j = i; j < ell; ++j) {
      const double c = inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                       (i == j ? 1.0 : 2.0);
      if (c != 0.0) {
        kernels::fmadd_pointwise(v.data().data(), c, diff.data() + i * n, diff.data() + j * n, n);
      }
    }
  }
  // quadratic form is PSD; clip the few ULPs of negative noise
  for (double& x : v.data()) {
    if (x < 0.0) x = 0.0;
  }
  return v;
}

double chi2_threshold(std::size_t dof, double pfa) { return stats::chi2_quantile_upper(dof, pfa); }

ChangeMask threshold_map(const ChangeEnergyMap& v, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("threshold_map: tau must be nonnegative");
  ChangeMask mask(v.rows(), v.cols());
  for (std::size_t p = 0; p < v.pixels(); ++p) mask.at(p) = (v.at(p) >= tau) ? 1 : 0;
  return mask;
}

ChangeEnergyMap scva_energy(const ChangeEnergyMap& v, std::size_t window) {
  if (window % 2 == 0 || window == 0) {
    throw std::invalid_argument("scva_energy: window must be odd");
  }
  if (window == 1) return v;
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(window) / 2;
  const std::ptrdiff_t nr = static_cast<std::ptrdiff_t>(v.rows());
  const std::ptrdiff_t nc = static_cast<std::ptrdiff_t>(v.cols());

  // Summed-area table: window means with border truncation in O(pixels).
  std::vector<double> sat((nr + 1) * (nc + 1), 0.0);
  for (std::ptrdiff_t i = 0; i < nr; ++i) {
    for (std::ptrdiff_t j = 0; j < nc; ++j) {
      sat[(i + 1) * (nc + 1) + (j + 1)] = v.at(static_cast<std::size_t>(i * nc + j)) +
                                          sat[i * (nc + 1) + (j + 1)] +
                                          sat[(i + 1) * (nc + 1) + j] - sat[i * (nc + 1) + j];
    }
  }
  ChangeEnergyMap out(v.rows(), v.cols(), v.dof());
  for (std::ptrdiff_t i = 0; i < nr; ++i) {
    const std::ptrdiff_t r0 = std::max<std::ptrdiff_t>(0, i - h);
    const std::ptrdiff_t r1 = std::min<std::ptrdiff_t>(nr - 1, i + h);
    for (std::ptrdiff_t j = 0; j < nc; ++j) {
      const std::ptrdiff_t c0 = std::max<std::ptrdiff_t>(0, j - h);
      const std::ptrdiff_t c1 = std::min<std::ptrdiff_t>(nc - 1, j + h);
      const double sum = sat[(r1 + 1) * (nc + 1) + (c1 + 1)] - sat[r0 * (nc + 1) + (c1 + 1)] -
                         sat[(r1 + 1) * (nc + 1) + c0] + sat[r0 * (nc + 1) + c0];
      const double count = static_cast<double>((r1 - r0 + 1) * (c1 - c0 + 1));
      double m = sum / count;
      out.at(static_cast<std::size_t>(i * nc + j)) = (m < 0.0) ? 0.0 : m;
    }
  }
  return out;
}

MadModel fit_cca_weighted(const ImageCube& y1, const ImageCube& y2,
                          const std::vector<double>& weights) {
  check_same_shape(y1, y2, "fit_cca");
  const std::size_t ell = y1.bands();
  const std::size_t n = y1.pixels();
  if (ell < 2) {
    throw std::invalid_argument("fit_cca: canonical correlation needs multi-band images");
  }
  if (weights.size() != n) throw std::invalid_argument("fit_cca: weight length mismatch");
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("fit_cca: weights must be finite and nonnegative");
    }
    wsum += w;
  }
  if (!(wsum > 0.0)) throw std::invalid_argument("fit_cca: weights sum to zero");

  const Eigen::VectorXd mu1 = weighted_mean(y1, weights, wsum);
  const Eigen::VectorXd mu2 = weighted_mean(y2, weights, wsum);
  Eigen::MatrixXd s11 = weighted_cross_cov(y1, mu1, y1, mu1, weights, wsum);
  Eigen::MatrixXd s22 = weighted_cross_cov(y2, mu2, y2, mu2, weights, wsum);
  const Eigen::MatrixXd s12 = weighted_cross_cov(y1, mu1, y2, mu2, weights, wsum);
  ridge_if_needed(s11, "fit_cca");
  ridge_if_needed(s22, "fit_cca");

  const Eigen::LLT<Eigen::MatrixXd> c1(s11);
  const Eigen::LLT<Eigen::MatrixXd> c2(s22);
  if (c1.info() != Eigen::Success || c2.info() != Eigen::Success) {
    throw std::runtime_error("fit_cca: covariance factorization failed");
  }
  // Whitened coupling matrix K = C1^{-1} S12 C2^{-T}; its SVD gives the
  // canonical pairs with unit canonical variance.
  Eigen::MatrixXd k = c1.matrixL().solve(s12);
  k = c2.matrixL().solve(k.transpose()).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(k, Eigen::ComputeFullU | Eigen::ComputeFullV);

  const Eigen::MatrixXd a = c1.matrixL().transpose().solve(svd.matrixU());
  const Eigen::MatrixXd b = c2.matrixL().transpose().solve(svd.matrixV());

  MadModel model;
  model.bands = ell;
  model.u.assign(ell * ell, 0.0);
  model.v.assign(ell * ell, 0.0);
  model.rho.resize(ell);
  model.mad_variances.resize(ell);
  model.mean1.resize(ell);
  model.mean2.resize(ell);
  for (std::size_t i = 0; i < ell; ++i) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    double rho = svd.singularValues()(ii);
    if (rho > 1.0) rho = 1.0;
    model.rho[i] = rho;
    model.mad_variances[i] = std::max(2.0 * (1.0 - rho), kVarianceFloor);
    // deterministic sign: largest-magnitude coefficient of u_i is positive
    Eigen::Index arg = 0;
    a.col(ii).cwiseAbs().maxCoeff(&arg);
    const double flip = (a(arg, ii) < 0.0) ? -1.0 : 1.0;
    for (std::size_t c = 0; c < ell; ++c) {
      model.u[i * ell + c] = flip * a(static_cast<Eigen::Index>(c), ii);
      model.v[i * ell + c] = flip * b(static_cast<Eigen::Index>(c), ii);
    }
    model.mean1[i] = mu1(ii);
    model.mean2[i] = mu2(ii);
  }
  return model;
}

MadModel fit_cca(const ImageCube& y1, const ImageCube& y2) {
  return fit_cca_weighted(y1, y2, uniform_weights(y1.pixels()));
}

ChangeEnergyMap mad_energy(const ImageCube& y1, const ImageCube& y2, const MadModel& model) {
  check_same_shape(y1, y2, "mad_energy");
  const std::size_t ell = y1.bands();
  const std::size_t n = y1.pixels();
  if (model.bands != ell) throw std::invalid_argument("mad_energy: model band count mismatch");

  ChangeEnergyMap v(y1.rows(), y1.cols(), ell);
  std::vector<double> variate(n);
  for (std::size_t i = 0; i < ell; ++i) {
    double shift = 0.0;
    for (std::size_t b = 0; b < ell; ++b) {
      shift += model.u[i * ell + b] * model.mean1[b] - model.v[i * ell + b] * model.mean2[b];
    }
    std::fill(variate.begin(), variate.end(), -shift);
    for (std::size_t b = 0; b < ell; ++b) {
      kernels::axpy(variate.data(), model.u[i * ell + b], y1.band(b), n);
      kernels::axpy(variate.data(), -model.v[i * ell + b], y2.band(b), n);
    }
    kernels::fmadd_pointwise(v.data().data(), 1.0 / model.mad_variances[i], variate.data(),
                             variate.data(), n);
  }
  return v;
}

IrmadResult irmad(const ImageCube& y1, const ImageCube& y2, const DetectorConfig& cfg) {
  check_same_shape(y1, y2, "irmad");
  const std::size_t n = y1.pixels();
  const std::size_t ell = y1.bands();

  IrmadResult result;
  result.model = fit_cca(y1, y2);
  result.energy = mad_energy(y1, y2, result.model);
  result.weights = uniform_weights(n);

  for (std::size_t it = 0; it < cfg.irmad_max_iter; ++it) {
    std::vector<double> w(n);
    for (std::size_t p = 0; p < n; ++p) w[p] = stats::chi2_sf(ell, result.energy.at(p));

    MadModel next;
    try {
      next = fit_cca_weighted(y1, y2, w);
    } catch (const std::exception&) {
      break;  // keep the last valid iterate
    }
    bool finite = true;
    for (double r : next.rho) finite = finite && std::isfinite(r);
    if (!finite) break;

    double delta = 0.0;
    for (std::size_t i = 0; i < ell; ++i) {
      delta = std::max(delta, std::fabs(next.rho[i] - result.model.rho[i]));
    }
    result.model = next;
    result.energy = mad_energy(y1, y2, result.model);
    result.weights = std::move(w);
    result.iterations = it + 1;
    if (delta < cfg.irmad_tol) break;
  }
  return result;
}

ChangeEnergyMap detector_energy(const ImageCube& y1, const ImageCube& y2,
                                const DetectorConfig& cfg) {
  switch (cfg.method) {
    case DetectorMethod::cva: return cva_energy(y1, y2);
    case DetectorMethod::scva: return scva_energy(cva_energy(y1, y2), cfg.window);
    case DetectorMethod::mad: return mad_energy(y1, y2, fit_cca(y1, y2));
    case DetectorMethod::irmad: return irmad(y1, y2, cfg).energy;
  }
  throw std::logic_error("detector_energy: unknown method");
}

double resolve_threshold(const DetectorConfig& cfg, std::size_t dof) {
  cfg.validate();
  if (cfg.threshold) return *cfg.threshold;
  return chi2_threshold(dof, *cfg.pfa);
}

}  // namespace mrcd
