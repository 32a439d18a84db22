#include "mrcd/unmix.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mrcd/kernels.hpp"
#include "mrcd/stats.hpp"

namespace mrcd {

namespace {

/// Band-by-band Gram matrix X X^T (no centering).
Eigen::MatrixXd gram(const ImageCube& x) {
  const std::size_t ell = x.bands();
  Eigen::MatrixXd g(ell, ell);
  for (std::size_t i = 0; i < ell; ++i) {
    for (std::size_t j = i; j < ell; ++j) {
      const double v = kernels::dot(x.band(i), x.band(j), x.pixels());
      g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      g(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return g;
}

double centered_total_variance(const ImageCube& x) {
  const std::size_t n = x.pixels();
  double total = 0.0;
  for (std::size_t b = 0; b < x.bands(); ++b) {
    const double* row = x.band(b);
    double mean = 0.0;
    for (std::size_t p = 0; p < n; ++p) mean += row[p];
    mean /= static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t p = 0; p < n; ++p) acc += (row[p] - mean) * (row[p] - mean);
    total += acc;
  }
  return total;
}

}  // namespace

std::size_t estimate_k(const ImageCube& x, double energy_fraction) {
  if (!(energy_fraction > 0.0 && energy_fraction <= 1.0)) {
    throw std::invalid_argument("estimate_k: energy_fraction must lie in (0, 1]");
  }
  if (x.pixels() <= x.bands()) {
    throw std::invalid_argument("estimate_k: need more pixels than bands");
  }
  if (centered_total_variance(x) <= 0.0) {
    throw std::invalid_argument("estimate_k: constant cube has no signal subspace");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram(x), Eigen::EigenvaluesOnly);
  Eigen::VectorXd ev = es.eigenvalues();  // ascending
  const double total = ev.sum();
  if (!(total > 0.0)) throw std::invalid_argument("estimate_k: zero-energy cube");
  double acc = 0.0;
  for (Eigen::Index i = ev.size() - 1; i >= 0; --i) {
    acc += std::max(ev(i), 0.0);
    if (acc >= energy_fraction * total) {
      return static_cast<std::size_t>(ev.size() - i);
    }
  }
  return x.bands();
}

UnmixResult vca(const ImageCube& x, std::size_t k, std::uint64_t seed) {
  const std::size_t ell = x.bands();
  const std::size_t n = x.pixels();
  if (k == 0 || k > std::min(ell, n)) {
    throw std::invalid_argument("vca: K must lie in [1, min(bands, pixels)]");
  }

  // Signal subspace: top-K eigenvectors of the data Gram matrix.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram(x));
  Eigen::MatrixXd basis(ell, k);
  for (std::size_t c = 0; c < k; ++c) {
    basis.col(static_cast<Eigen::Index>(c)) =
        es.eigenvectors().col(static_cast<Eigen::Index>(ell - 1 - c));
  }

  // Subspace coefficients, k x n.
  Eigen::MatrixXd coeff(k, n);
  {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> xm(
        x.data().data(), static_cast<Eigen::Index>(ell), static_cast<Eigen::Index>(n));
    coeff = basis.transpose() * xm;
  }

  std::vector<std::size_t> picked;
  picked.reserve(k);

  // First vertex: largest projection norm onto the subspace.
  {
    std::size_t best = 0;
    double best_val = -1.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double v = coeff.col(static_cast<Eigen::Index>(p)).squaredNorm();
      if (v > best_val) {
        best_val = v;
        best = p;
      }
    }
    picked.push_back(best);
  }

  stats::NormalSampler sampler(seed);
  while (picked.size() < k) {
    // Orthonormal basis of the already-picked coefficient vectors.
    Eigen::MatrixXd e(k, picked.size());
    for (std::size_t c = 0; c < picked.size(); ++c) {
      e.col(static_cast<Eigen::Index>(c)) = coeff.col(static_cast<Eigen::Index>(picked[c]));
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(e);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(
                                               static_cast<Eigen::Index>(k),
                                               static_cast<Eigen::Index>(picked.size()));
    // Random direction orthogonal to their span.
    Eigen::VectorXd f(k);
    double norm = 0.0;
    for (int attempt = 0; attempt < 64 && norm < 1e-12; ++attempt) {
      for (std::size_t i = 0; i < k; ++i) f(static_cast<Eigen::Index>(i)) = sampler.next();
      f -= q * (q.transpose() * f);
      norm = f.norm();
    }
    if (norm < 1e-12) {
      throw std::runtime_error("vca: degenerate data, no direction orthogonal to the selection");
    }
    f /= norm;

    std::size_t best = 0;
    double best_val = -1.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double v = std::fabs(f.dot(coeff.col(static_cast<Eigen::Index>(p))));
      if (v > best_val) {
        best_val = v;
        best = p;
      }
    }
    picked.push_back(best);
  }

  UnmixResult result;
  result.k = k;
  result.endmember_pixels = picked;
  result.endmembers.resize(ell * k);
  for (std::size_t b = 0; b < ell; ++b) {
    for (std::size_t c = 0; c < k; ++c) {
      result.endmembers[b * k + c] = x.at(b, picked[c]);
    }
  }
  return result;
}

namespace {

/// Active-set solver for min ||x - M a|| s.t. sum(a) = 1, a >= 0. The
/// endmember matrix is factored once and reused across all pixels.
class FclsSolver {
public:
  FclsSolver(const std::vector<double>& endmembers, std::size_t bands, std::size_t k)
      : k_(k), m_(static_cast<Eigen::Index>(bands), static_cast<Eigen::Index>(k)) {
    if (k == 0) throw std::invalid_argument("fcls: K must be positive");
    if (endmembers.size() != bands * k) {
      throw std::invalid_argument("fcls: endmember matrix shape mismatch");
    }
    for (std::size_t b = 0; b < bands; ++b) {
      for (std::size_t c = 0; c < k; ++c) {
        m_(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)) = endmembers[b * k + c];
      }
    }
    if (Eigen::FullPivLU<Eigen::MatrixXd>(m_).rank() < static_cast<Eigen::Index>(k)) {
      throw std::invalid_argument("fcls: endmember matrix is rank deficient");
    }
    mtm_ = m_.transpose() * m_;
  }

  std::vector<double> solve(const Eigen::VectorXd& xv) const {
    const std::size_t k = k_;
    const Eigen::VectorXd mtx = m_.transpose() * xv;

    constexpr double kZeroTol = 1e-12;
    Eigen::VectorXd a =
        Eigen::VectorXd::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k));
    std::vector<bool> passive(k, true);

    const std::size_t max_outer = 4 * k + 16;
    for (std::size_t outer = 0; outer < max_outer; ++outer) {
      std::vector<std::size_t> pset;
      for (std::size_t i = 0; i < k; ++i) {
        if (passive[i]) pset.push_back(i);
      }
      Eigen::VectorXd sol = solve_ecls(mtx, pset);

      // Feasibility loop: step toward the subproblem solution along the
      // segment from the current feasible point, dropping variables at zero.
      while (min_passive(sol, pset) < -kZeroTol) {
        double alpha = 1.0;
        for (std::size_t i = 0; i < pset.size(); ++i) {
          const double an = sol(static_cast<Eigen::Index>(i));
          const double ao = a(static_cast<Eigen::Index>(pset[i]));
          if (an < -kZeroTol && ao - an > 0.0) alpha = std::min(alpha, ao / (ao - an));
        }
        for (std::size_t i = 0; i < pset.size(); ++i) {
          const Eigen::Index idx = static_cast<Eigen::Index>(pset[i]);
          a(idx) += alpha * (sol(static_cast<Eigen::Index>(i)) - a(idx));
          if (a(idx) <= kZeroTol) {
            a(idx) = 0.0;
            passive[pset[i]] = false;
          }
        }
        pset.clear();
        for (std::size_t i = 0; i < k; ++i) {
          if (passive[i]) pset.push_back(i);
        }
        if (pset.empty()) {
          // everything dropped numerically; restart from the closest endmember
          std::size_t best = 0;
          double best_r = std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < k; ++i) {
            const double r = (xv - m_.col(static_cast<Eigen::Index>(i))).squaredNorm();
            if (r < best_r) {
              best_r = r;
              best = i;
            }
          }
          a.setZero();
          a(static_cast<Eigen::Index>(best)) = 1.0;
          passive.assign(k, false);
          passive[best] = true;
          pset = {best};
        }
        sol = solve_ecls(mtx, pset);
      }
      a.setZero();
      for (std::size_t i = 0; i < pset.size(); ++i) {
        a(static_cast<Eigen::Index>(pset[i])) =
            std::max(0.0, sol(static_cast<Eigen::Index>(i)));
      }

      // Dual feasibility: mu_i = g_i - nu >= 0 on the active set.
      const Eigen::VectorXd g = mtm_ * a - mtx;
      double nu = 0.0;
      for (std::size_t i : pset) nu += g(static_cast<Eigen::Index>(i));
      nu /= static_cast<double>(pset.size());

      double worst = -1e-10;
      std::size_t worst_idx = k;
      for (std::size_t i = 0; i < k; ++i) {
        if (passive[i]) continue;
        const double mu = g(static_cast<Eigen::Index>(i)) - nu;
        if (mu < worst) {
          worst = mu;
          worst_idx = i;
        }
      }
      if (worst_idx == k) break;  // KKT satisfied
      passive[worst_idx] = true;
    }

    std::vector<double> out(k);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      out[i] = a(static_cast<Eigen::Index>(i));
      sum += out[i];
    }
    if (sum > 0.0) {
      for (double& v : out) v /= sum;
    }
    return out;
  }

private:
  static double min_passive(const Eigen::VectorXd& sol, const std::vector<std::size_t>& pset) {
    double m = 0.0;
    for (std::size_t i = 0; i < pset.size(); ++i) {
      m = std::min(m, sol(static_cast<Eigen::Index>(i)));
    }
    return m;
  }

  /// Equality-constrained least squares on the passive set via its KKT system.
  Eigen::VectorXd solve_ecls(const Eigen::VectorXd& mtx,
                             const std::vector<std::size_t>& pset) const {
    const std::size_t np = pset.size();
    Eigen::MatrixXd kkt(np + 1, np + 1);
    Eigen::VectorXd rhs(np + 1);
    for (std::size_t i = 0; i < np; ++i) {
      for (std::size_t j = 0; j < np; ++j) {
        kkt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            mtm_(static_cast<Eigen::Index>(pset[i]), static_cast<Eigen::Index>(pset[j]));
      }
      kkt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(np)) = 1.0;
      kkt(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(i)) = 1.0;
      rhs(static_cast<Eigen::Index>(i)) = mtx(static_cast<Eigen::Index>(pset[i]));
    }
    kkt(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(np)) = 0.0;
    rhs(static_cast<Eigen::Index>(np)) = 1.0;
    return Eigen::FullPivLU<Eigen::MatrixXd>(kkt).solve(rhs);
  }

  std::size_t k_;
  Eigen::MatrixXd m_;
  Eigen::MatrixXd mtm_;
};

}  // namespace

std::vector<double> fcls_pixel(const double* x_p, std::size_t bands,
                               const std::vector<double>& endmembers, std::size_t k) {
  FclsSolver solver(endmembers, bands, k);
  Eigen::VectorXd xv(static_cast<Eigen::Index>(bands));
  for (std::size_t b = 0; b < bands; ++b) xv(static_cast<Eigen::Index>(b)) = x_p[b];
  return solver.solve(xv);
}

std::vector<double> fcls(const ImageCube& x, const std::vector<double>& endmembers,
                         std::size_t k) {
  const std::size_t ell = x.bands();
  const std::size_t n = x.pixels();
  FclsSolver solver(endmembers, ell, k);
  std::vector<double> abundances(k * n);
  Eigen::VectorXd pixel(static_cast<Eigen::Index>(ell));
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t b = 0; b < ell; ++b) pixel(static_cast<Eigen::Index>(b)) = x.at(b, p);
    std::vector<double> a = solver.solve(pixel);
    for (std::size_t i = 0; i < k; ++i) abundances[i * n + p] = a[i];
  }
  return abundances;
}

ImageCube reconstruct(const std::vector<double>& endmembers, std::size_t bands,
                      const std::vector<double>& abundances, std::size_t k, std::size_t rows,
                      std::size_t cols) {
  const std::size_t n = rows * cols;
  if (endmembers.size() != bands * k) {
    throw std::invalid_argument("reconstruct: endmember matrix shape mismatch");
  }
  if (abundances.size() != k * n) {
    throw std::invalid_argument("reconstruct: abundance matrix shape mismatch");
  }
  ImageCube out(bands, rows, cols);
  for (std::size_t b = 0; b < bands; ++b) {
    double* dst = out.band(b);
    for (std::size_t i = 0; i < k; ++i) {
      const double w = endmembers[b * k + i];
      if (w != 0.0) kernels::axpy(dst, w, abundances.data() + i * n, n);
    }
  }
  return out;
}

UnmixResult unmix(const ImageCube& x, std::size_t k, std::uint64_t seed) {
  UnmixResult result = vca(x, k, seed);
  result.abundances = fcls(x, result.endmembers, k);
  return result;
}

}  // namespace mrcd
