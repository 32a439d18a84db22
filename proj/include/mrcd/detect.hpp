#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mrcd/image.hpp"

namespace mrcd {

enum class DetectorMethod { cva, scva, mad, irmad };

DetectorMethod parse_detector_method(const std::string& name);
std::string detector_method_name(DetectorMethod m);

struct DetectorConfig {
  DetectorMethod method = DetectorMethod::cva;
  std::size_t window = 7;  // scva neighborhood size, odd
  std::optional<double> pfa;
  std::optional<double> threshold;
  std::size_t irmad_max_iter = 30;
  double irmad_tol = 1e-4;

  void validate() const;
};

/// Canonical transform pair fitted on one image pair. Rows of u/v are the
/// canonical projections, ordered by descending correlation and scaled to
/// unit canonical variance.
struct MadModel {
  std::size_t bands = 0;
  std::vector<double> u;  // bands x bands, row-major
  std::vector<double> v;
  std::vector<double> rho;            // descending, in [0, 1]
  std::vector<double> mad_variances;  // 2 (1 - rho), floored away from zero
  std::vector<double> mean1;          // band means used to center the variates
  std::vector<double> mean2;
};

/// Squared Mahalanobis distance of the per-pixel spectral difference, with
/// Sigma the sum of the two maximum-likelihood image covariances.
ChangeEnergyMap cva_energy(const ImageCube& y1, const ImageCube& y2);

/// Upper-tail chi-square threshold: P[chi2_dof > tau] = pfa.
double chi2_threshold(std::size_t dof, double pfa);

/// mask(p) = 1 iff v(p) >= tau.
ChangeMask threshold_map(const ChangeEnergyMap& v, double tau);

/// Uniform-weight window mean of the energy map; windows shrink at borders so
/// every pixel averages only in-bounds neighbors. window == 1 is the identity.
ChangeEnergyMap scva_energy(const ChangeEnergyMap& v, std::size_t window);

/// Canonical correlation analysis of the pair, optionally pixel-weighted.
/// Requires at least two bands; near-singular covariances are ridge-
/// regularized with a warning.
MadModel fit_cca(const ImageCube& y1, const ImageCube& y2);
MadModel fit_cca_weighted(const ImageCube& y1, const ImageCube& y2,
                          const std::vector<double>& weights);

/// Sum over variates of the squared centered canonical difference divided by
/// the variate variance; chi-square with `bands` dof under no change.
ChangeEnergyMap mad_energy(const ImageCube& y1, const ImageCube& y2, const MadModel& model);

struct IrmadResult {
  MadModel model;
  ChangeEnergyMap energy;
  std::vector<double> weights;  // final no-change probabilities per pixel
  std::size_t iterations = 0;   // reweighted refits performed
};

/// Iteratively reweighted MAD: pixel weights are the chi-square no-change
/// probabilities of the previous iteration's energies. Stops when the
/// canonical correlations move less than irmad_tol or after irmad_max_iter
/// refits; irmad_max_iter == 0 reproduces plain MAD.
IrmadResult irmad(const ImageCube& y1, const ImageCube& y2, const DetectorConfig& cfg);

/// Runs the configured method end-to-end to an energy map.
ChangeEnergyMap detector_energy(const ImageCube& y1, const ImageCube& y2,
                                const DetectorConfig& cfg);

/// The decision threshold implied by the config (explicit value or chi-square
/// quantile at the configured pfa).
double resolve_threshold(const DetectorConfig& cfg, std::size_t dof);

}  // namespace mrcd
