#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mrcd/detect.hpp"
#include "mrcd/image.hpp"

namespace mrcd {

/// Empirical ROC: ordered (pfa, pd) samples from (0,0) to (1,1) plus the two
/// scalar figures of merit derived from them.
struct RocCurve {
  std::vector<std::pair<double, double>> points;
  double auc = 0.0;
  double norm_dist = 0.0;
};

/// Threshold sweep over the distinct energy values. Requires the truth mask
/// to contain both classes.
RocCurve roc(const ChangeEnergyMap& v, const ChangeMask& truth);

/// Trapezoidal area under the (pfa, pd) polyline.
double auc_of(const std::vector<std::pair<double, double>>& points);

/// Euclidean distance from the no-detection point (1, 0) to the curve's
/// intersection with the diagonal pd = 1 - pfa, normalized by sqrt(2) so an
/// ideal detector scores 1.
double norm_dist_of(const std::vector<std::pair<double, double>>& points);

/// Everything one experiment run needs, loadable from a key=value text file.
struct ExperimentManifest {
  std::string ref_path;             // reference HR-HS cube
  std::string mode = "ms";          // "ms" or "pan"
  std::size_t k = 0;                // endmembers; 0 = automatic
  std::size_t regions = 10;         // change regions (trials); each runs all configs
  std::size_t region_min = 3;       // rectangle side range, HR pixels
  std::size_t region_max = 12;
  std::vector<int> configs = {1, 2};
  std::vector<std::string> detectors = {"cva", "scva7", "mad", "irmad"};
  std::uint64_t seed = 0;
  std::size_t factor = 5;           // decimation, both directions
  std::size_t kernel_size = 5;
  double kernel_sigma = 1.0;
  double lambda_reg = 1e-4;
  double snr_db = 0.0;              // 0 disables noise
  bool noiseless = true;
  std::size_t pan_bands = 0;        // 0 = first half of bands
  std::size_t fusion_max_iter = 500;
  double fusion_tol = 1e-6;
  std::size_t curve_points = 512;

  static ExperimentManifest load(const std::string& path);
  void save(const std::string& path) const;
  void validate() const;
};

struct ReportRow {
  std::string detector;
  std::string map_type;  // "hr", "lr", "alr", "wc"
  double auc = 0.0;
  double norm_dist = 0.0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  // mean ROC per (detector, map_type) on the common pfa grid
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<double, double>>> curves;
  std::size_t trials_run = 0;
  std::vector<std::string> failures;  // one message per failed trial

  const ReportRow& row(const std::string& detector, const std::string& map_type) const;
  std::string to_csv() const;
  void write_csv(const std::string& path) const;
  void write_curves(const std::string& dir) const;
};

/// Runs the full Monte-Carlo protocol described by the manifest: per region
/// and temporal configuration, simulate a pair, fuse, predict, score every
/// detector on the HR, LR, aLR and worst-case maps, and vertically average
/// the ROC curves on a fixed pfa grid. Failed trials are recorded and the
/// experiment continues.
ExperimentReport run_experiment(const ExperimentManifest& manifest);

}  // namespace mrcd
