#pragma once

#include <utility>

#include "mrcd/detect.hpp"
#include "mrcd/fusion.hpp"
#include "mrcd/image.hpp"
#include "mrcd/operators.hpp"

namespace mrcd {

struct CdOutputs {
  ChangeMask d_hr_hat;
  ChangeMask d_lr_hat;
  ChangeMask d_alr_hat;
  ChangeEnergyMap v_hr;
  ChangeEnergyMap v_lr;
  ImageCube x_hat;
};

struct PipelineConfig {
  FusionConfig fusion;
  double lambda_reg = 1e-4;
};

/// Noiseless forward application of both degradations to the fused image:
/// (L x_hat, x_hat B S).
std::pair<ImageCube, ImageCube> predict(const ImageCube& x_hat, const DegradationModel& model);

/// The 3-step method end-to-end: fuse the observed pair, predict both
/// resolutions, run the detector on each same-resolution pair, threshold, and
/// block-OR the HR decision map into the alternate LR map.
CdOutputs run_cd(const ImageCube& y_hr, const ImageCube& y_lr, const DegradationModel& model,
                 const PipelineConfig& pipeline_cfg, const DetectorConfig& detector_cfg);

/// Baseline energy: degrade the HR observation spatially and the LR
/// observation spectrally to a common low resolution, then run the detector
/// on that pair.
ChangeEnergyMap worst_case_energy(const ImageCube& y_hr, const ImageCube& y_lr,
                                  const DegradationModel& model,
                                  const DetectorConfig& detector_cfg);

/// Thresholded worst-case decision map.
ChangeMask run_worst_case(const ImageCube& y_hr, const ImageCube& y_lr,
                          const DegradationModel& model, const DetectorConfig& detector_cfg);

/// Block maximum of an HR energy map on the LR grid. Thresholding this map at
/// tau equals block-OR-ing the HR map thresholded at tau, so it is the energy
/// that drives the aLR ROC sweep.
ChangeEnergyMap alr_energy(const ChangeEnergyMap& v_hr, const SpatialDegradation& spatial);

}  // namespace mrcd
