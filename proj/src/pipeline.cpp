#include "mrcd/pipeline.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "mrcd/simulate.hpp"

namespace mrcd {

std::pair<ImageCube, ImageCube> predict(const ImageCube& x_hat, const DegradationModel& model) {
  ImageCube y_hr_hat = apply_spectral(model.response, x_hat);
  ImageCube y_lr_hat = decimate(model.spatial, apply_blur(model.spatial, x_hat));
  return {std::move(y_hr_hat), std::move(y_lr_hat)};
}

CdOutputs run_cd(const ImageCube& y_hr, const ImageCube& y_lr, const DegradationModel& model,
                 const PipelineConfig& pipeline_cfg, const DetectorConfig& detector_cfg) {
  detector_cfg.validate();

  FusionProblem problem{y_hr,           y_lr,           model.response, model.spatial,
                        model.lambda_hr, model.lambda_lr, pipeline_cfg.lambda_reg};
  FusionResult fused;
  try {
    fused = fuse(problem, pipeline_cfg.fusion);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("run_cd fusion stage: ") + e.what());
  }

  auto [y_hr_hat, y_lr_hat] = predict(fused.x_hat, model);

  CdOutputs out;
  out.x_hat = std::move(fused.x_hat);
  try {
    // Each detector invocation sees exactly one resolution.
    out.v_hr = detector_energy(y_hr, y_hr_hat, detector_cfg);
    out.v_lr = detector_energy(y_lr, y_lr_hat, detector_cfg);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("run_cd decision stage: ") + e.what());
  }

  const double tau_hr = resolve_threshold(detector_cfg, out.v_hr.dof());
  const double tau_lr = resolve_threshold(detector_cfg, out.v_lr.dof());
  out.d_hr_hat = threshold_map(out.v_hr, tau_hr);
  out.d_lr_hat = threshold_map(out.v_lr, tau_lr);
  out.d_alr_hat = degrade_mask(out.d_hr_hat, model.spatial);
  return out;
}

ChangeEnergyMap worst_case_energy(const ImageCube& y_hr, const ImageCube& y_lr,
                                  const DegradationModel& model,
                                  const DetectorConfig& detector_cfg) {
  // Reuse the forward model's own blur and decimation for the HR image.
  ImageCube y_hr_low = decimate(model.spatial, apply_blur(model.spatial, y_hr));
  ImageCube y_lr_low = apply_spectral(model.response, y_lr);
  try {
    return detector_energy(y_hr_low, y_lr_low, detector_cfg);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("worst-case decision stage: ") + e.what());
  }
}

ChangeMask run_worst_case(const ImageCube& y_hr, const ImageCube& y_lr,
                          const DegradationModel& model, const DetectorConfig& detector_cfg) {
  detector_cfg.validate();
  ChangeEnergyMap v = worst_case_energy(y_hr, y_lr, model, detector_cfg);
  return threshold_map(v, resolve_threshold(detector_cfg, v.dof()));
}

ChangeEnergyMap alr_energy(const ChangeEnergyMap& v_hr, const SpatialDegradation& spatial) {
  if (v_hr.rows() % spatial.d_r() != 0 || v_hr.cols() % spatial.d_c() != 0) {
    throw std::invalid_argument("alr_energy: grid dims not divisible by decimation factors");
  }
  const std::size_t mr = v_hr.rows() / spatial.d_r();
  const std::size_t mc = v_hr.cols() / spatial.d_c();
  ChangeEnergyMap out(mr, mc, v_hr.dof());
  for (std::size_t i = 0; i < v_hr.rows(); ++i) {
    for (std::size_t j = 0; j < v_hr.cols(); ++j) {
      double& cell = out.at(i / spatial.d_r(), j / spatial.d_c());
      cell = std::max(cell, v_hr.at(i, j));
    }
  }
  return out;
}

}  // namespace mrcd
