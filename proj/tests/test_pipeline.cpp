#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mrcd/pipeline.hpp"
#include "mrcd/simulate.hpp"

using namespace mrcd;

namespace {

DegradationModel ms_model(std::size_t bands) {
  SpatialDegradation s(make_gaussian_kernel(5, 1.0), 5, 5, 5);
  SpectralResponse l = make_ms_response(bands, default_ms_groups(bands));
  return DegradationModel{l, s, std::vector<double>(l.out_bands(), 1.0),
                          std::vector<double>(bands, 1.0)};
}

ImageCube random_cube(std::size_t bands, std::size_t rows, std::size_t cols,
                      std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(0.1, 2.0);
  ImageCube cube(bands, rows, cols);
  for (double& v : cube.data()) v = dist(rng);
  return cube;
}

}  // namespace

TEST_CASE("predict composes the two degradations") {
  DegradationModel model = ms_model(12);
  ImageCube x = random_cube(12, 10, 10, 1);
  auto [y_hr, y_lr] = predict(x, model);
  // composition oracle through the operators module
  ImageCube expect_hr = apply_spectral(model.response, x);
  ImageCube expect_lr = decimate(model.spatial, apply_blur(model.spatial, x));
  CHECK(y_hr.data() == expect_hr.data());
  CHECK(y_lr.data() == expect_lr.data());
  CHECK(y_hr.bands() == 4);
  CHECK(y_lr.rows() == 2);
}

TEST_CASE("predict with identity response and unit factor returns the input") {
  std::vector<double> eye(9, 0.0);
  eye[0] = eye[4] = eye[8] = 1.0;
  std::vector<double> delta(9, 0.0);
  delta[4] = 1.0;
  DegradationModel model{SpectralResponse(3, 3, eye), SpatialDegradation(delta, 3, 1, 1),
                         std::vector<double>(3, 1.0), std::vector<double>(3, 1.0)};
  ImageCube x = random_cube(3, 6, 6, 2);
  auto [y_hr, y_lr] = predict(x, model);
  CHECK(y_hr.data() == x.data());
  CHECK(y_lr.data() == x.data());
}

TEST_CASE("alr energy is the block max and matches the threshold/OR sweep") {
  SpatialDegradation s(make_gaussian_kernel(3, 1.0), 3, 2, 2);
  ChangeEnergyMap v(4, 4, 2);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(0.0, 5.0);
  for (double& x : v.data()) x = dist(rng);
  ChangeEnergyMap alr = alr_energy(v, s);
  REQUIRE(alr.rows() == 2);
  REQUIRE(alr.cols() == 2);
  for (std::size_t bi = 0; bi < 2; ++bi) {
    for (std::size_t bj = 0; bj < 2; ++bj) {
      double mx = 0.0;
      for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 2; ++b) mx = std::max(mx, v.at(bi * 2 + a, bj * 2 + b));
      }
      CHECK(alr.at(bi, bj) == mx);
    }
  }
  // thresholding the block max equals block-OR of the thresholded HR map
  for (double tau : {0.5, 1.5, 3.0, 4.9}) {
    ChangeMask direct = threshold_map(alr, tau);
    ChangeMask swept = degrade_mask(threshold_map(v, tau), s);
    CHECK(direct == swept);
  }
}

TEST_CASE("run_cd produces consistent outputs end to end") {
  ImageCube ref = make_synthetic_reference(12, 30, 30, 3, 7);
  DegradationModel model = ms_model(12);
  NoiseModel no_noise{std::vector<double>(4, 0.0), std::vector<double>(12, 0.0), 0};

  ChangeSpec spec;
  spec.seed = 13;
  ChangeRegion region;
  region.pixels = random_rectangle_region(30, 30, 8, 8, 99);
  region.rule = ChangeRule::zero_abundance;
  spec.regions.push_back(region);
  SimulatedPair pair = simulate_pair(ref, spec, model, TemporalConfig::config1, no_noise, 3);

  DetectorConfig dcfg;
  dcfg.method = DetectorMethod::cva;
  dcfg.pfa = 0.05;
  PipelineConfig pcfg;
  CdOutputs out = run_cd(pair.y_hr, pair.y_lr, model, pcfg, dcfg);

  CHECK(out.v_hr.rows() == 30);
  CHECK(out.v_lr.rows() == 6);
  CHECK(out.d_alr_hat.rows() == 6);
  CHECK(out.x_hat.bands() == 12);

  SUBCASE("the alr map is exactly the block-OR of the hr map") {
    CHECK(out.d_alr_hat == degrade_mask(out.d_hr_hat, model.spatial));
  }

  SUBCASE("the hr energy peaks inside the changed region") {
    std::size_t argmax = 0;
    for (std::size_t p = 0; p < out.v_hr.pixels(); ++p) {
      if (out.v_hr.at(p) > out.v_hr.at(argmax)) argmax = p;
    }
    CHECK(pair.d_hr.at(argmax) == 1);
  }

  SUBCASE("stage separability: manual fuse/predict/detect reproduces run_cd bit for bit") {
    FusionProblem problem{pair.y_hr,      pair.y_lr,      model.response, model.spatial,
                          model.lambda_hr, model.lambda_lr, pcfg.lambda_reg};
    FusionResult fused = fuse(problem, pcfg.fusion);
    auto [y_hr_hat, y_lr_hat] = predict(fused.x_hat, model);
    ChangeEnergyMap v_hr = detector_energy(pair.y_hr, y_hr_hat, dcfg);
    ChangeEnergyMap v_lr = detector_energy(pair.y_lr, y_lr_hat, dcfg);
    CHECK(v_hr.data() == out.v_hr.data());
    CHECK(v_lr.data() == out.v_lr.data());
    CHECK(fused.x_hat.data() == out.x_hat.data());
    ChangeMask d_hr = threshold_map(v_hr, resolve_threshold(dcfg, v_hr.dof()));
    CHECK(d_hr == out.d_hr_hat);
  }

  SUBCASE("run_cd is deterministic") {
    CdOutputs again = run_cd(pair.y_hr, pair.y_lr, model, pcfg, dcfg);
    CHECK(again.v_hr.data() == out.v_hr.data());
    CHECK(again.d_lr_hat == out.d_lr_hat);
  }
}

TEST_CASE("no-change pair yields detection fractions at the noise floor") {
  ImageCube ref = make_synthetic_reference(12, 30, 30, 3, 8);
  DegradationModel model = ms_model(12);
  NoiseModel no_noise{std::vector<double>(4, 0.0), std::vector<double>(12, 0.0), 0};
  ChangeSpec empty;
  empty.seed = 21;
  SimulatedPair pair = simulate_pair(ref, empty, model, TemporalConfig::config1, no_noise, 3);

  DetectorConfig dcfg;
  dcfg.method = DetectorMethod::cva;
  dcfg.pfa = 0.01;
  CdOutputs out = run_cd(pair.y_hr, pair.y_lr, model, PipelineConfig{}, dcfg);
  const double frac_hr =
      static_cast<double>(out.d_hr_hat.count_ones()) / static_cast<double>(out.d_hr_hat.pixels());
  const double frac_lr =
      static_cast<double>(out.d_lr_hat.count_ones()) / static_cast<double>(out.d_lr_hat.pixels());
  CHECK(frac_hr <= 0.05);
  CHECK(frac_lr <= 0.05);
}

TEST_CASE("worst case compares the doubly degraded pair") {
  ImageCube ref = make_synthetic_reference(12, 30, 30, 3, 9);
  DegradationModel model = ms_model(12);

  SUBCASE("identical underlying scenes give near-zero energy") {
    ImageCube y_hr = apply_spectral(model.response, ref);
    ImageCube y_lr = decimate(model.spatial, apply_blur(model.spatial, ref));
    DetectorConfig dcfg;
    dcfg.method = DetectorMethod::cva;
    dcfg.pfa = 0.01;
    ChangeEnergyMap v = worst_case_energy(y_hr, y_lr, model, dcfg);
    CHECK(v.rows() == 6);
    CHECK(v.dof() == 4);
    // both sides reduce to L * blurred-decimated ref, so the difference is
    // only blur/decimation commutation residue
    ImageCube a = decimate(model.spatial, apply_blur(model.spatial, y_hr));
    ImageCube b = apply_spectral(model.response, y_lr);
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
      m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    }
    CHECK(m < 1e-10);
  }

  SUBCASE("pan mode reduces to single-band pairs where mad is rejected") {
    SpectralResponse pan = make_pan_response(12, 6);
    DegradationModel pan_model{pan, model.spatial, std::vector<double>(1, 1.0),
                               std::vector<double>(12, 1.0)};
    ImageCube y_hr = apply_spectral(pan, ref);
    ImageCube y_lr = decimate(model.spatial, apply_blur(model.spatial, ref));
    DetectorConfig cva_cfg;
    cva_cfg.method = DetectorMethod::cva;
    cva_cfg.pfa = 0.05;
    ChangeMask wc = run_worst_case(y_hr, y_lr, pan_model, cva_cfg);
    CHECK(wc.rows() == 6);

    DetectorConfig mad_cfg;
    mad_cfg.method = DetectorMethod::mad;
    mad_cfg.pfa = 0.05;
    CHECK_THROWS_WITH_AS(static_cast<void>(run_worst_case(y_hr, y_lr, pan_model, mad_cfg)),
                         doctest::Contains("multi-band"), std::runtime_error);
  }
}

TEST_CASE("pipeline errors carry stage labels") {
  ImageCube y_hr(4, 10, 10);
  ImageCube y_lr(12, 2, 3);  // grid inconsistent with the factor-5 model
  DegradationModel model = ms_model(12);
  DetectorConfig dcfg;
  dcfg.method = DetectorMethod::cva;
  dcfg.pfa = 0.05;
  CHECK_THROWS_WITH_AS(static_cast<void>(run_cd(y_hr, y_lr, model, PipelineConfig{}, dcfg)),
                       doctest::Contains("fusion stage"), std::runtime_error);
}
