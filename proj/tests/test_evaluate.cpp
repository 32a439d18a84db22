#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "mrcd/evaluate.hpp"
#include "mrcd/io.hpp"
#include "mrcd/simulate.hpp"

using namespace mrcd;

namespace {

ChangeEnergyMap energy_from(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  ChangeEnergyMap e(rows, cols, 1);
  e.data() = v;
  return e;
}

/// Exhaustive oracle: evaluate (pfa, pd) at every threshold between
/// consecutive sorted energies and integrate by trapezoid.
double auc_exhaustive(const std::vector<double>& v, const std::vector<std::uint8_t>& truth) {
  std::vector<double> taus = v;
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  std::vector<std::pair<double, double>> pts = {{0.0, 0.0}};
  const double pos = static_cast<double>(std::count(truth.begin(), truth.end(), 1));
  const double neg = static_cast<double>(truth.size()) - pos;
  for (auto it = taus.rbegin(); it != taus.rend(); ++it) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] >= *it) (truth[i] ? tp : fp) += 1;
    }
    pts.emplace_back(fp / neg, tp / pos);
  }
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += 0.5 * (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second);
  }
  return area;
}

}  // namespace

TEST_CASE("perfectly separating energies give unit auc") {
  ChangeEnergyMap v = energy_from({0.1, 0.2, 5.0, 6.0}, 2, 2);
  ChangeMask truth(2, 2, {0, 0, 1, 1});
  RocCurve curve = roc(v, truth);
  CHECK(curve.auc == doctest::Approx(1.0));
  CHECK(curve.points.front() == std::pair<double, double>{0.0, 0.0});
  CHECK(curve.points.back() == std::pair<double, double>{1.0, 1.0});
}

TEST_CASE("hand-computed 4-pixel curves match the exhaustive oracle") {
  SUBCASE("monotone energies") {
    ChangeEnergyMap v = energy_from({1, 2, 3, 4}, 2, 2);
    ChangeMask truth(2, 2, {0, 0, 1, 1});
    CHECK(roc(v, truth).auc == doctest::Approx(1.0));
    CHECK(roc(v, truth).auc ==
          doctest::Approx(auc_exhaustive({1, 2, 3, 4}, {0, 0, 1, 1})));
  }
  SUBCASE("swapped middle pair") {
    ChangeEnergyMap v = energy_from({1, 3, 2, 4}, 2, 2);
    ChangeMask truth(2, 2, {0, 0, 1, 1});
    CHECK(roc(v, truth).auc == doctest::Approx(0.75));
    CHECK(roc(v, truth).auc ==
          doctest::Approx(auc_exhaustive({1, 3, 2, 4}, {0, 0, 1, 1})));
  }
}

TEST_CASE("random energies on balanced truth give auc near one half") {
  const std::size_t n = 100000;
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  ChangeEnergyMap v(250, 400, 1);
  for (double& x : v.data()) x = dist(rng);
  std::vector<std::uint8_t> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = (i % 2 == 0) ? 1 : 0;
  ChangeMask truth(250, 400, std::move(t));
  CHECK(roc(v, truth).auc == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("roc is invariant under strictly increasing transforms") {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> dist(0.0, 3.0);
  ChangeEnergyMap v(10, 10, 1);
  for (double& x : v.data()) x = dist(rng);
  std::vector<std::uint8_t> t(100);
  for (std::size_t i = 0; i < 100; ++i) t[i] = (i % 3 == 0) ? 1 : 0;
  ChangeMask truth(10, 10, std::move(t));

  ChangeEnergyMap w(10, 10, 1);
  for (std::size_t p = 0; p < 100; ++p) w.at(p) = std::exp(v.at(p)) - 0.5;
  RocCurve a = roc(v, truth);
  RocCurve b = roc(w, truth);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].first == doctest::Approx(b.points[i].first));
    CHECK(a.points[i].second == doctest::Approx(b.points[i].second));
  }
  CHECK(a.auc == doctest::Approx(b.auc));
}

TEST_CASE("roc output is a monotone staircase with valid metrics") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  ChangeEnergyMap v(20, 20, 1);
  for (double& x : v.data()) x = dist(rng);
  std::vector<std::uint8_t> t(400, 0);
  for (std::size_t i = 0; i < 120; ++i) t[i * 3] = 1;
  ChangeMask truth(20, 20, std::move(t));
  RocCurve curve = roc(v, truth);
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    CHECK(curve.points[i].first >= curve.points[i - 1].first);
    CHECK(curve.points[i].second >= curve.points[i - 1].second);
  }
  CHECK(curve.auc >= 0.0);
  CHECK(curve.auc <= 1.0);
  CHECK(curve.norm_dist >= 0.0);
  CHECK(curve.norm_dist <= 1.0);
}

TEST_CASE("degenerate truth masks are rejected") {
  ChangeEnergyMap v = energy_from({1, 2, 3, 4}, 2, 2);
  CHECK_THROWS(roc(v, ChangeMask(2, 2, {0, 0, 0, 0})));
  CHECK_THROWS(roc(v, ChangeMask(2, 2, {1, 1, 1, 1})));
  CHECK_THROWS(roc(v, ChangeMask(1, 4, {0, 1, 0, 1})));
}

TEST_CASE("norm_dist geometry") {
  SUBCASE("diagonal curve crosses at the center") {
    std::vector<std::pair<double, double>> diag = {{0, 0}, {1, 1}};
    CHECK(auc_of(diag) == doctest::Approx(0.5));
    CHECK(norm_dist_of(diag) == doctest::Approx(0.5));
  }
  SUBCASE("ideal curve scores one on both metrics") {
    std::vector<std::pair<double, double>> ideal = {{0, 0}, {0, 1}, {1, 1}};
    CHECK(auc_of(ideal) == doctest::Approx(1.0));
    CHECK(norm_dist_of(ideal) == doctest::Approx(1.0));
  }
  SUBCASE("4-pixel staircase crossing matches the closed-form segment intersection") {
    // points from the swapped-pair case: (0,0) (0,.5) (.5,.5) (.5,1) (1,1)
    std::vector<std::pair<double, double>> pts = {{0, 0}, {0, 0.5}, {0.5, 0.5}, {0.5, 1}, {1, 1}};
    // anti-diagonal pd = 1 - pfa crosses segment (0,.5)-(:.5,.5): pfa + pd = 1
    // -> crossing at (0.5, 0.5) exactly
    const double expect = std::sqrt(0.25 + 0.25) / std::sqrt(2.0);
    CHECK(norm_dist_of(pts) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("manifest save/load round-trip preserves every field") {
  ExperimentManifest m;
  m.ref_path = "/tmp/ref.cube";
  m.mode = "pan";
  m.k = 4;
  m.regions = 7;
  m.region_min = 2;
  m.region_max = 9;
  m.configs = {2};
  m.detectors = {"cva", "scva5"};
  m.seed = 777;
  m.factor = 5;
  m.kernel_size = 5;
  m.kernel_sigma = 1.25;
  m.lambda_reg = 2e-4;
  m.snr_db = 25.0;
  m.noiseless = false;
  m.pan_bands = 6;
  m.curve_points = 128;

  const std::string path =
      (std::filesystem::temp_directory_path() / "mrcd_manifest_test.txt").string();
  m.save(path);
  ExperimentManifest back = ExperimentManifest::load(path);
  CHECK(back.ref_path == m.ref_path);
  CHECK(back.mode == m.mode);
  CHECK(back.k == m.k);
  CHECK(back.regions == m.regions);
  CHECK(back.region_min == m.region_min);
  CHECK(back.region_max == m.region_max);
  CHECK(back.configs == m.configs);
  CHECK(back.detectors == m.detectors);
  CHECK(back.seed == m.seed);
  CHECK(back.kernel_sigma == m.kernel_sigma);
  CHECK(back.lambda_reg == m.lambda_reg);
  CHECK(back.snr_db == m.snr_db);
  CHECK(back.noiseless == m.noiseless);
  CHECK(back.pan_bands == m.pan_bands);
  CHECK(back.curve_points == m.curve_points);
  std::remove(path.c_str());
}

TEST_CASE("manifest validation rejects bad combinations") {
  ExperimentManifest m;
  m.ref_path = "x";
  m.validate();
  SUBCASE("mad in pan mode") {
    m.mode = "pan";
    m.detectors = {"cva", "mad"};
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("multi-band"), std::invalid_argument);
  }
  SUBCASE("unknown detector") {
    m.detectors = {"srad"};
    CHECK_THROWS(m.validate());
  }
  SUBCASE("even scva window") {
    m.detectors = {"scva4"};
    CHECK_THROWS(m.validate());
  }
  SUBCASE("bad config") {
    m.configs = {3};
    CHECK_THROWS(m.validate());
  }
  SUBCASE("bad region range") {
    m.region_min = 9;
    m.region_max = 3;
    CHECK_THROWS(m.validate());
  }
}

TEST_CASE("desk-scale experiment smoke run") {
  const std::string dir =
      (std::filesystem::temp_directory_path() / "mrcd_eval_smoke").string();
  std::filesystem::create_directories(dir);
  ImageCube ref = make_synthetic_reference(12, 30, 30, 3, 4);
  io::write_cube(ref, dir + "/ref.cube", io::CubeFormat::flat_binary);

  ExperimentManifest m;
  m.ref_path = dir + "/ref.cube";
  m.mode = "ms";
  m.k = 3;
  m.regions = 2;
  m.region_min = 3;
  m.region_max = 8;
  m.configs = {1, 2};
  m.detectors = {"cva", "scva3"};
  m.seed = 5;
  m.curve_points = 64;

  ExperimentReport report = run_experiment(m);
  CHECK(report.trials_run == 4);
  CHECK(report.failures.empty());
  CHECK(report.rows.size() == 8);  // 2 detectors x 4 map types

  for (const ReportRow& row : report.rows) {
    CHECK(row.auc >= 0.0);
    CHECK(row.auc <= 1.0);
    CHECK(row.norm_dist >= 0.0);
    CHECK(row.norm_dist <= 1.0);
  }
  // row lookup and csv shape
  CHECK(report.row("cva", "alr").auc > 0.0);
  CHECK_THROWS(report.row("cva", "nope"));
  const std::string csv = report.to_csv();
  CHECK(csv.find("detector,map,auc,norm_dist") != std::string::npos);
  CHECK(csv.find("scva3,wc,") != std::string::npos);

  // curve files are two-column text on the common grid
  report.write_curves(dir + "/curves");
  io::TextMatrix curve = io::read_text_matrix(dir + "/curves/cva_hr.txt");
  CHECK(curve.cols == 2);
  CHECK(curve.rows == 64);
  CHECK(curve.values[0] == 0.0);
  CHECK(curve.values[curve.values.size() - 2] == doctest::Approx(1.0));

  // averaged curves lie within the per-trial envelope at the endpoints
  const auto& mean_curve = report.curves.at({"cva", "hr"});
  CHECK(mean_curve.front().second >= 0.0);
  CHECK(mean_curve.back().second == doctest::Approx(1.0));

  std::filesystem::remove_all(dir);
}

TEST_CASE("75 regions under both configurations give 150 simulated pairs") {
  const std::string dir =
      (std::filesystem::temp_directory_path() / "mrcd_eval_count").string();
  std::filesystem::create_directories(dir);
  io::write_cube(make_synthetic_reference(8, 20, 20, 3, 11), dir + "/ref.cube",
                 io::CubeFormat::flat_binary);
  ExperimentManifest m;
  m.ref_path = dir + "/ref.cube";
  m.k = 3;
  m.regions = 75;
  m.region_min = 1;
  m.region_max = 4;
  m.configs = {1, 2};
  m.detectors = {"cva"};
  m.seed = 13;
  m.curve_points = 32;
  ExperimentReport report = run_experiment(m);
  CHECK(report.trials_run == 150);
  CHECK(report.failures.empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("experiment reports are bit-identical across runs") {
  const std::string dir =
      (std::filesystem::temp_directory_path() / "mrcd_eval_det").string();
  std::filesystem::create_directories(dir);
  ImageCube ref = make_synthetic_reference(10, 20, 20, 3, 6);
  io::write_cube(ref, dir + "/ref.cube", io::CubeFormat::flat_binary);

  ExperimentManifest m;
  m.ref_path = dir + "/ref.cube";
  m.k = 3;
  m.regions = 2;
  m.region_min = 2;
  m.region_max = 6;
  m.detectors = {"cva"};
  m.seed = 9;
  m.curve_points = 32;
  m.snr_db = 30.0;
  m.noiseless = false;

  ExperimentReport a = run_experiment(m);
  ExperimentReport b = run_experiment(m);
  CHECK(a.to_csv() == b.to_csv());
  REQUIRE(a.curves.size() == b.curves.size());
  for (const auto& [key, pts] : a.curves) {
    const auto& other = b.curves.at(key);
    REQUIRE(pts.size() == other.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(pts[i].first == other[i].first);
      CHECK(pts[i].second == other[i].second);
    }
  }
  std::filesystem::remove_all(dir);
}
