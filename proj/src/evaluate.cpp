#include "mrcd/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mrcd/fusion.hpp"
#include "mrcd/kernels.hpp"
#include "mrcd/io.hpp"
#include "mrcd/pipeline.hpp"
#include "mrcd/simulate.hpp"
#include "mrcd/stats.hpp"
#include "mrcd/unmix.hpp"

namespace mrcd {

RocCurve roc(const ChangeEnergyMap& v, const ChangeMask& truth) {
  if (v.rows() != truth.rows() || v.cols() != truth.cols()) {
    throw std::invalid_argument("roc: energy map and truth mask shapes differ");
  }
  const std::size_t n = v.pixels();
  const std::size_t positives = truth.count_ones();
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("roc: truth mask must contain both classes");
  }

  // Sort pixels by energy descending; sweeping the threshold down the sorted
  // list adds pixels to the detection set in blocks of equal energy.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v.at(a) > v.at(b); });

  RocCurve curve;
  curve.points.reserve(n + 2);
  curve.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < n) {
    const double value = v.at(order[i]);
    while (i < n && v.at(order[i]) == value) {
      if (truth.at(order[i])) ++tp;
      else ++fp;
      ++i;
    }
    curve.points.emplace_back(static_cast<double>(fp) / static_cast<double>(negatives),
                              static_cast<double>(tp) / static_cast<double>(positives));
  }
  curve.auc = auc_of(curve.points);
  curve.norm_dist = norm_dist_of(curve.points);
  return curve;
}

double auc_of(const std::vector<std::pair<double, double>>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double dx = points[i].first - points[i - 1].first;
    area += 0.5 * dx * (points[i].second + points[i - 1].second);
  }
  return area;
}

double norm_dist_of(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw std::invalid_argument("norm_dist: degenerate curve");
  // f < 0 below the anti-diagonal pd = 1 - pfa, f > 0 above; walk to the
  // first sign change and interpolate within that segment.
  auto f = [](const std::pair<double, double>& p) { return p.second + p.first - 1.0; };
  double px = points.back().first, py = points.back().second;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double f0 = f(points[i - 1]);
    const double f1 = f(points[i]);
    if (f0 <= 0.0 && f1 >= 0.0) {
      const double denom = f1 - f0;
      const double t = (denom != 0.0) ? -f0 / denom : 0.0;
      px = points[i - 1].first + t * (points[i].first - points[i - 1].first);
      py = points[i - 1].second + t * (points[i].second - points[i - 1].second);
      break;
    }
  }
  const double dx = 1.0 - px;
  return std::sqrt(dx * dx + py * py) / std::sqrt(2.0);
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// "scva7" -> (scva, 7); "cva"/"mad"/"irmad" pass through.
DetectorConfig detector_config_from_name(const std::string& name) {
  DetectorConfig cfg;
  cfg.threshold = 0.0;  // ROC sweeps thresholds itself; satisfy the one-of rule
  if (name.rfind("scva", 0) == 0) {
    cfg.method = DetectorMethod::scva;
    cfg.window = (name.size() > 4) ? std::stoul(name.substr(4)) : 7;
    if (cfg.window % 2 == 0 || cfg.window == 0) {
      throw std::invalid_argument("detector " + name + ": window must be odd");
    }
    return cfg;
  }
  cfg.method = parse_detector_method(name);
  return cfg;
}

/// Upper envelope of a staircase ROC as a function of pfa, then linear
/// interpolation onto the common grid.
std::vector<double> sample_on_grid(const std::vector<std::pair<double, double>>& points,
                                   const std::vector<double>& grid) {
  std::vector<std::pair<double, double>> env;
  env.reserve(points.size());
  for (const auto& pt : points) {
    if (!env.empty() && pt.first == env.back().first) {
      env.back().second = std::max(env.back().second, pt.second);
    } else {
      env.push_back(pt);
    }
  }
  std::vector<double> out(grid.size());
  std::size_t seg = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double x = grid[g];
    while (seg + 1 < env.size() && env[seg + 1].first < x) ++seg;
    if (x <= env.front().first) {
      out[g] = env.front().second;
    } else if (x >= env.back().first) {
      out[g] = env.back().second;
    } else {
      const auto& a = env[seg];
      const auto& b = env[seg + 1];
      const double t = (b.first > a.first) ? (x - a.first) / (b.first - a.first) : 1.0;
      out[g] = a.second + t * (b.second - a.second);
    }
  }
  return out;
}

}  // namespace

ExperimentManifest ExperimentManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open manifest");
  ExperimentManifest m;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const std::size_t b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const std::size_t e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) continue;
    try {
      if (key == "ref") m.ref_path = value;
      else if (key == "mode") m.mode = value;
      else if (key == "k") m.k = std::stoul(value);
      else if (key == "regions") m.regions = std::stoul(value);
      else if (key == "region_min") m.region_min = std::stoul(value);
      else if (key == "region_max") m.region_max = std::stoul(value);
      else if (key == "configs") {
        m.configs.clear();
        for (const std::string& c : split(value, ',')) m.configs.push_back(std::stoi(c));
      } else if (key == "detectors") {
        m.detectors = split(value, ',');
      } else if (key == "seed") m.seed = std::stoull(value);
      else if (key == "factor") m.factor = std::stoul(value);
      else if (key == "kernel_size") m.kernel_size = std::stoul(value);
      else if (key == "kernel_sigma") m.kernel_sigma = std::stod(value);
      else if (key == "lambda") m.lambda_reg = std::stod(value);
      else if (key == "snr_db") {
        m.snr_db = std::stod(value);
        m.noiseless = false;
      } else if (key == "pan_bands") m.pan_bands = std::stoul(value);
      else if (key == "fusion_max_iter") m.fusion_max_iter = std::stoul(value);
      else if (key == "fusion_tol") m.fusion_tol = std::stod(value);
      else if (key == "curve_points") m.curve_points = std::stoul(value);
      else throw std::runtime_error(path + ": unknown manifest key: " + key);
    } catch (const std::invalid_argument&) {
      throw std::runtime_error(path + ": malformed value for key '" + key + "': " + value);
    }
  }
  m.validate();
  return m;
}

void ExperimentManifest::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot write manifest");
  out << "ref=" << ref_path << "\n"
      << "mode=" << mode << "\n"
      << "k=" << k << "\n"
      << "regions=" << regions << "\n"
      << "region_min=" << region_min << "\n"
      << "region_max=" << region_max << "\n";
  out << "configs=";
  for (std::size_t i = 0; i < configs.size(); ++i) out << (i ? "," : "") << configs[i];
  out << "\ndetectors=";
  for (std::size_t i = 0; i < detectors.size(); ++i) out << (i ? "," : "") << detectors[i];
  out << "\nseed=" << seed << "\n"
      << "factor=" << factor << "\n"
      << "kernel_size=" << kernel_size << "\n"
      << "kernel_sigma=" << kernel_sigma << "\n"
      << "lambda=" << lambda_reg << "\n";
  if (!noiseless) out << "snr_db=" << snr_db << "\n";
  if (pan_bands != 0) out << "pan_bands=" << pan_bands << "\n";
  out << "fusion_max_iter=" << fusion_max_iter << "\n"
      << "fusion_tol=" << fusion_tol << "\n"
      << "curve_points=" << curve_points << "\n";
}

void ExperimentManifest::validate() const {
  if (ref_path.empty()) throw std::invalid_argument("manifest: ref path is required");
  if (mode != "ms" && mode != "pan") throw std::invalid_argument("manifest: mode must be ms|pan");
  if (regions == 0) throw std::invalid_argument("manifest: regions must be positive");
  if (region_min == 0 || region_min > region_max) {
    throw std::invalid_argument("manifest: bad region side range");
  }
  if (configs.empty()) throw std::invalid_argument("manifest: configs must not be empty");
  for (int c : configs) {
    if (c != 1 && c != 2) throw std::invalid_argument("manifest: configs must be 1 or 2");
  }
  if (detectors.empty()) throw std::invalid_argument("manifest: detectors must not be empty");
  if (mode == "pan") {
    for (const std::string& d : detectors) {
      if (d == "mad" || d == "irmad") {
        throw std::invalid_argument(
            "manifest: " + d + " requires multi-band images and cannot run in pan mode");
      }
    }
  }
  for (const std::string& d : detectors) detector_config_from_name(d);  // syntax check
  if (curve_points < 2) throw std::invalid_argument("manifest: curve_points must be >= 2");
  if (factor == 0) throw std::invalid_argument("manifest: factor must be positive");
}

const ReportRow& ExperimentReport::row(const std::string& detector,
                                       const std::string& map_type) const {
  for (const ReportRow& r : rows) {
    if (r.detector == detector && r.map_type == map_type) return r;
  }
  throw std::out_of_range("report row not found: " + detector + "/" + map_type);
}

std::string ExperimentReport::to_csv() const {
  std::ostringstream out;
  out.precision(9);
  out << std::fixed;
  out << "# hr maps are scored against the HR truth mask; lr, alr and wc maps against the LR "
         "truth mask\n";
  out << "detector,map,auc,norm_dist\n";
  for (const ReportRow& r : rows) {
    out << r.detector << "," << r.map_type << "," << r.auc << "," << r.norm_dist << "\n";
  }
  return out.str();
}

void ExperimentReport::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot write report");
  out << to_csv();
}

void ExperimentReport::write_curves(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [key, pts] : curves) {
    const std::string path = dir + "/" + key.first + "_" + key.second + ".txt";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error(path + ": cannot write curve");
    out.precision(9);
    out << std::fixed;
    for (const auto& [pfa, pd] : pts) out << pfa << " " << pd << "\n";
  }
}

ExperimentReport run_experiment(const ExperimentManifest& manifest) {
  manifest.validate();
  const ImageCube ref = io::read_cube(manifest.ref_path);

  const std::size_t k = (manifest.k != 0) ? manifest.k : estimate_k(ref);

  // Degradation model shared by every trial.
  SpatialDegradation spatial(make_gaussian_kernel(manifest.kernel_size, manifest.kernel_sigma),
                             manifest.kernel_size, manifest.factor, manifest.factor);
  const std::size_t mb = ref.bands();
  SpectralResponse response =
      (manifest.mode == "pan")
          ? make_pan_response(mb, manifest.pan_bands != 0 ? manifest.pan_bands : mb / 2)
          : make_ms_response(mb, default_ms_groups(mb));

  // Deterministic seed chain: unmix, then one sub-seed per trial component.
  std::uint64_t chain = manifest.seed;
  const std::uint64_t unmix_seed = stats::splitmix64(chain);
  const UnmixResult um = unmix(ref, k, unmix_seed);

  const std::vector<double> grid = [&] {
    std::vector<double> g(manifest.curve_points);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = static_cast<double>(i) / static_cast<double>(g.size() - 1);
    }
    return g;
  }();

  struct Accum {
    std::vector<double> pd_sum;
    std::size_t count = 0;
  };
  std::map<std::pair<std::string, std::string>, Accum> accum;
  const std::vector<std::string> map_types = {"hr", "lr", "alr", "wc"};
  for (const std::string& d : manifest.detectors) {
    for (const std::string& mt : map_types) {
      accum[{d, mt}].pd_sum.assign(grid.size(), 0.0);
    }
  }

  ExperimentReport report;
  for (std::size_t trial = 0; trial < manifest.regions; ++trial) {
    const std::uint64_t region_seed = stats::splitmix64(chain);
    const std::uint64_t rule_seed = stats::splitmix64(chain);
    const std::uint64_t spec_seed = stats::splitmix64(chain);
    const std::uint64_t noise_seed = stats::splitmix64(chain);

    ChangeRegion region;
    region.pixels = random_rectangle_region(ref.rows(), ref.cols(), manifest.region_min,
                                            manifest.region_max, region_seed);
    {
      std::uint64_t s = rule_seed;
      region.rule = static_cast<ChangeRule>(stats::splitmix64(s) % 3);
    }

    for (int config : manifest.configs) {
      try {
        ChangeSpec spec{{region}, spec_seed};
        NoiseModel no_noise{std::vector<double>(response.out_bands(), 0.0),
                            std::vector<double>(mb, 0.0), 0};
        DegradationModel model{response, spatial, std::vector<double>(response.out_bands(), 1.0),
                               std::vector<double>(mb, 1.0)};
        SimulatedPair pair = simulate_pair_from_unmix(
            um, ref.rows(), ref.cols(), spec, model,
            config == 1 ? TemporalConfig::config1 : TemporalConfig::config2, no_noise);

        if (!manifest.noiseless) {
          // Per-band variances from the clean signal power at the given SNR.
          const double snr_lin = std::pow(10.0, manifest.snr_db / 10.0);
          NoiseModel noise;
          noise.seed = noise_seed ^ static_cast<std::uint64_t>(config);
          noise.lambda_hr.resize(pair.y_hr.bands());
          for (std::size_t b = 0; b < pair.y_hr.bands(); ++b) {
            const double power = kernels::sumsq(pair.y_hr.band(b), pair.y_hr.pixels()) /
                                 static_cast<double>(pair.y_hr.pixels());
            noise.lambda_hr[b] = power / snr_lin;
          }
          noise.lambda_lr.resize(pair.y_lr.bands());
          for (std::size_t b = 0; b < pair.y_lr.bands(); ++b) {
            const double power = kernels::sumsq(pair.y_lr.band(b), pair.y_lr.pixels()) /
                                 static_cast<double>(pair.y_lr.pixels());
            noise.lambda_lr[b] = power / snr_lin;
          }
          pair.y_hr = add_noise(noise, pair.y_hr, NoiseSide::HR);
          pair.y_lr = add_noise(noise, pair.y_lr, NoiseSide::LR);
          model.lambda_hr = noise.lambda_hr;
          model.lambda_lr = noise.lambda_lr;
          for (double& v : model.lambda_hr) v = std::max(v, 1e-12);
          for (double& v : model.lambda_lr) v = std::max(v, 1e-12);
        }

        // One fusion per pair, shared by all detectors.
        FusionProblem problem{pair.y_hr,      pair.y_lr,      model.response,
                              model.spatial,  model.lambda_hr, model.lambda_lr,
                              manifest.lambda_reg};
        FusionConfig fcfg{manifest.fusion_max_iter, manifest.fusion_tol};
        const FusionResult fused = fuse(problem, fcfg);
        const auto [y_hr_hat, y_lr_hat] = predict(fused.x_hat, model);

        const ImageCube wc_hr = decimate(model.spatial, apply_blur(model.spatial, pair.y_hr));
        const ImageCube wc_lr = apply_spectral(model.response, pair.y_lr);

        // Stage the whole trial, then commit: a failure in any detector must
        // not leave the averages lopsided across detectors.
        std::map<std::pair<std::string, std::string>, std::vector<double>> staged;
        for (const std::string& dname : manifest.detectors) {
          const DetectorConfig dcfg = detector_config_from_name(dname);
          const ChangeEnergyMap v_hr = detector_energy(pair.y_hr, y_hr_hat, dcfg);
          const ChangeEnergyMap v_lr = detector_energy(pair.y_lr, y_lr_hat, dcfg);
          const ChangeEnergyMap v_alr = alr_energy(v_hr, model.spatial);
          const ChangeEnergyMap v_wc = detector_energy(wc_hr, wc_lr, dcfg);

          const RocCurve r_hr = roc(v_hr, pair.d_hr);
          const RocCurve r_lr = roc(v_lr, pair.d_lr);
          const RocCurve r_alr = roc(v_alr, pair.d_lr);
          const RocCurve r_wc = roc(v_wc, pair.d_lr);

          const std::vector<const RocCurve*> rc = {&r_hr, &r_lr, &r_alr, &r_wc};
          for (std::size_t mi = 0; mi < map_types.size(); ++mi) {
            staged[{dname, map_types[mi]}] = sample_on_grid(rc[mi]->points, grid);
          }
        }
        for (auto& [key, pd] : staged) {
          Accum& acc = accum[key];
          for (std::size_t g = 0; g < grid.size(); ++g) acc.pd_sum[g] += pd[g];
          acc.count += 1;
        }
        report.trials_run += 1;
      } catch (const std::exception& e) {
        report.failures.push_back("trial " + std::to_string(trial) + " config " +
                                  std::to_string(config) + ": " + e.what());
      }
    }
  }

  for (const std::string& dname : manifest.detectors) {
    for (const std::string& mt : map_types) {
      const Accum& acc = accum[{dname, mt}];
      if (acc.count == 0) continue;
      std::vector<std::pair<double, double>> mean_curve(grid.size());
      for (std::size_t g = 0; g < grid.size(); ++g) {
        mean_curve[g] = {grid[g], acc.pd_sum[g] / static_cast<double>(acc.count)};
      }
      ReportRow row;
      row.detector = dname;
      row.map_type = mt;
      row.auc = auc_of(mean_curve);
      row.norm_dist = norm_dist_of(mean_curve);
      report.rows.push_back(row);
      report.curves[{dname, mt}] = std::move(mean_curve);
    }
  }
  return report;
}

}  // namespace mrcd
