// mrcd: multi-resolution change detection between optical images of
// dissimilar spatial and spectral resolutions (fuse / detect / simulate /
// run / evaluate).

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mrcd/detect.hpp"
#include "mrcd/evaluate.hpp"
#include "mrcd/fusion.hpp"
#include "mrcd/io.hpp"
#include "mrcd/pipeline.hpp"
#include "mrcd/simulate.hpp"
#include "mrcd/stats.hpp"
#include "mrcd/unmix.hpp"

namespace {

using namespace mrcd;

/// "gauss5", "gauss:5:1.0" or a text-matrix path.
std::pair<std::vector<double>, std::size_t> load_kernel(const std::string& spec) {
  if (spec.rfind("gauss", 0) == 0) {
    std::size_t size = 5;
    double sigma = 1.0;
    std::string rest = spec.substr(5);
    if (!rest.empty() && rest[0] == ':') {
      const auto second = rest.find(':', 1);
      size = std::stoul(rest.substr(1, second - 1));
      if (second != std::string::npos) sigma = std::stod(rest.substr(second + 1));
    } else if (!rest.empty()) {
      size = std::stoul(rest);
    }
    return {make_gaussian_kernel(size, sigma), size};
  }
  io::TextMatrix m = io::read_text_matrix(spec);
  if (m.rows != m.cols) throw std::runtime_error(spec + ": kernel must be square");
  return {m.values, m.rows};
}

/// "pan:43", "ms", "ms:0-10,10-20,20-30,30-40" or a text-matrix path.
SpectralResponse load_response(const std::string& spec, std::size_t m_bands) {
  if (spec.rfind("pan", 0) == 0) {
    std::size_t n_avg = m_bands / 2;
    if (spec.size() > 4 && spec[3] == ':') n_avg = std::stoul(spec.substr(4));
    return make_pan_response(m_bands, n_avg);
  }
  if (spec.rfind("ms", 0) == 0) {
    if (spec.size() <= 3) return make_ms_response(m_bands, default_ms_groups(m_bands));
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    std::stringstream ss(spec.substr(3));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto dash = item.find('-');
      if (dash == std::string::npos) throw std::runtime_error("bad ms group: " + item);
      groups.emplace_back(std::stoul(item.substr(0, dash)), std::stoul(item.substr(dash + 1)));
    }
    return make_ms_response(m_bands, groups);
  }
  io::TextMatrix m = io::read_text_matrix(spec);
  if (m.cols != m_bands) {
    throw std::runtime_error(spec + ": response has " + std::to_string(m.cols) +
                             " columns, cube has " + std::to_string(m_bands) + " bands");
  }
  return SpectralResponse(m.rows, m.cols, m.values);
}

std::vector<double> load_variances(const std::string& spec, std::size_t bands) {
  if (spec.rfind("const:", 0) == 0) {
    return std::vector<double>(bands, std::stod(spec.substr(6)));
  }
  io::TextMatrix m = io::read_text_matrix(spec);
  if (m.values.size() != bands) {
    throw std::runtime_error(spec + ": expected " + std::to_string(bands) + " variances");
  }
  return m.values;
}

ImageCube energy_to_cube(const ChangeEnergyMap& v) {
  ImageCube cube(1, v.rows(), v.cols());
  cube.data() = v.data();
  return cube;
}

/// key=value model description: response=..., kernel=..., factor=...,
/// lambda=..., noise_hr=..., noise_lr=...
DegradationModel load_model(const std::string& path, std::size_t m_bands, double& lambda_reg) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open model config");
  std::string response_spec, kernel_spec = "gauss:5:1.0";
  std::string noise_hr = "const:1", noise_lr = "const:1";
  std::size_t factor_r = 5, factor_c = 5;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) continue;
    if (key == "response") response_spec = value;
    else if (key == "kernel") kernel_spec = value;
    else if (key == "factor") factor_r = factor_c = std::stoul(value);
    else if (key == "factor_r") factor_r = std::stoul(value);
    else if (key == "factor_c") factor_c = std::stoul(value);
    else if (key == "lambda") lambda_reg = std::stod(value);
    else if (key == "noise_hr") noise_hr = value;
    else if (key == "noise_lr") noise_lr = value;
    else throw std::runtime_error(path + ": unknown model key: " + key);
  }
  if (response_spec.empty()) throw std::runtime_error(path + ": model must name a response");
  auto [kernel, ksize] = load_kernel(kernel_spec);
  SpectralResponse response = load_response(response_spec, m_bands);
  const std::size_t out_bands = response.out_bands();
  return DegradationModel{std::move(response),
                          SpatialDegradation(std::move(kernel), ksize, factor_r, factor_c),
                          load_variances(noise_hr, out_bands),
                          load_variances(noise_lr, m_bands)};
}

int cmd_fuse(const std::string& hr, const std::string& lr, const std::string& response_spec,
             const std::string& kernel_spec, std::size_t factor, double lambda,
             const std::string& noise_hr, const std::string& noise_lr, std::size_t max_iter,
             double tol, const std::string& out) {
  ImageCube y_hr = io::read_cube(hr);
  ImageCube y_lr = io::read_cube(lr);
  auto [kernel, ksize] = load_kernel(kernel_spec);
  SpectralResponse response = load_response(response_spec, y_lr.bands());
  FusionProblem problem{y_hr,
                        y_lr,
                        response,
                        SpatialDegradation(kernel, ksize, factor, factor),
                        load_variances(noise_hr, response.out_bands()),
                        load_variances(noise_lr, y_lr.bands()),
                        lambda};
  FusionResult result = fuse(problem, FusionConfig{max_iter, tol});
  io::write_cube(result.x_hat, out, io::CubeFormat::flat_binary);
  std::cout << "fused in " << result.iterations << " iterations ("
            << (result.converged ? "converged" : "max-iter") << "), objective "
            << result.objective_trace.back() << "\n";
  return 0;
}

int cmd_detect(const std::string& a_path, const std::string& b_path, const std::string& method,
               std::size_t window, std::optional<double> pfa, std::optional<double> threshold,
               const std::string& out_mask, const std::string& out_energy) {
  ImageCube a = io::read_cube(a_path);
  ImageCube b = io::read_cube(b_path);
  DetectorConfig cfg;
  cfg.method = parse_detector_method(method);
  cfg.window = window;
  cfg.pfa = pfa;
  cfg.threshold = threshold;
  if (!cfg.pfa && !cfg.threshold) cfg.pfa = 0.05;
  cfg.validate();
  ChangeEnergyMap v = detector_energy(a, b, cfg);
  ChangeMask mask = threshold_map(v, resolve_threshold(cfg, v.dof()));
  if (!out_mask.empty()) io::write_mask(mask, out_mask);
  if (!out_energy.empty()) io::write_cube(energy_to_cube(v), out_energy,
                                          io::CubeFormat::flat_binary);
  std::cout << "detected " << mask.count_ones() << " / " << mask.pixels()
            << " change pixels\n";
  return 0;
}

int cmd_simulate(const std::string& ref_path, std::size_t regions, std::size_t region_min,
                 std::size_t region_max, std::size_t factor, const std::string& kernel_spec,
                 const std::string& mode, int config, std::uint64_t seed, std::size_t k,
                 double snr_db, const std::string& out_dir) {
  ImageCube ref = io::read_cube(ref_path);
  auto [kernel, ksize] = load_kernel(kernel_spec);
  SpatialDegradation spatial(kernel, ksize, factor, factor);
  SpectralResponse response = (mode == "pan")
                                  ? make_pan_response(ref.bands(), ref.bands() / 2)
                                  : make_ms_response(ref.bands(), default_ms_groups(ref.bands()));
  DegradationModel model{response, spatial, std::vector<double>(response.out_bands(), 1.0),
                         std::vector<double>(ref.bands(), 1.0)};

  std::uint64_t chain = seed;
  ChangeSpec spec;
  spec.seed = stats::splitmix64(chain);
  for (std::size_t r = 0; r < regions; ++r) {
    ChangeRegion region;
    region.pixels = random_rectangle_region(ref.rows(), ref.cols(), region_min, region_max,
                                            stats::splitmix64(chain));
    region.rule = static_cast<ChangeRule>(stats::splitmix64(chain) % 3);
    spec.regions.push_back(std::move(region));
  }

  NoiseModel noise{std::vector<double>(response.out_bands(), 0.0),
                   std::vector<double>(ref.bands(), 0.0), stats::splitmix64(chain)};
  SimulatedPair pair = simulate_pair(
      ref, spec, model, config == 1 ? TemporalConfig::config1 : TemporalConfig::config2, noise,
      k);

  if (snr_db > 0.0) {
    const double snr_lin = std::pow(10.0, snr_db / 10.0);
    NoiseModel n2;
    n2.seed = noise.seed;
    for (std::size_t b = 0; b < pair.y_hr.bands(); ++b) {
      double power = 0.0;
      for (std::size_t p = 0; p < pair.y_hr.pixels(); ++p) {
        power += pair.y_hr.at(b, p) * pair.y_hr.at(b, p);
      }
      n2.lambda_hr.push_back(power / static_cast<double>(pair.y_hr.pixels()) / snr_lin);
    }
    for (std::size_t b = 0; b < pair.y_lr.bands(); ++b) {
      double power = 0.0;
      for (std::size_t p = 0; p < pair.y_lr.pixels(); ++p) {
        power += pair.y_lr.at(b, p) * pair.y_lr.at(b, p);
      }
      n2.lambda_lr.push_back(power / static_cast<double>(pair.y_lr.pixels()) / snr_lin);
    }
    pair.y_hr = add_noise(n2, pair.y_hr, NoiseSide::HR);
    pair.y_lr = add_noise(n2, pair.y_lr, NoiseSide::LR);
  }

  std::filesystem::create_directories(out_dir);
  io::write_cube(pair.y_hr, out_dir + "/y_hr.cube", io::CubeFormat::flat_binary);
  io::write_cube(pair.y_lr, out_dir + "/y_lr.cube", io::CubeFormat::flat_binary);
  io::write_cube(pair.x_t1, out_dir + "/x_t1.cube", io::CubeFormat::flat_binary);
  io::write_cube(pair.x_t2, out_dir + "/x_t2.cube", io::CubeFormat::flat_binary);
  io::write_mask(pair.d_hr, out_dir + "/d_hr.pgm");
  io::write_mask(pair.d_lr, out_dir + "/d_lr.pgm");

  std::ofstream manifest(out_dir + "/manifest.txt", std::ios::trunc);
  manifest << "ref=" << ref_path << "\n"
           << "mode=" << mode << "\n"
           << "regions=" << regions << "\n"
           << "region_min=" << region_min << "\n"
           << "region_max=" << region_max << "\n"
           << "factor=" << factor << "\n"
           << "kernel=" << kernel_spec << "\n"
           << "config=" << config << "\n"
           << "seed=" << seed << "\n"
           << "k=" << k << "\n"
           << "snr_db=" << snr_db << "\n";
  for (std::size_t r = 0; r < spec.regions.size(); ++r) {
    manifest << "region" << r << "_rule=" << change_rule_name(spec.regions[r].rule) << "\n"
             << "region" << r << "_pixels=" << spec.regions[r].pixels.size() << "\n";
  }
  std::cout << "wrote simulated pair to " << out_dir << "\n";
  return 0;
}

int cmd_run(const std::string& hr, const std::string& lr, const std::string& model_path,
            const std::string& method, std::size_t window, double pfa,
            const std::string& out_dir) {
  ImageCube y_hr = io::read_cube(hr);
  ImageCube y_lr = io::read_cube(lr);
  double lambda_reg = 1e-4;
  DegradationModel model = load_model(model_path, y_lr.bands(), lambda_reg);

  DetectorConfig dcfg;
  dcfg.method = parse_detector_method(method);
  dcfg.window = window;
  dcfg.pfa = pfa;

  PipelineConfig pcfg;
  pcfg.lambda_reg = lambda_reg;
  CdOutputs out = run_cd(y_hr, y_lr, model, pcfg, dcfg);
  ChangeMask wc = run_worst_case(y_hr, y_lr, model, dcfg);

  std::filesystem::create_directories(out_dir);
  io::write_cube(out.x_hat, out_dir + "/x_hat.cube", io::CubeFormat::flat_binary);
  io::write_cube(energy_to_cube(out.v_hr), out_dir + "/v_hr.cube", io::CubeFormat::flat_binary);
  io::write_cube(energy_to_cube(out.v_lr), out_dir + "/v_lr.cube", io::CubeFormat::flat_binary);
  io::write_mask(out.d_hr_hat, out_dir + "/d_hr_hat.pgm");
  io::write_mask(out.d_lr_hat, out_dir + "/d_lr_hat.pgm");
  io::write_mask(out.d_alr_hat, out_dir + "/d_alr_hat.pgm");
  io::write_mask(wc, out_dir + "/d_wc_hat.pgm");
  std::cout << "change pixels: hr " << out.d_hr_hat.count_ones() << ", lr "
            << out.d_lr_hat.count_ones() << ", alr " << out.d_alr_hat.count_ones() << ", wc "
            << wc.count_ones() << "\n";
  return 0;
}

int cmd_evaluate(const std::string& manifest_path, const std::string& out_csv,
                 const std::string& curves_dir) {
  ExperimentManifest manifest = ExperimentManifest::load(manifest_path);
  ExperimentReport report = run_experiment(manifest);
  report.write_csv(out_csv);
  if (!curves_dir.empty()) report.write_curves(curves_dir);
  for (const std::string& f : report.failures) std::cerr << "warning: " << f << "\n";
  std::cout << report.to_csv();
  std::cout << "trials completed: " << report.trials_run << ", failures: "
            << report.failures.size() << "\n";
  return 0;
}

int cmd_synth(std::size_t bands, std::size_t rows, std::size_t cols, std::size_t k,
              std::uint64_t seed, const std::string& out) {
  io::write_cube(make_synthetic_reference(bands, rows, cols, k, seed), out,
                 io::CubeFormat::flat_binary);
  std::cout << "wrote " << bands << "x" << rows << "x" << cols << " synthetic cube to " << out
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-resolution change detection toolkit"};
  app.require_subcommand(1);

  // fuse
  std::string f_hr, f_lr, f_response, f_kernel = "gauss:5:1.0", f_out;
  std::string f_noise_hr = "const:1", f_noise_lr = "const:1";
  std::size_t f_factor = 5, f_max_iter = 500;
  double f_lambda = 1e-4, f_tol = 1e-6;
  auto* fuse_cmd = app.add_subcommand("fuse", "estimate the pseudo-latent image from a pair");
  fuse_cmd->add_option("--hr", f_hr, "HR-PAN/MS cube")->required();
  fuse_cmd->add_option("--lr", f_lr, "LR-HS cube")->required();
  fuse_cmd->add_option("--response", f_response, "spectral response: path, pan[:N] or ms[:groups]")
      ->required();
  fuse_cmd->add_option("--kernel", f_kernel, "blur kernel: path or gauss[:size[:sigma]]");
  fuse_cmd->add_option("--factor", f_factor, "decimation factor");
  fuse_cmd->add_option("--lambda", f_lambda, "regularization weight");
  fuse_cmd->add_option("--noise-hr", f_noise_hr, "HR variances: const:v or path");
  fuse_cmd->add_option("--noise-lr", f_noise_lr, "LR variances: const:v or path");
  fuse_cmd->add_option("--max-iter", f_max_iter, "solver iteration cap");
  fuse_cmd->add_option("--tol", f_tol, "relative gradient tolerance");
  fuse_cmd->add_option("--out", f_out, "output cube")->required();

  // detect
  std::string d_a, d_b, d_method = "cva", d_out_mask, d_out_energy;
  std::size_t d_window = 7;
  double d_pfa = -1.0, d_threshold = -1.0;
  auto* detect_cmd = app.add_subcommand("detect", "homogeneous change detection on a pair");
  detect_cmd->add_option("--a", d_a, "first cube")->required();
  detect_cmd->add_option("--b", d_b, "second cube")->required();
  detect_cmd->add_option("--method", d_method, "cva|scva|mad|irmad");
  detect_cmd->add_option("--window", d_window, "scva window (odd)");
  detect_cmd->add_option("--pfa", d_pfa, "false-alarm probability for the chi-square threshold");
  detect_cmd->add_option("--threshold", d_threshold, "explicit decision threshold");
  detect_cmd->add_option("--out-mask", d_out_mask, "output PGM mask");
  detect_cmd->add_option("--out-energy", d_out_energy, "output energy cube");

  // simulate
  std::string s_ref, s_kernel = "gauss5", s_mode = "ms", s_out_dir;
  std::size_t s_regions = 75, s_region_min = 3, s_region_max = 12, s_factor = 5, s_k = 0;
  int s_config = 1;
  std::uint64_t s_seed = 0;
  double s_snr = 0.0;
  auto* sim_cmd = app.add_subcommand("simulate", "build an observed pair with designed changes");
  sim_cmd->add_option("--ref", s_ref, "reference HR-HS cube")->required();
  sim_cmd->add_option("--regions", s_regions, "number of change regions");
  sim_cmd->add_option("--region-min", s_region_min, "smallest rectangle side");
  sim_cmd->add_option("--region-max", s_region_max, "largest rectangle side");
  sim_cmd->add_option("--factor", s_factor, "decimation factor");
  sim_cmd->add_option("--kernel", s_kernel, "blur kernel spec");
  sim_cmd->add_option("--mode", s_mode, "pan|ms");
  sim_cmd->add_option("--config", s_config, "temporal configuration (1|2)");
  sim_cmd->add_option("--seed", s_seed, "random seed");
  sim_cmd->add_option("--k", s_k, "endmember count (0 = automatic)");
  sim_cmd->add_option("--snr", s_snr, "per-band SNR in dB (0 = noiseless)");
  sim_cmd->add_option("--out-dir", s_out_dir, "output directory")->required();

  // run
  std::string r_hr, r_lr, r_model, r_method = "cva", r_out_dir;
  std::size_t r_window = 7;
  double r_pfa = 0.05;
  auto* run_cmd = app.add_subcommand("run", "full fuse-predict-detect pipeline");
  run_cmd->add_option("--hr", r_hr, "HR-PAN/MS cube")->required();
  run_cmd->add_option("--lr", r_lr, "LR-HS cube")->required();
  run_cmd->add_option("--model", r_model, "degradation model config (key=value)")->required();
  run_cmd->add_option("--method", r_method, "cva|scva|mad|irmad");
  run_cmd->add_option("--window", r_window, "scva window");
  run_cmd->add_option("--pfa", r_pfa, "false-alarm probability");
  run_cmd->add_option("--out-dir", r_out_dir, "output directory")->required();

  // evaluate
  std::string e_manifest, e_out = "report.csv", e_curves;
  auto* eval_cmd = app.add_subcommand("evaluate", "Monte-Carlo experiment driver");
  eval_cmd->add_option("--manifest", e_manifest, "experiment manifest")->required();
  eval_cmd->add_option("--out", e_out, "report CSV path");
  eval_cmd->add_option("--curves-dir", e_curves, "directory for mean ROC curve files");

  // synth
  std::string y_out;
  std::size_t y_bands = 30, y_rows = 60, y_cols = 60, y_k = 5;
  std::uint64_t y_seed = 1;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic reference cube");
  synth_cmd->add_option("--bands", y_bands, "spectral bands");
  synth_cmd->add_option("--rows", y_rows, "grid rows");
  synth_cmd->add_option("--cols", y_cols, "grid cols");
  synth_cmd->add_option("--k", y_k, "number of blob materials");
  synth_cmd->add_option("--seed", y_seed, "random seed");
  synth_cmd->add_option("--out", y_out, "output cube")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fuse_cmd->parsed()) {
      return cmd_fuse(f_hr, f_lr, f_response, f_kernel, f_factor, f_lambda, f_noise_hr,
                      f_noise_lr, f_max_iter, f_tol, f_out);
    }
    if (detect_cmd->parsed()) {
      std::optional<double> pfa, threshold;
      if (d_pfa >= 0.0) pfa = d_pfa;
      if (d_threshold >= 0.0) threshold = d_threshold;
      return cmd_detect(d_a, d_b, d_method, d_window, pfa, threshold, d_out_mask, d_out_energy);
    }
    if (sim_cmd->parsed()) {
      return cmd_simulate(s_ref, s_regions, s_region_min, s_region_max, s_factor, s_kernel,
                          s_mode, s_config, s_seed, s_k, s_snr, s_out_dir);
    }
    if (run_cmd->parsed()) {
      return cmd_run(r_hr, r_lr, r_model, r_method, r_window, r_pfa, r_out_dir);
    }
    if (eval_cmd->parsed()) return cmd_evaluate(e_manifest, e_out, e_curves);
    if (synth_cmd->parsed()) return cmd_synth(y_bands, y_rows, y_cols, y_k, y_seed, y_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
