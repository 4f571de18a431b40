#include "lidint/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "lidint/pipeline.hpp"
#include "lidint/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lidint {

namespace {

// Sparse intensity from either a CSV path or "intensity.png,mask.png".
SparseIntensity load_lidar_arg(const std::string& arg, int width, int height, double divisor) {
  if (arg.size() > 4 && arg.substr(arg.size() - 4) == ".csv") {
    return load_lidar_csv(arg, width, height, divisor);
  }
  const std::size_t comma = arg.find(',');
  if (comma == std::string::npos) {
    throw ValidationError("--lidar expects a .csv path or 'intensity.png,mask.png'");
  }
  const GrayMap values = png_to_gray(load_png(arg.substr(0, comma)));
  const GrayMap mask_gray = png_to_gray(load_png(arg.substr(comma + 1)));
  require_same_shape(values.width, values.height, width, height, "lidar vs image");
  require_same_shape(mask_gray.width, mask_gray.height, width, height, "lidar mask vs image");
  std::vector<std::uint8_t> mask(values.pixel_count());
  std::vector<double> masked(values.pixel_count(), 0.0);
  for (std::size_t p = 0; p < mask.size(); ++p) {
    mask[p] = mask_gray.data[p] > 0.0 ? 1 : 0;
    if (mask[p]) masked[p] = values.data[p];
  }
  return SparseIntensity(GrayMap(width, height, std::move(masked)),
                         MaskMap(width, height, std::move(mask)));
}

LinearImage load_image_arg(const std::string& path, double gamma) {
  return inverse_gamma(png_to_encoded(load_png(path)), GammaConfig(gamma));
}

void emit(const json& summary) { std::cout << summary.dump(2) << std::endl; }

json report_json(const EvalReport& r) {
  return json{{"whdr", r.whdr},
              {"precision", r.precision},
              {"recall", r.recall},
              {"f_score", r.f_score},
              {"counts", {{"E", r.counts[0]}, {"D", r.counts[1]}, {"L", r.counts[2]}}},
              {"delta", r.delta},
              {"method", r.method},
              {"dataset", r.dataset}};
}

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"LiDAR-guided intrinsic image decomposition toolkit"};
  app.require_subcommand(1);
  // Global flags (--seed/--config/--out) may appear after the subcommand.
  app.fallthrough();

  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir;
  app.add_option("--seed", seed, "global random seed");
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--out", out_dir, "output directory");

  // synth -------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic scene");
  int synth_size = 128;
  int synth_height = 0;
  SynthParams synth_params;
  std::string synth_id = "scene";
  double synth_gamma = 2.2;
  synth_cmd->add_option("--size", synth_size, "image width (and height unless --height)");
  synth_cmd->add_option("--height", synth_height, "image height");
  synth_cmd->add_option("--regions", synth_params.n_regions, "albedo region count");
  synth_cmd->add_option("--noise", synth_params.noise_sigma, "lidar noise sigma");
  synth_cmd->add_option("--density", synth_params.lidar_density, "lidar density");
  synth_cmd->add_option("--smoothness", synth_params.shade_smoothness, "shade smoothness");
  synth_cmd->add_option("--shadow-factor", synth_params.shadow_factor, "cast shadow factor");
  synth_cmd->add_flag("--no-shadow", [&](std::int64_t) { synth_params.shadow = false; },
                      "disable the cast shadow");
  synth_cmd->add_option("--id", synth_id, "sample id / file prefix");
  synth_cmd->add_option("--gamma", synth_gamma, "encoding gamma of the stored image");

  // densify -----------------------------------------------------------
  auto* densify_cmd = app.add_subcommand("densify", "densify sparse lidar intensity");
  std::string densify_image, densify_lidar;
  double densify_gamma = 2.2, densify_divisor = 1.0;
  DensifyParams densify_params;
  densify_cmd->add_option("--image", densify_image, "guidance image PNG")->required();
  densify_cmd->add_option("--lidar", densify_lidar, "lidar csv or 'png,mask'")->required();
  densify_cmd->add_option("--gamma", densify_gamma, "image encoding gamma");
  densify_cmd->add_option("--divisor", densify_divisor, "csv intensity divisor");
  densify_cmd->add_option("--lambda", densify_params.lambda_reg, "smoothness weight");
  densify_cmd->add_option("--sigma-rgb", densify_params.sigma_rgb, "edge bandwidth");
  densify_cmd->add_option("--max-iters", densify_params.max_iters, "CG iteration cap");
  densify_cmd->add_option("--tol", densify_params.tol, "CG relative residual");

  // decompose ---------------------------------------------------------
  auto* dec_cmd = app.add_subcommand("decompose", "split an image into albedo and shade");
  std::string dec_image, dec_lidar, dec_method = "ours";
  double dec_gamma = 2.2, dec_divisor = 1.0;
  SolverConfig solver_cfg;
  DensifyParams dec_densify;
  dec_cmd->add_option("--image", dec_image, "input PNG")->required();
  dec_cmd->add_option("--lidar", dec_lidar, "lidar csv or 'png,mask' (not needed by baselines)");
  dec_cmd->add_option("--method", dec_method,
                      "ours|ours_no_lid|ours_no_int|baseline_r|baseline_s|retinex|color_retinex");
  dec_cmd->add_option("--gamma", dec_gamma, "image encoding gamma");
  dec_cmd->add_option("--divisor", dec_divisor, "csv intensity divisor");
  dec_cmd->add_option("--lambda-smooth", solver_cfg.weights.smooth, "smoothness weight");
  dec_cmd->add_option("--lambda-intensity", solver_cfg.weights.intensity,
                      "intensity consistency weight");
  dec_cmd->add_option("--max-outer", solver_cfg.max_outer, "refit alternations");
  dec_cmd->add_option("--max-inner", solver_cfg.max_inner, "gradient steps per alternation");

  // annotate ----------------------------------------------------------
  auto* ann_cmd = app.add_subcommand("annotate", "sample and judge pixel pairs");
  std::string ann_image, ann_gt, ann_id = "image";
  double ann_r_frac = 0.07, ann_delta = 0.1, ann_gamma = 2.2;
  ann_cmd->add_option("--image", ann_image, "input PNG")->required();
  ann_cmd->add_option("--gt-albedo", ann_gt, "ground-truth albedo PNG (linear) for judgements")
      ->required();
  ann_cmd->add_option("--r-frac", ann_r_frac, "Poisson disk radius fraction");
  ann_cmd->add_option("--delta", ann_delta, "judgement ratio threshold");
  ann_cmd->add_option("--gamma", ann_gamma, "image encoding gamma");
  ann_cmd->add_option("--id", ann_id, "image id written per line");

  // evaluate ----------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("evaluate", "score an albedo against annotations");
  std::string eval_pred, eval_ann;
  double eval_delta = 0.1, eval_gamma = 2.2;
  bool eval_balanced = false;
  eval_cmd->add_option("--pred", eval_pred, "predicted albedo PNG")->required();
  eval_cmd->add_option("--ann", eval_ann, "annotation JSONL")->required();
  eval_cmd->add_option("--delta", eval_delta, "judgement ratio threshold");
  eval_cmd->add_option("--gamma", eval_gamma, "albedo encoding gamma");
  eval_cmd->add_flag("--balanced", eval_balanced, "balance classes before scoring");

  // report ------------------------------------------------------------
  auto* rep_cmd = app.add_subcommand("report", "render an experiment summary table");
  std::string rep_in;
  rep_cmd->add_option("--in", rep_in, "summary.json produced by run")->required();

  // run ---------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "run a manifest-driven experiment");
  std::string run_manifest, run_methods, run_densities, run_seeds;
  ExperimentConfig run_cfg;
  run_cmd->add_option("--manifest", run_manifest, "sample manifest JSON");
  run_cmd->add_option("--methods", run_methods, "comma-separated method list");
  run_cmd->add_option("--densities", run_densities, "comma-separated density list");
  run_cmd->add_option("--seeds", run_seeds, "comma-separated seeds");
  run_cmd->add_option("--delta", run_cfg.delta, "judgement ratio threshold");
  run_cmd->add_option("--jobs", run_cfg.jobs, "parallel sample jobs");
  run_cmd->add_flag("--balanced", run_cfg.balanced, "balance annotation classes");

  std::vector<const char*> argv;
  argv.push_back("lidint");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*synth_cmd) {
    if (out_dir.empty()) throw ValidationError("synth: --out directory is required");
    const int w = synth_size;
    const int h = synth_height > 0 ? synth_height : synth_size;
    const SynthScene scene = synth_scene(seed, w, h, synth_params);
    const Sample sample = save_scene(out_dir, synth_id, scene, synth_gamma);
    save_manifest((fs::path(out_dir) / "manifest.json").string(), {sample});
    emit(json{{"command", "synth"},
              {"seed", seed},
              {"width", w},
              {"height", h},
              {"observed", scene.lidar.mask.count_on()},
              {"manifest", (fs::path(out_dir) / "manifest.json").string()},
              {"content_hash", scene_content_hash(scene)}});
    return 0;
  }

  if (*densify_cmd) {
    if (out_dir.empty()) throw ValidationError("densify: --out directory is required");
    const LinearImage img = load_image_arg(densify_image, densify_gamma);
    const SparseIntensity sparse =
        load_lidar_arg(densify_lidar, img.width, img.height, densify_divisor);
    const DensifyResult dense = densify(img, sparse, densify_params);
    fs::create_directories(out_dir);
    const std::string out_png = (fs::path(out_dir) / "dense.png").string();
    save_png_gray16(out_png, dense.values);
    emit(json{{"command", "densify"},
              {"output", out_png},
              {"iterations", dense.iterations},
              {"relative_residual", dense.relative_residual},
              {"observed", sparse.mask.count_on()}});
    return 0;
  }

  if (*dec_cmd) {
    if (out_dir.empty()) throw ValidationError("decompose: --out directory is required");
    const Method method = method_from_name(dec_method);
    const LinearImage img = load_image_arg(dec_image, dec_gamma);
    SparseIntensity sparse;
    const bool needs_lidar =
        method == Method::ours || method == Method::ours_no_lid || method == Method::ours_no_int;
    if (needs_lidar) {
      if (dec_lidar.empty()) throw ValidationError("decompose: --lidar required for " + dec_method);
      sparse = load_lidar_arg(dec_lidar, img.width, img.height, dec_divisor);
    } else {
      sparse = SparseIntensity(GrayMap::zeros(img.width, img.height),
                               MaskMap::empty(img.width, img.height));
    }
    const Decomposition dec = run_method(method, img, sparse, solver_cfg, dec_densify);
    fs::create_directories(out_dir);
    const std::string albedo_png = (fs::path(out_dir) / "albedo.png").string();
    const std::string shade_png = (fs::path(out_dir) / "shade.png").string();
    save_png_rgb16(albedo_png, apply_gamma(dec.albedo, GammaConfig(dec_gamma)));
    GrayMap shade_vis = dec.shade;
    for (double& v : shade_vis.data) v = std::pow(std::clamp(v, 0.0, 1.0), 1.0 / dec_gamma);
    save_png_gray16(shade_png, shade_vis);
    double recon = 0.0;
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
      for (int c = 0; c < 3; ++c) {
        recon = std::max(recon, std::abs(img.data[p * 3 + c] -
                                         dec.albedo.data[p * 3 + c] * dec.shade.data[p]));
      }
    }
    json metrics{{"command", "decompose"},
                 {"method", dec_method},
                 {"albedo", albedo_png},
                 {"shade", shade_png},
                 {"max_reconstruction_error", recon},
                 {"scale_bias", {dec.scale_bias.s1, dec.scale_bias.b1, dec.scale_bias.s2,
                                 dec.scale_bias.b2}}};
    std::ofstream mf(fs::path(out_dir) / "metrics.json");
    mf << metrics.dump(2) << "\n";
    emit(metrics);
    return 0;
  }

  if (*ann_cmd) {
    if (out_dir.empty()) throw ValidationError("annotate: --out directory is required");
    const LinearImage img = load_image_arg(ann_image, ann_gamma);
    const PngImage gt_png = load_png(ann_gt);
    const LinearImage gt(gt_png.width, gt_png.height, png_to_encoded(gt_png).data);
    const std::vector<Point2> points =
        filter_points(poisson_disk(img.width, img.height, ann_r_frac, seed), img);
    const auto pairs = delaunay_pairs(points);
    const std::vector<AnnotationPair> annotations = simulate_judgements(gt, pairs, points, ann_delta);
    fs::create_directories(out_dir);
    const std::string out_path = (fs::path(out_dir) / (ann_id + "_pairs.jsonl")).string();
    save_annotations(out_path, ann_id, annotations);
    emit(json{{"command", "annotate"},
              {"points", points.size()},
              {"pairs", annotations.size()},
              {"output", out_path}});
    return 0;
  }

  if (*eval_cmd) {
    const PngImage pred_png = load_png(eval_pred);
    const LinearImage pred =
        inverse_gamma(png_to_encoded(pred_png), GammaConfig(eval_gamma));
    std::vector<AnnotationPair> annotations;
    for (const AnnotationRecord& rec : load_annotations(eval_ann)) {
      validate_pair(rec.pair, pred.width, pred.height);
      annotations.push_back(rec.pair);
    }
    if (eval_balanced) annotations = balanced_subsample(annotations, seed);
    const EvalReport report = evaluate(annotations, pred, eval_delta, "cli", eval_ann);
    json j = report_json(report);
    j["command"] = "evaluate";
    emit(j);
    return 0;
  }

  if (*rep_cmd) {
    std::ifstream in(rep_in);
    if (!in) throw IoError("cannot open " + rep_in);
    json summary;
    in >> summary;
    std::vector<EvalReport> rows;
    for (const json& agg : summary.at("aggregate")) {
      EvalReport r;
      char label[96];
      std::snprintf(label, sizeof(label), "%s@%.4g", agg.at("method").get<std::string>().c_str(),
                    agg.at("density").get<double>());
      r.method = label;
      r.whdr = agg.at("whdr").get<double>();
      r.precision = agg.at("precision").get<double>();
      r.recall = agg.at("recall").get<double>();
      r.f_score = agg.at("f_score").get<double>();
      rows.push_back(std::move(r));
    }
    std::cout << format_table(rows);
    emit(json{{"command", "report"}, {"rows", rows.size()}});
    return 0;
  }

  if (*run_cmd) {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      cfg = ExperimentConfig::from_key_values(load_key_value_config(config_path));
    }
    if (!run_manifest.empty()) cfg.manifest = run_manifest;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!run_methods.empty()) {
      cfg.methods.clear();
      std::stringstream ss(run_methods);
      std::string item;
      while (std::getline(ss, item, ',')) cfg.methods.push_back(method_from_name(item));
    }
    if (!run_densities.empty()) {
      cfg.densities.clear();
      std::stringstream ss(run_densities);
      std::string item;
      while (std::getline(ss, item, ',')) cfg.densities.push_back(std::stod(item));
    }
    if (!run_seeds.empty()) {
      cfg.seeds.clear();
      std::stringstream ss(run_seeds);
      std::string item;
      while (std::getline(ss, item, ',')) cfg.seeds.push_back(std::stoull(item));
    }
    if (run_cmd->count("--delta")) cfg.delta = run_cfg.delta;
    if (run_cmd->count("--jobs")) cfg.jobs = run_cfg.jobs;
    if (run_cmd->count("--balanced")) cfg.balanced = run_cfg.balanced;
    const ExperimentResult result = run_experiment(cfg);
    std::cout << result.table;
    emit(json{{"command", "run"},
              {"rows", result.rows.size()},
              {"failures", result.failures.size()},
              {"summary", (fs::path(cfg.out_dir) / "summary.json").string()}});
    return result.failures.empty() ? 0 : 2;
  }

  return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  try {
    return dispatch(args);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const EmptyMaskError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const EmptyAnnotationsError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const MissingClassError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
}

}  // namespace lidint
