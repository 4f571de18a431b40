#include "lidint/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "lidint/png_io.hpp"
#include "lidint/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lidint {

namespace {

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(base) / p).string();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json report_to_json(const EvalReport& r) {
  json j;
  j["whdr"] = r.whdr;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f_score"] = r.f_score;
  j["counts"] = {{"E", r.counts[0]}, {"D", r.counts[1]}, {"L", r.counts[2]}};
  j["delta"] = r.delta;
  j["method"] = r.method;
  j["dataset"] = r.dataset;
  return j;
}

}  // namespace

std::vector<Sample> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(path + ": invalid JSON: " + e.what());
  }
  if (!doc.is_array()) throw ParseError(path + ": manifest must be a JSON array");
  std::vector<Sample> samples;
  std::size_t index = 0;
  for (const json& entry : doc) {
    ++index;
    try {
      Sample s;
      s.id = entry.at("id").get<std::string>();
      s.image = entry.at("image").get<std::string>();
      s.gamma = entry.value("gamma", 2.2);
      if (entry.contains("lidar")) {
        const json& l = entry.at("lidar");
        if (l.contains("csv")) {
          s.lidar.csv = l.at("csv").get<std::string>();
          s.lidar.divisor = l.value("divisor", 1.0);
        } else {
          s.lidar.png = l.at("png").get<std::string>();
          s.lidar.mask = l.at("mask").get<std::string>();
        }
      }
      s.albedo = entry.value("albedo", "");
      s.shade = entry.value("shade", "");
      s.annotations = entry.value("annotations", "");
      samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(path + ": entry " + std::to_string(index) + ": " + e.what());
    }
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      if (samples[i].id == samples[j].id) {
        throw ValidationError(path + ": duplicate sample id '" + samples[i].id + "'");
      }
    }
  }
  return samples;
}

void save_manifest(const std::string& path, const std::vector<Sample>& samples) {
  json doc = json::array();
  for (const Sample& s : samples) {
    json entry;
    entry["id"] = s.id;
    entry["image"] = s.image;
    entry["gamma"] = s.gamma;
    json lidar;
    if (s.lidar.is_csv()) {
      lidar["csv"] = s.lidar.csv;
      lidar["divisor"] = s.lidar.divisor;
    } else {
      lidar["png"] = s.lidar.png;
      lidar["mask"] = s.lidar.mask;
    }
    entry["lidar"] = lidar;
    if (!s.albedo.empty()) entry["albedo"] = s.albedo;
    if (!s.shade.empty()) entry["shade"] = s.shade;
    if (!s.annotations.empty()) entry["annotations"] = s.annotations;
    doc.push_back(entry);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
}

SparseIntensity load_lidar_csv(const std::string& path, int width, int height, double divisor) {
  if (!(divisor > 0.0)) throw ValidationError(path + ": intensity divisor must be > 0");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file", 0);
  // Tolerate trailing CR from foreign line endings on the header only.
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
  if (line != "u,v,intensity") {
    throw ParseError(path + ":1: expected header 'u,v,intensity', got '" + line + "'", 1);
  }
  GrayMap values = GrayMap::zeros(width, height);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height, 0);
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    long u = 0, v = 0;
    double intensity = 0.0;
    char extra = 0;
    const int n = std::sscanf(line.c_str(), "%ld,%ld,%lf%c", &u, &v, &intensity, &extra);
    if (n != 3) {
      throw ParseError(path + ": row " + std::to_string(row) + ": malformed line '" + line + "'",
                       row);
    }
    if (u < 0 || u >= width || v < 0 || v >= height) {
      throw ParseError(path + ": row " + std::to_string(row) + ": coordinate (" +
                           std::to_string(u) + ", " + std::to_string(v) + ") outside " +
                           std::to_string(width) + "x" + std::to_string(height),
                       row);
    }
    const double norm = intensity / divisor;
    if (!std::isfinite(norm) || norm < 0.0 || norm > 1.0) {
      throw ParseError(path + ": row " + std::to_string(row) + ": intensity " +
                           std::to_string(intensity) + " outside [0, divisor]",
                       row);
    }
    const std::size_t p = static_cast<std::size_t>(v) * width + u;
    values.data[p] = norm;  // duplicate coordinates: last row wins
    mask[p] = 1;
  }
  return SparseIntensity(std::move(values), MaskMap(width, height, std::move(mask)));
}

void save_lidar_csv(const std::string& path, const SparseIntensity& sparse) {
  std::ofstream out(path, std::ios::binary);  // keep LF endings everywhere
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "u,v,intensity\n";
  for (int y = 0; y < sparse.values.height; ++y) {
    for (int x = 0; x < sparse.values.width; ++x) {
      if (!sparse.mask.at(x, y)) continue;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%d,%d,%.10g\n", x, y, sparse.values.at(x, y));
      out << buf;
    }
  }
  if (!out) throw IoError("failed writing " + path);
}

LoadedSample load_sample(const Sample& sample, const std::string& base_dir) {
  LoadedSample loaded;
  const PngImage png = load_png(resolve(base_dir, sample.image));
  loaded.image = inverse_gamma(png_to_encoded(png), GammaConfig(sample.gamma));

  if (sample.lidar.is_csv()) {
    loaded.lidar = load_lidar_csv(resolve(base_dir, sample.lidar.csv), png.width, png.height,
                                  sample.lidar.divisor);
  } else if (!sample.lidar.png.empty()) {
    const PngImage ipng = load_png(resolve(base_dir, sample.lidar.png));
    const PngImage mpng = load_png(resolve(base_dir, sample.lidar.mask));
    const GrayMap values = png_to_gray(ipng);
    const GrayMap mg = png_to_gray(mpng);
    require_same_shape(values.width, values.height, png.width, png.height,
                       (sample.id + ": lidar vs image").c_str());
    require_same_shape(mg.width, mg.height, png.width, png.height,
                       (sample.id + ": mask vs image").c_str());
    std::vector<std::uint8_t> mask(values.pixel_count());
    std::vector<double> masked_values(values.pixel_count(), 0.0);
    for (std::size_t p = 0; p < mask.size(); ++p) {
      mask[p] = mg.data[p] > 0.0 ? 1 : 0;
      if (mask[p]) masked_values[p] = values.data[p];
    }
    loaded.lidar =
        SparseIntensity(GrayMap(values.width, values.height, std::move(masked_values)),
                        MaskMap(values.width, values.height, std::move(mask)));
  } else {
    throw ValidationError(sample.id + ": sample has no lidar reference");
  }

  if (!sample.albedo.empty()) {
    const PngImage apng = load_png(resolve(base_dir, sample.albedo));
    require_same_shape(apng.width, apng.height, png.width, png.height,
                       (sample.id + ": albedo vs image").c_str());
    loaded.gt_albedo = LinearImage(apng.width, apng.height, png_to_encoded(apng).data);
  }
  if (!sample.shade.empty()) {
    const PngImage spng = load_png(resolve(base_dir, sample.shade));
    loaded.gt_shade = png_to_gray(spng);
  }
  if (!sample.annotations.empty()) {
    const auto records = load_annotations(resolve(base_dir, sample.annotations));
    for (const AnnotationRecord& rec : records) {
      if (!rec.image_id.empty() && rec.image_id != sample.id) continue;
      validate_pair(rec.pair, png.width, png.height);
      loaded.annotations.push_back(rec.pair);
    }
  }
  return loaded;
}

Sample save_scene(const std::string& dir, const std::string& id, const SynthScene& scene,
                  double gamma) {
  fs::create_directories(dir);
  Sample s;
  s.id = id;
  s.gamma = gamma;
  s.image = id + "_image.png";
  save_png_rgb16(resolve(dir, s.image), apply_gamma(scene.image, GammaConfig(gamma)));
  // Ground truth is stored linearly (gamma 1.0 on load).
  s.albedo = id + "_albedo.png";
  {
    EncodedImage raw(scene.albedo.width, scene.albedo.height, scene.albedo.data);
    for (double& v : raw.data) v = std::clamp(v, 0.0, 1.0);
    save_png_rgb16(resolve(dir, s.albedo), raw);
  }
  s.shade = id + "_shade.png";
  {
    GrayMap clamped = scene.shade;
    for (double& v : clamped.data) v = std::clamp(v, 0.0, 1.0);
    save_png_gray16(resolve(dir, s.shade), clamped);
  }
  s.lidar.png = id + "_lidar.png";
  s.lidar.mask = id + "_lidar_mask.png";
  save_png_gray16(resolve(dir, s.lidar.png), scene.lidar.values);
  save_png_gray8(resolve(dir, s.lidar.mask), scene.lidar.mask);
  return s;
}

std::map<std::string, std::string> load_key_value_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected key = value", line_no);
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

Method method_from_name(const std::string& name) {
  if (name == "ours") return Method::ours;
  if (name == "ours_no_lid") return Method::ours_no_lid;
  if (name == "ours_no_int") return Method::ours_no_int;
  if (name == "baseline_r") return Method::baseline_r;
  if (name == "baseline_s") return Method::baseline_s;
  if (name == "retinex") return Method::retinex;
  if (name == "color_retinex") return Method::color_retinex;
  throw ValidationError("unknown method '" + name + "'");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::ours: return "ours";
    case Method::ours_no_lid: return "ours_no_lid";
    case Method::ours_no_int: return "ours_no_int";
    case Method::baseline_r: return "baseline_r";
    case Method::baseline_s: return "baseline_s";
    case Method::retinex: return "retinex";
    case Method::color_retinex: return "color_retinex";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  if (manifest.empty()) throw ValidationError("experiment: manifest path is required");
  if (out_dir.empty()) throw ValidationError("experiment: output directory is required");
  if (methods.empty()) throw ValidationError("experiment: methods list is empty");
  if (densities.empty()) throw ValidationError("experiment: densities list is empty");
  for (double d : densities) {
    if (!(d > 0.0) || d > 1.0) throw ValidationError("experiment: densities must be in (0, 1]");
  }
  if (!(delta > 0.0)) throw ValidationError("experiment: delta must be > 0");
  if (seeds.empty()) throw ValidationError("experiment: seeds list is empty");
  if (jobs < 1) throw ValidationError("experiment: jobs must be >= 1");
  if (!(annotation_r_frac > 0.0) || annotation_r_frac > 0.5) {
    throw ValidationError("experiment: annotation_r_frac must be in (0, 0.5]");
  }
  solver.validate();
  densify.validate();
}

namespace {

template <typename T, typename Fn>
std::vector<T> parse_list(const std::string& text, Fn&& convert) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(convert(item.substr(b, e - b + 1)));
  }
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_key_values(const std::map<std::string, std::string>& kv) {
  ExperimentConfig cfg;
  auto get = [&](const char* key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (const auto* v = get("manifest")) cfg.manifest = *v;
  if (const auto* v = get("out")) cfg.out_dir = *v;
  if (const auto* v = get("methods")) {
    cfg.methods = parse_list<Method>(*v, [](const std::string& s) { return method_from_name(s); });
  }
  if (const auto* v = get("densities")) {
    cfg.densities = parse_list<double>(*v, [](const std::string& s) { return std::stod(s); });
  }
  if (const auto* v = get("delta")) cfg.delta = std::stod(*v);
  if (const auto* v = get("seeds")) {
    cfg.seeds = parse_list<std::uint64_t>(
        *v, [](const std::string& s) { return static_cast<std::uint64_t>(std::stoull(s)); });
  }
  if (const auto* v = get("balanced")) cfg.balanced = (*v == "true" || *v == "1");
  if (const auto* v = get("jobs")) cfg.jobs = std::stoi(*v);
  if (const auto* v = get("annotation_r_frac")) cfg.annotation_r_frac = std::stod(*v);
  if (const auto* v = get("solver_max_outer")) cfg.solver.max_outer = std::stoul(*v);
  if (const auto* v = get("solver_max_inner")) cfg.solver.max_inner = std::stoul(*v);
  if (const auto* v = get("lambda_smooth")) cfg.solver.weights.smooth = std::stod(*v);
  if (const auto* v = get("lambda_intensity")) cfg.solver.weights.intensity = std::stod(*v);
  if (const auto* v = get("densify_lambda")) cfg.densify.lambda_reg = std::stod(*v);
  if (const auto* v = get("densify_sigma_rgb")) cfg.densify.sigma_rgb = std::stod(*v);
  return cfg;
}

Decomposition run_method(Method method, const LinearImage& image, const SparseIntensity& lidar,
                         const SolverConfig& solver_cfg, const DensifyParams& densify_params) {
  switch (method) {
    case Method::baseline_r:
      return baseline_r(image);
    case Method::baseline_s:
      return baseline_s(image);
    case Method::retinex:
      return retinex(image);
    case Method::color_retinex: {
      RetinexParams params;
      params.use_color = true;
      return retinex(image, params);
    }
    case Method::ours: {
      const DensifyResult dense = densify(image, lidar, densify_params);
      return decompose(image, dense.values, MaskMap::full(image.width, image.height), solver_cfg);
    }
    case Method::ours_no_lid:
      return decompose(image, lidar.values, lidar.mask, solver_cfg);
    case Method::ours_no_int: {
      SolverConfig cfg = solver_cfg;
      cfg.weights.intensity = 0.0;
      const DensifyResult dense = densify(image, lidar, densify_params);
      return decompose(image, dense.values, MaskMap::full(image.width, image.height), cfg);
    }
  }
  throw ValidationError("run_method: unknown method");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<Sample> samples = load_manifest(cfg.manifest);
  if (samples.empty()) throw ValidationError(cfg.manifest + ": manifest lists no samples");
  const std::string base_dir = fs::path(cfg.manifest).parent_path().string();
  fs::create_directories(cfg.out_dir);

  struct Task {
    std::size_t sample_index;
    Method method;
    double density;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t si = 0; si < samples.size(); ++si) {
    for (Method m : cfg.methods) {
      for (double d : cfg.densities) {
        for (std::uint64_t seed : cfg.seeds) tasks.push_back({si, m, d, seed});
      }
    }
  }

  struct Slot {
    bool ok = false;
    bool done = false;
    RunRow row;
    RunFailure failure;
  };
  std::vector<Slot> slots(tasks.size());

  // Samples are loaded once, lazily, guarded by a flag per sample.
  std::vector<std::optional<LoadedSample>> loaded(samples.size());
  std::vector<std::unique_ptr<std::mutex>> sample_locks;
  sample_locks.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    sample_locks.push_back(std::make_unique<std::mutex>());
  }

  auto run_task = [&](std::size_t ti) {
    const Task& task = tasks[ti];
    const Sample& sample = samples[task.sample_index];
    Slot& slot = slots[ti];
    try {
      {
        std::lock_guard<std::mutex> lock(*sample_locks[task.sample_index]);
        if (!loaded[task.sample_index]) {
          loaded[task.sample_index] = load_sample(sample, base_dir);
        }
      }
      const LoadedSample& data = *loaded[task.sample_index];

      // One subsample stream per (sample, seed): the same pixel draws serve
      // every density, so sparser masks nest inside denser ones.
      const std::uint64_t sub_seed = mix_seed(task.seed, fnv1a(sample.id));
      const SparseIntensity sub = subsample_mask(data.lidar, task.density, sub_seed);

      const Decomposition dec =
          run_method(task.method, data.image, sub, cfg.solver, cfg.densify);

      std::vector<AnnotationPair> annotations = data.annotations;
      if (annotations.empty()) {
        if (!data.gt_albedo) {
          throw ValidationError(sample.id + ": no annotations and no ground-truth albedo");
        }
        const std::uint64_t ann_seed = mix_seed(task.seed, fnv1a(sample.id) ^ 0xa11a);
        const std::vector<Point2> points =
            filter_points(poisson_disk(data.image.width, data.image.height,
                                       cfg.annotation_r_frac, ann_seed),
                          data.image);
        const auto pairs = delaunay_pairs(points);
        annotations = simulate_judgements(*data.gt_albedo, pairs, points, cfg.delta);
      }
      if (cfg.balanced) {
        annotations = balanced_subsample(annotations, mix_seed(task.seed, fnv1a(sample.id) ^ 0xba1));
      }

      RunRow row;
      row.sample_id = sample.id;
      row.method = task.method;
      row.density = task.density;
      row.seed = task.seed;
      row.report = evaluate(annotations, dec.albedo, cfg.delta, method_name(task.method), sample.id);

      char dname[64];
      std::snprintf(dname, sizeof(dname), "d%.4g", task.density);
      const fs::path run_dir = fs::path(cfg.out_dir) / sample.id / method_name(task.method) /
                               dname / ("s" + std::to_string(task.seed));
      fs::create_directories(run_dir);
      save_png_rgb16((run_dir / "albedo.png").string(), apply_gamma(dec.albedo));
      GrayMap shade_vis = dec.shade;
      for (double& v : shade_vis.data) {
        v = std::pow(std::clamp(v, 0.0, 1.0), 1.0 / 2.2);
      }
      save_png_gray16((run_dir / "shade.png").string(), shade_vis);
      std::ofstream rep(run_dir / "report.json");
      rep << report_to_json(row.report).dump(2) << "\n";

      slot.row = std::move(row);
      slot.ok = true;
    } catch (const std::exception& e) {
      slot.failure = {sample.id, method_name(task.method), task.density, task.seed, e.what()};
      slot.ok = false;
    }
    slot.done = true;
  };

  if (cfg.jobs <= 1) {
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) run_task(ti);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const int n_workers = std::min<int>(cfg.jobs, static_cast<int>(tasks.size()));
    for (int w = 0; w < n_workers; ++w) {
      workers.emplace_back([&] {
        for (;;) {
          const std::size_t ti = next.fetch_add(1);
          if (ti >= tasks.size()) return;
          run_task(ti);
        }
      });
    }
    for (std::thread& t : workers) t.join();
  }

  ExperimentResult result;
  for (Slot& slot : slots) {
    if (slot.ok) {
      result.rows.push_back(std::move(slot.row));
    } else {
      result.failures.push_back(std::move(slot.failure));
    }
  }

  // Aggregate by (method, density), in methods/densities order.
  for (Method m : cfg.methods) {
    for (double d : cfg.densities) {
      AggregateRow agg;
      agg.method = m;
      agg.density = d;
      for (const RunRow& row : result.rows) {
        if (row.method != m || row.density != d) continue;
        ++agg.runs;
        agg.whdr += row.report.whdr;
        agg.precision += row.report.precision;
        agg.recall += row.report.recall;
        agg.f_score += row.report.f_score;
      }
      if (agg.runs > 0) {
        agg.whdr /= agg.runs;
        agg.precision /= agg.runs;
        agg.recall /= agg.runs;
        agg.f_score /= agg.runs;
        result.aggregate.push_back(agg);
      }
    }
  }
  std::stable_sort(result.aggregate.begin(), result.aggregate.end(),
                   [](const AggregateRow& a, const AggregateRow& b) {
                     if (a.method != b.method) return method_name(a.method) < method_name(b.method);
                     return a.density > b.density;
                   });

  std::vector<EvalReport> table_rows;
  for (const AggregateRow& agg : result.aggregate) {
    EvalReport r;
    char label[96];
    std::snprintf(label, sizeof(label), "%s@%.4g", method_name(agg.method).c_str(), agg.density);
    r.method = label;
    r.whdr = agg.whdr;
    r.precision = agg.precision;
    r.recall = agg.recall;
    r.f_score = agg.f_score;
    table_rows.push_back(std::move(r));
  }
  result.table = format_table(table_rows);

  json summary;
  summary["aggregate"] = json::array();
  for (const AggregateRow& agg : result.aggregate) {
    summary["aggregate"].push_back({{"method", method_name(agg.method)},
                                    {"density", agg.density},
                                    {"runs", agg.runs},
                                    {"whdr", agg.whdr},
                                    {"precision", agg.precision},
                                    {"recall", agg.recall},
                                    {"f_score", agg.f_score}});
  }
  summary["runs"] = json::array();
  for (const RunRow& row : result.rows) {
    json j = report_to_json(row.report);
    j["sample"] = row.sample_id;
    j["density"] = row.density;
    j["seed"] = row.seed;
    summary["runs"].push_back(j);
  }
  summary["failures"] = json::array();
  for (const RunFailure& f : result.failures) {
    summary["failures"].push_back({{"sample", f.sample_id},
                                   {"method", f.method},
                                   {"density", f.density},
                                   {"seed", f.seed},
                                   {"error", f.error}});
  }
  std::ofstream sum(fs::path(cfg.out_dir) / "summary.json");
  if (!sum) throw IoError("cannot write summary under " + cfg.out_dir);
  sum << summary.dump(2) << "\n";
  std::ofstream tab(fs::path(cfg.out_dir) / "table.txt");
  tab << result.table;
  return result;
}

}  // namespace lidint
