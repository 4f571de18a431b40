#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lidint/cli.hpp"
#include "lidint/pipeline.hpp"
#include "lidint/png_io.hpp"
#include "lidint/rng.hpp"
#include "test_util.hpp"

using namespace lidint;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lidint_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("synth: single flat region, shadow step, determinism hash") {
  SynthParams flat;
  flat.n_regions = 1;
  flat.shadow = false;
  flat.noise_sigma = 0.0;
  flat.lidar_density = 0.5;
  const SynthScene scene = synth_scene(3, 32, 32, flat);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < scene.albedo.pixel_count(); ++p) {
      CHECK(scene.albedo.data[p * 3 + c] == scene.albedo.data[c]);
    }
  }
  const GrayMap gt_lum = luminance(scene.albedo);
  for (std::size_t p = 0; p < scene.lidar.mask.on.size(); ++p) {
    if (scene.lidar.mask.on[p]) CHECK(scene.lidar.values.data[p] == gt_lum.data[p]);
  }

  SynthParams shadowed;
  shadowed.shadow = true;
  shadowed.noise_sigma = 0.0;
  const SynthScene dark = synth_scene(4, 48, 48, shadowed);
  REQUIRE(dark.shadow.present);
  std::size_t in_shadow = 0, lit = 0;
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 48; ++x) {
      if (dark.shadow.shadowed(x, y)) {
        ++in_shadow;
      } else {
        ++lit;
      }
    }
  }
  CHECK(in_shadow > 0);
  CHECK(lit > 0);
  // The LiDAR channel never sees the shadow: observed values equal albedo
  // luminance on both sides of the boundary.
  const GrayMap dark_lum = luminance(dark.albedo);
  for (std::size_t p = 0; p < dark.lidar.mask.on.size(); ++p) {
    if (dark.lidar.mask.on[p]) CHECK(dark.lidar.values.data[p] == dark_lum.data[p]);
  }
  // I = R* x S* holds exactly.
  for (std::size_t p = 0; p < dark.image.pixel_count(); ++p) {
    for (int c = 0; c < 3; ++c) {
      CHECK(std::abs(dark.image.data[p * 3 + c] -
                     dark.albedo.data[p * 3 + c] * dark.shade.data[p]) <= 1e-6);
    }
  }

  // Generator regression fixture: content hash of the seed-42 scene.
  const SynthScene pinned = synth_scene(42, 128, 128, SynthParams{});
  CHECK(scene_content_hash(pinned) == 0xea29808d9d199745ULL);
}

TEST_CASE("png round trips: gray16, rgb16, mask") {
  Rng rng(81);
  const fs::path dir = fresh_dir("png");
  const GrayMap gray = testutil::random_gray(rng, 17, 9);
  save_png_gray16((dir / "g.png").string(), gray);
  const PngImage loaded = load_png((dir / "g.png").string());
  CHECK(loaded.bit_depth == 16);
  CHECK(loaded.channels == 1);
  for (std::size_t p = 0; p < gray.data.size(); ++p) {
    CHECK(std::abs(loaded.data[p] - gray.data[p]) <= 0.5 / 65535.0 + 1e-12);
  }
  // Second write of the decoded data is byte-identical (stable quantization).
  save_png_gray16((dir / "g2.png").string(), png_to_gray(loaded));
  const PngImage again = load_png((dir / "g2.png").string());
  CHECK(again.data == loaded.data);
  CHECK(slurp(dir / "g.png") == slurp(dir / "g2.png"));

  const LinearImage img = testutil::random_image(rng, 9, 13);
  save_png_rgb16((dir / "c.png").string(), EncodedImage(9, 13, img.data));
  const PngImage rgb = load_png((dir / "c.png").string());
  CHECK(rgb.channels == 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    CHECK(std::abs(rgb.data[i] - img.data[i]) <= 0.5 / 65535.0 + 1e-12);
  }

  const MaskMap mask = testutil::random_mask(rng, 11, 7, 0.4);
  save_png_gray8((dir / "m.png").string(), mask);
  const PngImage mpng = load_png((dir / "m.png").string());
  for (std::size_t p = 0; p < mask.on.size(); ++p) {
    CHECK((mpng.data[p] > 0.0) == (mask.on[p] != 0));
  }
}

TEST_CASE("lidar csv: round trip and typed row errors") {
  const fs::path dir = fresh_dir("csv");
  Rng rng(82);
  SparseIntensity sparse(testutil::random_gray(rng, 6, 5), testutil::random_mask(rng, 6, 5, 0.5));
  const std::string path = (dir / "l.csv").string();
  save_lidar_csv(path, sparse);
  const SparseIntensity loaded = load_lidar_csv(path, 6, 5, 1.0);
  CHECK(loaded.mask.on == sparse.mask.on);
  for (std::size_t p = 0; p < sparse.values.data.size(); ++p) {
    if (sparse.mask.on[p]) {
      CHECK(loaded.values.data[p] == doctest::Approx(sparse.values.data[p]).epsilon(1e-9));
    }
  }

  {
    std::ofstream bad(path);
    bad << "u,v,intensity\n5,3,0.5\n";
  }
  try {
    load_lidar_csv(path, 4, 4, 1.0);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }

  {
    std::ofstream bad(path);
    bad << "u,v,intensity\n1,1,0.5\nnope\n";
  }
  try {
    load_lidar_csv(path, 4, 4, 1.0);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }

  {
    std::ofstream bad(path);
    bad << "wrong,header\n";
  }
  CHECK_THROWS_AS(load_lidar_csv(path, 4, 4, 1.0), ParseError);

  // Divisor normalization.
  {
    std::ofstream ok(path);
    ok << "u,v,intensity\n0,0,512\n";
  }
  const SparseIntensity scaled = load_lidar_csv(path, 4, 4, 1024.0);
  CHECK(scaled.values.data[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("scene save/load round trip within quantization") {
  const fs::path dir = fresh_dir("scene");
  SynthParams params;
  params.noise_sigma = 0.05;
  const SynthScene scene = synth_scene(7, 32, 32, params);
  const Sample sample = save_scene(dir.string(), "s7", scene);
  save_manifest((dir / "manifest.json").string(), {sample});

  const auto samples = load_manifest((dir / "manifest.json").string());
  REQUIRE(samples.size() == 1);
  const LoadedSample loaded = load_sample(samples[0], dir.string());

  // Image goes through gamma encode/decode plus 16-bit quantization.
  for (std::size_t i = 0; i < scene.image.data.size(); ++i) {
    CHECK(std::abs(loaded.image.data[i] - scene.image.data[i]) <= 2e-5);
  }
  REQUIRE(loaded.gt_albedo.has_value());
  for (std::size_t i = 0; i < scene.albedo.data.size(); ++i) {
    CHECK(std::abs(loaded.gt_albedo->data[i] - scene.albedo.data[i]) <= 1.0 / 65535.0);
  }
  CHECK(loaded.lidar.mask.on == scene.lidar.mask.on);
  for (std::size_t p = 0; p < scene.lidar.values.data.size(); ++p) {
    if (scene.lidar.mask.on[p]) {
      CHECK(std::abs(loaded.lidar.values.data[p] - scene.lidar.values.data[p]) <=
            1.0 / 65535.0);
    }
  }
}

TEST_CASE("manifest validation") {
  const fs::path dir = fresh_dir("manifest");
  {
    std::ofstream out(dir / "dup.json");
    out << R"([{"id":"a","image":"x.png","lidar":{"csv":"x.csv"}},)"
        << R"({"id":"a","image":"y.png","lidar":{"csv":"y.csv"}}])";
  }
  CHECK_THROWS_AS(load_manifest((dir / "dup.json").string()), ValidationError);
  {
    std::ofstream out(dir / "bad.json");
    out << R"({"not":"an array"})";
  }
  CHECK_THROWS_AS(load_manifest((dir / "bad.json").string()), ParseError);
  CHECK_THROWS_AS(load_manifest((dir / "missing.json").string()), IoError);
}

TEST_CASE("all-zero-mask lidar loads cleanly and densify reports EmptyMask later") {
  const fs::path dir = fresh_dir("emptymask");
  const LinearImage img = LinearImage::constant(2, 2, 0.5, 0.5, 0.5);
  save_png_rgb16((dir / "i.png").string(), apply_gamma(img));
  {
    std::ofstream csv(dir / "l.csv");
    csv << "u,v,intensity\n";
  }
  Sample s;
  s.id = "empty";
  s.image = "i.png";
  s.lidar.csv = "l.csv";
  const LoadedSample loaded = load_sample(s, dir.string());
  CHECK(loaded.lidar.mask.count_on() == 0);
  CHECK_THROWS_AS(densify(loaded.image, loaded.lidar), EmptyMaskError);
}

TEST_CASE("key=value config parsing") {
  const fs::path dir = fresh_dir("config");
  {
    std::ofstream out(dir / "run.cfg");
    out << "# experiment\n"
        << "manifest = data/manifest.json\n"
        << "methods = ours, baseline_r\n"
        << "densities = 1.0, 0.1\n"
        << "seeds = 1,2,3\n"
        << "balanced = true\n"
        << "delta=0.1\n";
  }
  const auto kv = load_key_value_config((dir / "run.cfg").string());
  const ExperimentConfig cfg = ExperimentConfig::from_key_values(kv);
  CHECK(cfg.manifest == "data/manifest.json");
  CHECK(cfg.methods.size() == 2);
  CHECK(cfg.methods[1] == Method::baseline_r);
  CHECK(cfg.densities == std::vector<double>{1.0, 0.1});
  CHECK(cfg.seeds.size() == 3);
  CHECK(cfg.balanced);

  {
    std::ofstream out(dir / "bad.cfg");
    out << "just a line without equals\n";
  }
  CHECK_THROWS_AS(load_key_value_config((dir / "bad.cfg").string()), ParseError);
}

TEST_CASE("experiment runner: baseline_r on balanced annotations scores exactly 2/3") {
  const fs::path dir = fresh_dir("runner");
  std::vector<Sample> samples;
  for (int i = 0; i < 2; ++i) {
    SynthParams params;
    params.n_regions = 6;
    params.lidar_density = 0.8;
    const SynthScene scene = synth_scene(100 + i, 48, 48, params);
    samples.push_back(save_scene(dir.string(), "s" + std::to_string(i), scene));
  }
  save_manifest((dir / "manifest.json").string(), samples);

  ExperimentConfig cfg;
  cfg.manifest = (dir / "manifest.json").string();
  cfg.out_dir = (dir / "out").string();
  cfg.methods = {Method::baseline_r};
  cfg.densities = {1.0};
  cfg.seeds = {0, 1};
  cfg.balanced = true;
  const ExperimentResult result = run_experiment(cfg);
  CHECK(result.failures.empty());
  REQUIRE(!result.rows.empty());
  for (const RunRow& row : result.rows) {
    CHECK(row.report.whdr == 2.0 / 3.0);
  }
  CHECK(fs::exists(dir / "out" / "summary.json"));
  CHECK(fs::exists(dir / "out" / "table.txt"));

  // Byte-identical reruns.
  const std::string first = slurp(dir / "out" / "summary.json");
  run_experiment(cfg);
  CHECK(slurp(dir / "out" / "summary.json") == first);

  // Same results when running with multiple jobs.
  ExperimentConfig parallel = cfg;
  parallel.jobs = 3;
  parallel.out_dir = (dir / "out_par").string();
  run_experiment(parallel);
  CHECK(slurp(dir / "out_par" / "summary.json") == first);

  // An empty manifest is rejected before any work happens.
  save_manifest((dir / "empty.json").string(), {});
  ExperimentConfig empty_cfg = cfg;
  empty_cfg.manifest = (dir / "empty.json").string();
  CHECK_THROWS_AS(run_experiment(empty_cfg), ValidationError);

  // A broken sample is collected as a failure without sinking the batch.
  Sample broken;
  broken.id = "broken";
  broken.image = "nonexistent.png";
  broken.lidar.csv = "nonexistent.csv";
  auto mixed = samples;
  mixed.push_back(broken);
  save_manifest((dir / "mixed.json").string(), mixed);
  ExperimentConfig mixed_cfg = cfg;
  mixed_cfg.manifest = (dir / "mixed.json").string();
  mixed_cfg.out_dir = (dir / "out_mixed").string();
  const ExperimentResult partial = run_experiment(mixed_cfg);
  CHECK(partial.failures.size() == 2);  // one per seed
  CHECK(partial.rows.size() == 4);
  CHECK(run_cli({"--out", (dir / "out_cli").string(), "run", "--manifest",
                 (dir / "mixed.json").string(), "--methods", "baseline_r", "--densities", "1.0",
                 "--seeds", "0"}) == 2);
}

TEST_CASE("experiment runner drives the energy method across densities") {
  const fs::path dir = fresh_dir("runner_ours");
  SynthParams params;
  params.n_regions = 4;
  params.lidar_density = 1.0;
  const SynthScene scene = synth_scene(77, 48, 48, params);
  save_manifest((dir / "manifest.json").string(),
                {save_scene(dir.string(), "s", scene)});

  ExperimentConfig cfg;
  cfg.manifest = (dir / "manifest.json").string();
  cfg.out_dir = (dir / "out").string();
  cfg.methods = {Method::ours};
  cfg.densities = {1.0, 0.01};
  cfg.seeds = {0, 1};
  cfg.solver.max_outer = 3;
  cfg.solver.max_inner = 60;
  const ExperimentResult result = run_experiment(cfg);
  CHECK(result.failures.empty());
  CHECK(result.rows.size() == 4);
  REQUIRE(result.aggregate.size() == 2);
  // Aggregates are ordered dense-to-sparse per method.
  CHECK(result.aggregate[0].density == 1.0);
  CHECK(result.aggregate[1].density == 0.01);
  for (const RunRow& row : result.rows) {
    CHECK(fs::exists(fs::path(cfg.out_dir) / "s" / "ours"));
    CHECK(row.report.whdr >= 0.0);
    CHECK(row.report.whdr <= 1.0);
  }
}

TEST_CASE("cli: synth/densify/decompose/annotate/evaluate/report chain") {
  const fs::path dir = fresh_dir("cli");
  const std::string out = (dir / "scene").string();
  CHECK(run_cli({"synth", "--seed", "42", "--size", "48", "--out", out}) == 0);
  CHECK(fs::exists(fs::path(out) / "manifest.json"));
  CHECK(fs::exists(fs::path(out) / "scene_image.png"));

  const std::string image = (fs::path(out) / "scene_image.png").string();
  const std::string lidar =
      (fs::path(out) / "scene_lidar.png").string() + "," +
      (fs::path(out) / "scene_lidar_mask.png").string();

  CHECK(run_cli({"densify", "--image", image, "--lidar", lidar, "--out",
                 (dir / "dense").string()}) == 0);
  CHECK(fs::exists(dir / "dense" / "dense.png"));

  CHECK(run_cli({"decompose", "--image", image, "--lidar", lidar, "--max-outer", "2",
                 "--max-inner", "10", "--out", (dir / "dec").string()}) == 0);
  CHECK(fs::exists(dir / "dec" / "albedo.png"));
  CHECK(fs::exists(dir / "dec" / "shade.png"));
  CHECK(fs::exists(dir / "dec" / "metrics.json"));

  CHECK(run_cli({"annotate", "--image", image, "--gt-albedo",
                 (fs::path(out) / "scene_albedo.png").string(), "--out",
                 (dir / "ann").string(), "--id", "scene"}) == 0);
  const std::string pairs = (dir / "ann" / "scene_pairs.jsonl").string();
  CHECK(fs::exists(pairs));

  CHECK(run_cli({"evaluate", "--pred", (dir / "dec" / "albedo.png").string(), "--ann", pairs}) ==
        0);

  // decompose with a CSV lidar reference.
  {
    const auto samples = load_manifest((fs::path(out) / "manifest.json").string());
    const LoadedSample loaded = load_sample(samples[0], out);
    save_lidar_csv((dir / "l.csv").string(), loaded.lidar);
  }
  CHECK(run_cli({"decompose", "--image", image, "--lidar", (dir / "l.csv").string(),
                 "--max-outer", "1", "--max-inner", "5", "--out", (dir / "dec2").string()}) == 0);

  // run + report.
  const std::string run_out = (dir / "exp").string();
  CHECK(run_cli({"--out", run_out, "run", "--manifest",
                 (fs::path(out) / "manifest.json").string(), "--methods",
                 "baseline_r,baseline_s", "--densities", "1.0", "--seeds", "0"}) == 0);
  CHECK(run_cli({"report", "--in", (fs::path(run_out) / "summary.json").string()}) == 0);

  // Usage failures exit with 1.
  CHECK(run_cli({"frobnicate"}) == 1);
  CHECK(run_cli({"synth", "--unknown-flag"}) == 1);
  CHECK(run_cli({"decompose", "--image", image, "--out", (dir / "x").string()}) == 1);
}
