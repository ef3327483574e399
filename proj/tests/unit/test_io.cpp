#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <tuple>

#include "rdm/bench.hpp"
#include "rdm/config.hpp"
#include "rdm/dataset.hpp"
#include "rdm/error.hpp"
#include "rdm/forward.hpp"
#include "rdm/tiff.hpp"
#include "scenes.hpp"

using namespace rdm;
namespace fs = std::filesystem;

namespace {

std::string data(const std::string& name) { return std::string(RDM_TEST_DATA_DIR) + "/" + name; }

// Fresh directory under the system temp dir, removed on scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = fs::temp_directory_path() / ("rdm_test_" + tag + "_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ErrorKind kind_of(const std::function<void()>& f, std::string* what = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (what) *what = e.what();
    return e.kind();
  }
  FAIL("expected an rdm::Error");
  return ErrorKind::kInvalidArgument;
}

}  // namespace

TEST_CASE("16-bit TIFF scales by the type maximum") {
  const TiffData t = read_tiff(data("gray16.tif"));
  REQUIRE(t.channels.size() == 1);
  CHECK(t.bits_per_sample == 16);
  CHECK_FALSE(t.is_float);
  const Image& img = t.channels[0];
  CHECK(img.rows() == 6);
  CHECK(img.cols() == 8);
  CHECK(img.max() == 1.0);
  CHECK(img(2, 3) == 1.0);
  CHECK(img(0, 5) == doctest::Approx(5000.0 / 65535.0));
  CHECK(img(5, 7) == doctest::Approx(47000.0 / 65535.0));
}

TEST_CASE("float TIFF loads unscaled") {
  const Image img = load_image(data("float32.tif"));
  CHECK(img.rows() == 3);
  CHECK(img(0, 0) == -1.0);
  CHECK(img(2, 3) == 2.0);
}

TEST_CASE("RGB TIFF splits into channels") {
  const auto ch = load_channels(data("rgb8.tif"));
  REQUIRE(ch.size() == 3);
  CHECK(ch[0](1, 2) == doctest::Approx(100.0 / 255.0));
  CHECK(ch[1](3, 0) == doctest::Approx(180.0 / 255.0));
  CHECK(ch[2].min() == 1.0);
  CHECK(kind_of([] { load_image(data("rgb8.tif")); }) == ErrorKind::kFormat);

  TempDir tmp("rgb");
  write_tiff(tmp / "rgb.tif", ch);
  const TiffData back = read_tiff(tmp / "rgb.tif");
  REQUIRE(back.channels.size() == 3);
  CHECK(back.is_float);
  for (int c = 0; c < 3; ++c) {
    // 8-bit values survive the float32 round trip to float precision.
    CHECK(testutil::max_abs_diff(back.channels[c].values(), ch[c].values()) < 1e-7);
  }
}

TEST_CASE("unsupported TIFF fields are named") {
  std::string what;
  CHECK(kind_of([] { read_tiff(data("deflate.tif")); }, &what) == ErrorKind::kFormat);
  CHECK(what.find("Compression") != std::string::npos);
  CHECK(kind_of([] { read_tiff(data("gray32u.tif")); }, &what) == ErrorKind::kFormat);
  CHECK(what.find("BitsPerSample") != std::string::npos);

  TempDir tmp("bad");
  {
    std::ofstream(tmp / "short.tif", std::ios::binary) << "II*";
  }
  CHECK(kind_of([&] { read_tiff(tmp / "short.tif"); }) == ErrorKind::kFormat);
  const std::string whole = slurp(data("gray16.tif"));
  {
    std::ofstream(tmp / "cut.tif", std::ios::binary) << whole.substr(0, whole.size() - 40);
  }
  CHECK(kind_of([&] { read_tiff(tmp / "cut.tif"); }) == ErrorKind::kFormat);
  CHECK(kind_of([&] { read_tiff(tmp / "missing.tif"); }) == ErrorKind::kIo);
}

TEST_CASE("float TIFF save-load is bit-identical") {
  TempDir tmp("float");
  Image img = testutil::random_image(17, 23, 4);
  for (double& v : img.values()) v = static_cast<float>(v * 3.0 - 1.0);
  save_image(img, tmp / "a.tif", "{\"note\": 1}");
  const TiffData t = read_tiff(tmp / "a.tif");
  REQUIRE(t.channels.size() == 1);
  CHECK(t.channels[0] == img);
  CHECK(t.description == "{\"note\": 1}");

  Image wide(4, 4, 0.5);
  wide(0, 0) = -2.0;
  wide(3, 3) = 7.0;
  write_tiff_u8(tmp / "u8.tif", wide);
  const TiffData u = read_tiff(tmp / "u8.tif");
  CHECK(u.bits_per_sample == 8);
  CHECK(u.channels[0](0, 0) == 0.0);
  CHECK(u.channels[0](3, 3) == 1.0);
  CHECK(u.channels[0](1, 1) == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("run config JSON round trip") {
  RunConfig cfg;
  cfg.optical = OpticalConfig::nyquist(31, 40.0, 64);
  cfg.fov_from_image = false;
  cfg.grid.oversample = 2;
  cfg.grid.coverage = Coverage::kInscribed;
  cfg.grid.center = Point{10.5, 11.0};
  cfg.solver.tv_weight = 3e-4;
  cfg.solver.max_iters = 77;
  cfg.detection.patch_size = 31;
  cfg.fit.restarts = 5;
  cfg.blind.scan_points = 9;
  cfg.seed = 99;
  cfg.noise_snr_db = 12.5;

  const Json j = to_json(cfg);
  const RunConfig back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.optical == cfg.optical);
  CHECK(back.grid.center == cfg.grid.center);
  CHECK(back.seed == 99);

  TempDir tmp("cfg");
  write_json(tmp / "c.json", j);
  CHECK(to_json(load_run_config(tmp / "c.json")) == j);

  std::string what;
  Json bad = j;
  bad["solver"]["tv_wieght"] = 1.0;
  CHECK(kind_of([&] { run_config_from_json(bad); }, &what) == ErrorKind::kInvalidArgument);
  CHECK(what.find("tv_wieght") != std::string::npos);
  bad = j;
  bad["seed"] = "seven";
  CHECK(kind_of([&] { run_config_from_json(bad); }, &what) == ErrorKind::kInvalidArgument);
  CHECK(what.find("seed") != std::string::npos);

  CHECK(kind_of([&] { load_run_config(tmp / "nope.json"); }, &what) == ErrorKind::kIo);
  CHECK(what.find("nope.json") != std::string::npos);
  {
    std::ofstream(tmp / "broken.json") << "{ \"seed\": ";
  }
  CHECK(kind_of([&] { load_run_config(tmp / "broken.json"); }) == ErrorKind::kFormat);
}

TEST_CASE("coefficients load bare or from a calibration report") {
  TempDir tmp("coeffs");
  const SeidelCoeffs c{0.85, 0.56, 0.25, 0.29, 0.0};
  write_json(tmp / "bare.json", to_json(c));
  write_json(tmp / "report.json", Json{{"coeffs", to_json(c)}, {"loss", 0.1}});
  CHECK(load_coeffs(tmp / "bare.json") == c);
  CHECK(load_coeffs(tmp / "report.json") == c);
}

TEST_CASE("dataset coefficient sampling stays in range") {
  std::mt19937_64 rng(0);
  for (int k = 0; k < 400; ++k) {
    for (double v : sample_dataset_coeffs(k, rng).as_array()) {
      CHECK(v >= 0.0);
      CHECK(v <= 3.0);
    }
  }
}

TEST_CASE("noise at a target SNR") {
  Image img = testutil::smooth_image(128);
  const Image clean = img;
  std::mt19937_64 rng(3);
  add_noise_snr(img, 10.0, rng);
  const double signal = dot(clean, clean);
  const double noise = dot(img - clean, img - clean);
  CHECK(10.0 * std::log10(signal / noise) == doctest::Approx(10.0).epsilon(0.02));
}

TEST_CASE("gen_dataset") {
  TempDir clean("clean");
  save_image(testutil::blobs(64, 6, 1), clean / "scene.tif");

  RunConfig cfg;
  cfg.optical = OpticalConfig::nyquist(32, 1.0, 64);
  DatasetOptions opt;
  opt.count = 2;
  opt.seed = 5;
  opt.snr_db = 30.0;

  TempDir a("ds_a"), b("ds_b");
  const Json m = gen_dataset(clean.path.string(), a.path.string(), cfg, opt);
  gen_dataset(clean.path.string(), b.path.string(), cfg, opt);

  REQUIRE(m.at("sets").size() == 2);
  for (const auto& set : m.at("sets")) {
    const SeidelCoeffs c = coeffs_from_json(set.at("coeffs"));
    for (double v : c.as_array()) {
      CHECK(v >= 0.0);
      CHECK(v <= 3.0);
    }
    REQUIRE(set.at("pairs").size() == 1);
    const std::string rel = set.at("pairs")[0].at("blurred").get<std::string>();
    CHECK(fs::exists(a / rel));
    CHECK(slurp(a / rel) == slurp(b / rel));
  }
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  CHECK(run_config_from_json(m.at("config")).optical.psf_side == 32);

  verify_manifest(a.path.string());
  {
    std::ofstream(a / "blurred/set001_scene.tif", std::ios::binary | std::ios::app) << "x";
  }
  std::string what;
  CHECK(kind_of([&] { verify_manifest(a.path.string()); }, &what) == ErrorKind::kFormat);
  CHECK(what.find("set001_scene.tif") != std::string::npos);

  TempDir empty("empty");
  CHECK_THROWS_AS(gen_dataset(empty.path.string(), a.path.string(), cfg, opt), Error);
}

TEST_CASE("gen_dataset zero set matches shift-invariant blur") {
  TempDir clean("clean0");
  const Image scene = testutil::blobs(64, 6, 2);
  save_image(scene, clean / "scene.tif");
  RunConfig cfg;
  cfg.optical = OpticalConfig::nyquist(32, 1.0, 64);
  DatasetOptions opt;
  opt.count = 1;
  opt.include_zero = true;
  TempDir out("ds0");
  const Json m = gen_dataset(clean.path.string(), out.path.string(), cfg, opt);
  CHECK(m.at("sets")[0].at("kind") == "zero");

  const Image blurred = load_image(out / "blurred/set000_scene.tif");
  const Image stored = load_image(out / "clean/scene.tif");
  const PolarGrid grid = cfg.grid.make(64);
  const Image lsi = lsi_convolve(stored, synth_psf(SeidelCoeffs{}, 0.0, cfg.optical_for(grid)));
  // Polar resampling floor at this size; measured 3.2e-2.
  CHECK(relative_l2(crop_border(blurred, 4), crop_border(lsi, 4)) < 4e-2);
}

TEST_CASE("bench records") {
  BenchOptions opt;
  opt.sizes = {32};
  opt.levels = {0.0, 0.9};
  opt.trials = 1;
  const auto recs = run_bench(opt);
  REQUIRE(recs.size() == 6);
  CHECK(std::is_sorted(recs.begin(), recs.end(), [](const BenchRecord& x, const BenchRecord& y) {
    return std::tie(x.method, x.n, x.level) < std::tie(y.method, y.n, y.level);
  }));
  for (const auto& r : recs) {
    CHECK(r.wall_time > 0.0);
    if (r.method == BenchMethod::kTrueBlur) CHECK(r.mse_vs_oracle == 0.0);
  }
  // Level 0: no off-axis variation, both models sit at the discretization floor.
  CHECK(recs[2].mse_vs_oracle < 1e-4);
  CHECK(recs[4].mse_vs_oracle < 1e-4);
  CHECK(recs[3].mse_vs_oracle > recs[5].mse_vs_oracle);

  TempDir tmp("bench");
  write_bench_csv(tmp / "b.csv", recs);
  const std::string csv = slurp(tmp / "b.csv");
  CHECK(csv.rfind("method,n,off_axis_norm,wall_time_s,mse_vs_oracle\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);

  opt.oracle_limit = 16;
  for (const auto& r : run_bench(opt)) {
    if (r.method == BenchMethod::kTrueBlur) continue;
    CHECK(std::isnan(r.mse_vs_oracle));
  }
}
