#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "patches.hpp"
#include "rdm/calibration.hpp"
#include "rdm/dataset.hpp"
#include "rdm/error.hpp"

using namespace rdm;

namespace {

const std::vector<Point> kDeltas{{20, 24}, {90, 17}, {64, 64}, {31, 101}, {105, 92}};

Image delta_field() {
  Image img(128, 128);
  for (const Point& p : kDeltas) img(static_cast<int>(p.y), static_cast<int>(p.x)) = 1.0;
  return img;
}

DetectionConfig small_patches() {
  DetectionConfig cfg;
  cfg.patch_size = 15;
  return cfg;
}

double nearest_delta(Point p) {
  double best = 1e300;
  for (const Point& q : kDeltas) best = std::min(best, std::hypot(p.x - q.x, p.y - q.y));
  return best;
}

OpticalConfig fit_optics() { return OpticalConfig::nyquist(63, 128, 64); }

}  // namespace

TEST_CASE("detect_sources finds noiseless deltas exactly") {
  const Detection d = detect_sources(delta_field(), small_patches());
  REQUIRE(d.patches.size() == kDeltas.size());
  for (const auto& sp : d.patches) {
    CHECK(nearest_delta(sp.center) < 0.1);
    CHECK(sp.patch.rows() == 15);
    CHECK(sp.field_radius >= 0.0);
    CHECK(sp.field_radius <= 1.0);
    CHECK(sp.patch.sum() == doctest::Approx(1.0));
    CHECK(sp.patch.min() >= 0.0);
  }
  // The delta at the image center sits at radius ~0.
  const auto on_axis = std::min_element(
      d.patches.begin(), d.patches.end(),
      [](const SourcePatch& a, const SourcePatch& b) { return a.field_radius < b.field_radius; });
  CHECK(on_axis->field_radius < 0.01);
}

TEST_CASE("detect_sources tolerates 10 dB noise") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Image img = delta_field();
    std::mt19937_64 rng(seed);
    add_noise_snr(img, 10.0, rng);
    const Detection d = detect_sources(img, small_patches());
    REQUIRE(d.patches.size() == kDeltas.size());
    for (const auto& sp : d.patches) worst = std::max(worst, nearest_delta(sp.center));
  }
  CHECK(worst < 0.5);
}

TEST_CASE("detect_sources field geometry and overlap handling") {
  Image img(65, 65);
  img(32, 52) = 1.0;  // +x of the center
  img(12, 32) = 0.8;  // -y (up)
  img(12, 36) = 0.5;  // too close to the one above
  DetectionConfig cfg = small_patches();
  cfg.fov_pixels = 25.0;
  const Detection d = detect_sources(img, cfg);
  REQUIRE(d.patches.size() == 2);
  CHECK(d.dropped_overlaps == 1);
  CHECK(d.patches[0].field_radius == doctest::Approx(0.8));
  CHECK(d.patches[0].center == Point{52, 32});
  CHECK(d.patches[0].field_angle == doctest::Approx(0.0));
  CHECK(d.patches[1].field_angle == doctest::Approx(-std::numbers::pi / 2));
  CHECK(d.patches[1].center.x == doctest::Approx(32.0));
  CHECK(d.patches[1].center.y == doctest::Approx(12.0));

  cfg.fov_pixels = 10.0;
  CHECK_THROWS_AS(detect_sources(img, cfg), Error);
}

TEST_CASE("detect_sources rejects empty images") {
  try {
    detect_sources(Image(32, 32), DetectionConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEmptyCalibration);
  }
  DetectionConfig bad;
  bad.patch_size = 64;
  CHECK_THROWS_AS(detect_sources(delta_field(), bad), Error);
}

TEST_CASE("normalize_patch") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image p(21, 21);
  for (double& v : p.values()) v = u(rng);
  p(10, 10) = 20.0;

  const Image a = normalize_patch(p);
  CHECK(a.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(a.min() >= 0.0);

  Image shifted = p;
  for (double& v : shifted.values()) v += 3.25;
  const Image b = normalize_patch(shifted);
  double diff = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) diff = std::max(diff, std::abs(a.values()[k] - b.values()[k]));
  CHECK(diff < 1e-14);

  const Image at = normalize_patch(p, 3.0);
  const Image bt = normalize_patch(shifted, 3.0);
  CHECK(at.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(at(10, 10) > a(10, 10));
  diff = 0.0;
  for (std::size_t k = 0; k < at.size(); ++k) diff = std::max(diff, std::abs(at.values()[k] - bt.values()[k]));
  CHECK(diff < 1e-14);

  try {
    normalize_patch(Image(9, 9, 2.0));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegeneratePatch);
  }
}

TEST_CASE("normalize_patch keeps a noisy delta centered") {
  // Noise at 5% of the delta height on a 10% pedestal; worst centroid shift
  // over 200 draws.
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.05);
    Image p(31, 31, 0.1);
    p(15, 15) += 1.0;
    for (double& v : p.values()) v += noise(rng);
    const Image q = normalize_patch(p, 5.0);
    double cx = 0.0, cy = 0.0;
    for (int y = 0; y < 31; ++y) {
      for (int x = 0; x < 31; ++x) {
        cx += q(y, x) * x;
        cy += q(y, x) * y;
      }
    }
    worst = std::max(worst, std::hypot(cx - 15.0, cy - 15.0));
  }
  // Measured 0: only the delta clears the threshold.
  CHECK(worst < 0.2);
}

TEST_CASE("fit_loss gradient matches central differences") {
  const OpticalConfig cfg = OpticalConfig::nyquist(31, 64, 32);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    const SeidelCoeffs truth{u(rng), u(rng), u(rng), u(rng), u(rng)};
    const auto patches = testutil::model_patches(truth, cfg, rng, 4);
    const SeidelCoeffs at{u(rng), u(rng), u(rng), u(rng), u(rng)};
    std::array<double, SeidelCoeffs::kCount> g{};
    fit_loss(patches, at, cfg, &g);
    const auto a = at.as_array();
    for (int k = 0; k < SeidelCoeffs::kCount; ++k) {
      const double h = 1e-5;
      auto p = a, m = a;
      p[k] += h;
      m[k] -= h;
      const double fd = (fit_loss(patches, SeidelCoeffs::from_array(p), cfg) -
                         fit_loss(patches, SeidelCoeffs::from_array(m), cfg)) /
                        (2 * h);
      worst = std::max(worst, std::abs(g[k] - fd) / std::max(std::abs(fd), 1e-3));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("loss vanishes at the generating coefficients") {
  const OpticalConfig cfg = OpticalConfig::nyquist(31, 64, 32);
  std::mt19937_64 rng(2);
  const SeidelCoeffs c{0.85, 0.56, 0.25, 0.29, 0.0};
  const auto patches = testutil::model_patches(c, cfg, rng, 6);
  std::vector<double> per;
  CHECK(fit_loss(patches, c, cfg, nullptr, &per) < 1e-12);
  CHECK(per.size() == 6);
  CHECK(fit_loss(patches, SeidelCoeffs{0.85, 0.56, 0.5, 0.29, 0.0}, cfg) > 1e-3);
}

TEST_CASE("canonical_twin") {
  const SeidelCoeffs c{-0.5, 0.3, -0.2, 0.1, 0.4};
  const SeidelCoeffs t = canonical_twin(c);
  CHECK(t == SeidelCoeffs{0.5, 0.3, 0.2, -0.1, 0.4});
  CHECK(canonical_twin(t) == t);

  // Both members of a twin pair give the same loss.
  const OpticalConfig cfg = OpticalConfig::nyquist(31, 64, 32);
  std::mt19937_64 rng(5);
  const auto patches = testutil::model_patches(t, cfg, rng, 3);
  CHECK(std::abs(fit_loss(patches, c, cfg) - fit_loss(patches, t, cfg)) < 1e-12);
}

TEST_CASE("fit_seidel recovers the Miniscope coefficients") {
  const OpticalConfig cfg = fit_optics();
  std::mt19937_64 rng(3);
  const SeidelCoeffs truth{0.85, 0.56, 0.25, 0.29, 0.0};
  const auto patches = testutil::model_patches(truth, cfg, rng, 6);
  const FitReport rep = fit_seidel(patches, cfg);
  INFO("error " << testutil::max_coeff_error(rep.coeffs, truth));
  CHECK(testutil::max_coeff_error(rep.coeffs, truth) < 0.05);
  CHECK(rep.per_patch_residual.size() == 6);
  CHECK(rep.restart_losses.size() == 3);
  REQUIRE(!rep.per_iteration_loss.empty());
  for (double l : rep.per_iteration_loss) CHECK(std::isfinite(l));
  CHECK(std::all_of(rep.constrained.begin(), rep.constrained.end(), [](bool b) { return b; }));

  SUBCASE("rotating every source about the axis changes nothing") {
    auto turned = patches;
    const double phi = 0.7;
    for (auto& sp : turned) {
      sp.field_angle += phi;
      sp.center = {1000.0 + sp.field_radius * cfg.fov_pixels() * std::cos(sp.field_angle),
                   1000.0 + sp.field_radius * cfg.fov_pixels() * std::sin(sp.field_angle)};
      sp.signal = render_patch_model(sp, truth, cfg);
      sp.patch = normalize_patch(sp.signal);
    }
    const FitReport r2 = fit_seidel(turned, cfg);
    CHECK(testutil::max_coeff_error(r2.coeffs, rep.coeffs) < 0.05);
  }
}

TEST_CASE("fit_seidel on aberration-free patches stays near zero") {
  const OpticalConfig cfg = fit_optics();
  std::mt19937_64 rng(4);
  const auto patches = testutil::model_patches(SeidelCoeffs{}, cfg, rng, 6);
  CHECK(fit_loss(patches, SeidelCoeffs{}, cfg) < 1e-12);
  const FitReport rep = fit_seidel(patches, cfg);
  for (double v : rep.coeffs.as_array()) CHECK(std::abs(v) < 0.02);
}

TEST_CASE("on-axis sources fit only spherical aberration") {
  const OpticalConfig cfg = OpticalConfig::nyquist(31, 64, 32);
  SourcePatch sp;
  sp.center = {500.0, 500.0};
  sp.signal = Image(31, 31);
  sp.signal = render_patch_model(sp, SeidelCoeffs{0.6, 0, 0, 0, 0}, cfg);
  sp.patch = normalize_patch(sp.signal);
  FitSettings fs;
  fs.iterations = 150;
  const FitReport rep = fit_seidel({sp}, cfg, fs);
  CHECK(rep.constrained[0]);
  for (int k = 1; k < SeidelCoeffs::kCount; ++k) {
    CHECK_FALSE(rep.constrained[k]);
    CHECK(rep.coeffs.as_array()[k] == 0.0);
  }
  CHECK(std::abs(rep.coeffs.sphere - 0.6) < 0.05);
}

TEST_CASE("fit_seidel surfaces divergence with its report") {
  const OpticalConfig cfg = OpticalConfig::nyquist(31, 64, 32);
  std::mt19937_64 rng(8);
  const auto patches = testutil::model_patches(SeidelCoeffs{0.5, 0.5, 0, 0, 0}, cfg, rng, 2);
  FitSettings fs;
  fs.step = 1e308;
  fs.restarts = 1;
  try {
    fit_seidel(patches, cfg, fs);
    FAIL("expected divergence");
  } catch (const NonConvergenceError& e) {
    CHECK(e.kind() == ErrorKind::kNonConvergence);
    CHECK(!e.report().per_iteration_loss.empty());
  }
  CHECK_THROWS_AS(fit_seidel({}, cfg), Error);
}
