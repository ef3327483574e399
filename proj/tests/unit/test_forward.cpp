#include <doctest.h>

#include <cmath>
#include <numbers>

#include "scenes.hpp"
#include "rdm/error.hpp"
#include "rdm/forward.hpp"

using namespace rdm;

namespace {

// Polar delta kernels: ring j maps onto ring j with unit gain.
std::vector<PolarImage> delta_kernels(const PolarGrid& g) {
  std::vector<PolarImage> out;
  for (int j = 0; j < g.num_radii(); ++j) {
    PolarImage p(g);
    p(0, j) = 1.0 / node_area(g, j);
    out.push_back(p);
  }
  return out;
}

PolarImage random_polar(const PolarGrid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PolarImage p(g);
  for (double& v : p.values()) v = u(rng);
  return p;
}

}  // namespace

TEST_CASE("ring spectra are deterministic and validated") {
  const int n = 32;
  const PolarGrid g = PolarGrid::for_image(n);
  const OpticalConfig cfg = OpticalConfig::nyquist(16, g.max_radius(), 16);
  const PsfRadialStack st = synth_radial_psfs({0.3, 0.4, 0.2, 0.3, 0.1}, g, cfg);
  const RingSpectrumStack a = precompute_ring_spectra(st, g);
  const RingSpectrumStack b = precompute_ring_spectra(st, g);
  CHECK(a == b);
  CHECK(a.all_finite());
  CHECK(a.num_sources() == g.num_radii());
  CHECK(a.num_freqs() == g.num_angles() / 2 + 1);

  const PolarGrid other(g.num_angles(), g.num_radii(), g.max_radius() * 0.9, g.center());
  try {
    precompute_ring_spectra(st, other);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidArgument);
  }
}

TEST_CASE("full-spectrum accessor is conjugate symmetric") {
  const PolarGrid g(16, 6, 10.0, {10, 10});
  std::vector<PolarImage> k;
  for (int j = 0; j < 6; ++j) k.push_back(random_polar(g, 10 + j));
  const RingSpectrumStack s = RingSpectrumStack::from_polar_psfs(k);
  for (int j = 0; j < 6; ++j) {
    for (int i = 0; i < 6; ++i) {
      for (int xi = 1; xi < 16; ++xi) {
        CHECK(std::abs(s.at(j, i, xi) - std::conj(s.at(j, i, 16 - xi))) < 1e-12);
      }
    }
  }
}

TEST_CASE("delta patch stays on its own ring") {
  const PolarGrid g(64, 9, 16.0, {16, 16});
  const OpticalConfig cfg = OpticalConfig::nyquist(15, 16.0, 16);
  PsfRadialStack st{{}, g, 16.0};
  for (int j = 0; j < 9; ++j) {
    Psf p{Image(15, 15), g.radius(j) / 16.0};
    p.intensity(7, 7) = 1.0;
    st.psfs.push_back(p);
  }
  const RingSpectrumStack s = precompute_ring_spectra(st, g);
  for (int j = 0; j < 9; ++j) {
    for (int i = 0; i < 9; ++i) {
      if (!s.in_band(j, i) || i == j) continue;
      for (auto v : s.row(j, i)) CHECK(std::abs(v) == 0.0);
    }
  }
  // The on-axis delta is a constant ring: only xi = 0 survives.
  auto r0 = s.row(0, 0);
  CHECK(r0[0].real() == doctest::Approx(64.0));
  for (std::size_t xi = 1; xi < r0.size(); ++xi) CHECK(std::abs(r0[xi]) < 1e-12);
}

TEST_CASE("on-axis symmetric psf concentrates at zero frequency") {
  const PolarGrid g = PolarGrid::for_image(48);
  const OpticalConfig cfg = OpticalConfig::nyquist(24, g.max_radius(), 32);
  const RingSpectrumStack s = precompute_ring_spectra(synth_radial_psfs({}, g, cfg), g);
  double dc = 0.0, rest = 0.0;
  for (int i = s.band_begin(0); i < s.band_end(0); ++i) {
    auto row = s.row(0, i);
    dc += std::norm(row[0]);
    for (std::size_t xi = 1; xi < row.size(); ++xi) rest += std::norm(row[xi]);
  }
  // Leakage comes only from bilinear sampling of the patch; measured 5.1e-4.
  CHECK(rest / dc < 7e-4);
}

TEST_CASE("delta kernels make ring convolution the resampling round trip") {
  const int n = 40;
  const PolarGrid g = PolarGrid::for_image(n);
  const RingSpectrumStack s = RingSpectrumStack::from_polar_psfs(delta_kernels(g));
  const PolarImage p = random_polar(g, 3);
  const PolarImage q = ring_convolve_polar(p, s);
  CHECK(testutil::max_abs_diff(q.values(), p.values()) < 1e-12);

  const Image obj = testutil::smooth_image(n);
  const Image out = ring_convolve(obj, s, g);
  const Image direct = from_polar(polar_splat(obj, g), n);
  CHECK(testutil::max_abs_diff(out.values(), direct.values()) < 1e-12);
}

TEST_CASE("ring convolution polar adjoint") {
  const PolarGrid g = PolarGrid::for_image(24);
  const OpticalConfig cfg = OpticalConfig::nyquist(12, g.max_radius(), 16);
  const RingSpectrumStack s =
      precompute_ring_spectra(synth_radial_psfs({0.4, 0.6, 0.3, 0.5, 0.2}, g, cfg), g);
  const PolarImage x = random_polar(g, 1), y = random_polar(g, 2);
  const double a = dot(ring_convolve_polar(x, s), y);
  const double b = dot(x, ring_convolve_polar_adjoint(y, s));
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("radius-independent psf reduces ring convolution to lsi") {
  const int n = 128;
  const PolarGrid g = PolarGrid::for_image(n);
  const OpticalConfig cfg = OpticalConfig::nyquist(32, g.max_radius(), 32);
  const SeidelCoeffs c{0.5, 0, 0, 0, 0};
  const Image obj = testutil::blobs(n, 60, 4);
  const Image ring = ring_convolve(obj, precompute_ring_spectra(synth_radial_psfs(c, g, cfg), g), g);
  const Image lsi = lsi_convolve(obj, synth_psf(c, 0.0, cfg));
  const double err = relative_l2(ring, lsi);
  // Measured 2.06e-2, the polar resampling error on this image.
  CHECK(err < 2.5e-2);
}

TEST_CASE("ring convolution tracks the superposition oracle") {
  const int n = 64;
  const PolarGrid g = PolarGrid::for_image(n, Coverage::kCorners, 2);
  const OpticalConfig cfg = OpticalConfig::nyquist(n, g.max_radius(), n);
  const SeidelCoeffs c{0.3, 0.9, 0.6, 0.8, 0.4};
  REQUIRE(c.off_axis_norm() < 1.5);
  const Image obj = testutil::blobs(n, 30, 9);
  SuperposeOptions so;
  so.center = g.center();
  const Image truth = superpose_blur(obj, c, cfg, so);
  const Image ring = ring_convolve(obj, precompute_ring_spectra(synth_radial_psfs(c, g, cfg), g), g);
  const Image lsi = lsi_convolve(obj, synth_psf(c, 0.0, cfg));
  CHECK(relative_l2(ring, truth) < 0.03);
  CHECK(relative_l2(ring, truth) < relative_l2(lsi, truth));
}

TEST_CASE("ring convolution commutes with quarter turns") {
  const int n = 48;
  const PolarGrid g = PolarGrid::for_image(n);
  const OpticalConfig cfg = OpticalConfig::nyquist(24, g.max_radius(), 32);
  const RingSpectrumStack s =
      precompute_ring_spectra(synth_radial_psfs({0.3, 0.7, 0.4, 0.5, 0.2}, g, cfg), g);
  const Image obj = testutil::blobs(n, 25, 2);
  // Quarter turn about the image center, +x toward +y, as an exact
  // pixel permutation.
  auto turn = [n](const Image& img) {
    Image out(n, n);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) out(y, x) = img(n - 1 - x, y);
    }
    return out;
  };
  const Image a = ring_convolve(turn(obj), s, g);
  const Image b = turn(ring_convolve(obj, s, g));
  CHECK(relative_l2(a, b) < 1e-12);

  const PolarImage p = polar_splat(obj, g);
  const PolarImage lhs = ring_convolve_polar(shift_angles(p, 5), s);
  const PolarImage rhs = shift_angles(ring_convolve_polar(p, s), 5);
  CHECK(testutil::max_abs_diff(lhs.values(), rhs.values()) < 1e-12);
}

TEST_CASE("ring convolution conserves flux") {
  const int n = 64;
  const PolarGrid g = PolarGrid::for_image(n);
  const OpticalConfig cfg = OpticalConfig::nyquist(16, g.max_radius(), 16);
  const RingSpectrumStack s =
      precompute_ring_spectra(synth_radial_psfs({0.2, 0.3, 0.2, 0.3, 0.1}, g, cfg), g);
  Image obj(n, n);
  for (int y = 16; y < 48; ++y) {
    for (int x = 16; x < 48; ++x) {
      if (std::hypot(x - 31.5, y - 31.5) < 14) obj(y, x) = testutil::smooth_fn(x, y, n);
    }
  }
  CHECK(ring_convolve(obj, s, g).sum() == doctest::Approx(obj.sum()).epsilon(0.01));
}

TEST_CASE("superposition oracle examples") {
  const int n = 33;
  const OpticalConfig cfg = OpticalConfig::nyquist(33, 24.0, 34);
  const SeidelCoeffs c{0.4, 0.6, 0.3, 0.4, 0.1};
  const RadialPsfTable table = RadialPsfTable::build(c, cfg, 23.0, 0.5);

  Image center(n, n);
  center(16, 16) = 1.0;
  const Image a = superpose_blur(center, table);
  CHECK(testutil::max_abs_diff(a.values(), table.psfs[0].values()) < 1e-15);

  // Off-axis source at radius 5 (a table node), angle atan2(4, 3).
  Image off(n, n);
  off(20, 19) = 1.0;
  const Image b = superpose_blur(off, table);
  const double theta = std::atan2(4.0, 3.0);
  const Image& canon = table.psfs[10];
  double worst = 0.0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double rx = x - 19, ry = y - 20;
      const double qx = 16 + std::cos(theta) * rx + std::sin(theta) * ry;
      const double qy = 16 - std::sin(theta) * rx + std::cos(theta) * ry;
      worst = std::max(worst, std::abs(b(y, x) - sample_bilinear(canon, qx, qy)));
    }
  }
  CHECK(worst < 1e-15);
  CHECK(synth_psf(c, 5.0 / 24.0, cfg).intensity == canon);

  const Image both = superpose_blur(center + off, table);
  CHECK(testutil::max_abs_diff(both.values(), (a + b).values()) < 1e-15);
}

TEST_CASE("superposition refuses large images without override") {
  RadialPsfTable table;
  table.psfs.push_back(Image(3, 3, 1.0 / 9));
  const Image big(300, 300);
  try {
    superpose_blur(big, table);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIntractable);
  }
  SuperposeOptions so;
  so.allow_large = true;
  CHECK_NOTHROW(superpose_blur(Image(300, 300), table, so));
}

TEST_CASE("lsi convolution") {
  const int n = 32;
  Psf delta{Image(7, 7), 0.0};
  delta.intensity(3, 3) = 1.0;
  const Image obj = testutil::random_image(n, n, 8);
  CHECK(testutil::max_abs_diff(lsi_convolve(obj, delta).values(), obj.values()) < 1e-12);

  const OpticalConfig cfg = OpticalConfig::nyquist(9, 10.0, 10);
  const Psf p = synth_psf({0.5, 0, 0, 0, 0}, 0.0, cfg);
  const Image flat = lsi_convolve(Image(n, n, 2.0), p);
  for (int y = 5; y < n - 5; ++y) {
    for (int x = 5; x < n - 5; ++x) CHECK(flat(y, x) == doctest::Approx(2.0).epsilon(1e-12));
  }
  // Flux that leaves the frame is discarded.
  CHECK(flat(0, 0) < 2.0);

  const Image y = testutil::random_image(n, n, 9);
  CHECK(dot(lsi_convolve(obj, p), y) == doctest::Approx(dot(obj, lsi_correlate(y, p))).epsilon(1e-12));
}

TEST_CASE("forward models are linear") {
  const int n = 32;
  const PolarGrid g = PolarGrid::for_image(n);
  const OpticalConfig cfg = OpticalConfig::nyquist(16, g.max_radius(), 16);
  const SeidelCoeffs c{0.2, 0.5, 0.3, 0.2, 0.1};
  const RingSpectrumStack s = precompute_ring_spectra(synth_radial_psfs(c, g, cfg), g);
  const Psf p = synth_psf(c, 0.0, cfg);
  SuperposeOptions so;
  so.center = g.center();
  const RadialPsfTable table = RadialPsfTable::build(c, cfg, g.max_radius(), 0.5);
  const Image x = testutil::random_image(n, n, 1), y = testutil::random_image(n, n, 2);
  const Image mix = x * 0.6 + y * 1.9;
  auto check = [&](auto&& f) {
    const Image lhs = f(mix);
    const Image rhs = f(x) * 0.6 + f(y) * 1.9;
    CHECK(relative_l2(lhs, rhs) < 1e-12);
  };
  check([&](const Image& o) { return ring_convolve(o, s, g); });
  check([&](const Image& o) { return lsi_convolve(o, p); });
  check([&](const Image& o) { return superpose_blur(o, table, so); });
}
