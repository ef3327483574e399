#include <doctest.h>

#include <cmath>
#include <numbers>

#include "scenes.hpp"
#include "rdm/error.hpp"
#include "rdm/polar.hpp"

using namespace rdm;
using testutil::max_abs_diff;

TEST_CASE("grid sizing") {
  const PolarGrid g = PolarGrid::for_image(64);
  CHECK(g.num_radii() == 46);
  CHECK(g.num_angles() == 256);
  CHECK(g.max_radius() == doctest::Approx(31.5 * std::sqrt(2.0)));
  CHECK(g.center() == Point{31.5, 31.5});

  const PolarGrid in = PolarGrid::for_image(64, Coverage::kInscribed);
  CHECK(in.max_radius() == doctest::Approx(31.5));

  const PolarGrid os = PolarGrid::for_image(64, Coverage::kCorners, 2);
  CHECK(os.num_radii() == 91);
  CHECK(os.num_angles() == 512);

  CHECK_THROWS_AS(PolarGrid(3, 4, 10.0, {0, 0}), Error);
  CHECK_THROWS_AS(PolarGrid(8, 0, 10.0, {0, 0}), Error);
}

TEST_CASE("polar image rejects non-finite samples") {
  const PolarGrid g(8, 4, 3.0, {3, 3});
  std::vector<double> v(32, 0.0);
  v[5] = std::nan("");
  CHECK_THROWS_AS(PolarImage(g, v), Error);
  CHECK_THROWS_AS(PolarImage(g, std::vector<double>(31)), Error);
}

TEST_CASE("constant image samples the constant inside the footprint") {
  const int n = 40;
  const Image img(n, n, 2.5);
  const PolarGrid g = PolarGrid::for_image(n);
  const PolarImage p = to_polar(img, g);
  int inside = 0;
  for (int i = 0; i < g.num_angles(); ++i) {
    for (int j = 0; j < g.num_radii(); ++j) {
      const double x = g.center().x + g.radius(j) * std::cos(g.angle(i));
      const double y = g.center().y + g.radius(j) * std::sin(g.angle(i));
      if (x >= 0 && y >= 0 && x <= n - 1 && y <= n - 1) {
        CHECK(p(i, j) == doctest::Approx(2.5).epsilon(1e-12));
        ++inside;
      }
    }
  }
  CHECK(inside > g.num_angles() * g.num_radii() / 2);
}

TEST_CASE("center pixel only reaches the r = 0 column") {
  // Radial step 2 keeps every r > 0 sample out of the center's bilinear cell.
  Image img(33, 33);
  img(16, 16) = 1.0;
  const PolarGrid g(64, 9, 16.0, {16, 16});
  const PolarImage p = to_polar(img, g);
  for (int i = 0; i < g.num_angles(); ++i) {
    CHECK(p(i, 0) == 1.0);
    for (int j = 1; j < g.num_radii(); ++j) CHECK(p(i, j) == 0.0);
  }
}

TEST_CASE("center outside the image is an invalid grid") {
  const Image img(16, 16, 1.0);
  const PolarGrid g(16, 8, 10.0, {20.0, 5.0});
  try {
    to_polar(img, g);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidGrid);
  }
  CHECK_THROWS_AS(from_polar(PolarImage(g), 16), Error);
}

TEST_CASE("to_polar is linear") {
  const int n = 48;
  const PolarGrid g = PolarGrid::for_image(n);
  const Image x = testutil::random_image(n, n, 1), y = testutil::random_image(n, n, 2);
  const PolarImage lhs = to_polar(x * 1.7 + y * -0.3, g);
  const PolarImage px = to_polar(x, g), py = to_polar(y, g);
  double worst = 0.0;
  for (int i = 0; i < g.num_angles(); ++i) {
    for (int j = 0; j < g.num_radii(); ++j) {
      worst = std::max(worst, std::abs(lhs(i, j) - (1.7 * px(i, j) - 0.3 * py(i, j))));
    }
  }
  CHECK(worst < 1e-13);
}

TEST_CASE("rotation by one angular step is a one-sample shift") {
  // Oracle: the analytic test function rotated exactly, then resampled.
  const int n = 64;
  const PolarGrid g = PolarGrid::for_image(n);
  const double a = g.angular_step();
  const Point c = g.center();
  Image rotated(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double dx = x - c.x, dy = y - c.y;
      const double sx = c.x + std::cos(a) * dx + std::sin(a) * dy;
      const double sy = c.y - std::sin(a) * dx + std::cos(a) * dy;
      rotated(y, x) = testutil::smooth_fn(sx, sy, n);
    }
  }
  const PolarImage lhs = to_polar(rotated, g);
  const PolarImage rhs = shift_angles(to_polar(testutil::smooth_image(n), g), 1);
  // Compare inside the inscribed disk, where both images are fully defined.
  double worst = 0.0;
  for (int i = 0; i < g.num_angles(); ++i) {
    for (int j = 0; g.radius(j) <= (n - 1) / 2.0 - 1; ++j) {
      worst = std::max(worst, std::abs(lhs(i, j) - rhs(i, j)));
    }
  }
  // Measured 4.47e-3 on this image.
  CHECK(worst < 5.5e-3);
}

TEST_CASE("samples depend only on pixels within r +- sqrt(2)") {
  const int n = 48;
  const PolarGrid g = PolarGrid::for_image(n);
  const Image base = testutil::random_image(n, n, 3);
  const int j = 12;
  const double r = g.radius(j);
  Image perturbed = base;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double d = std::hypot(x - g.center().x, y - g.center().y);
      if (std::abs(d - r) > std::sqrt(2.0)) perturbed(y, x) += 10.0;
    }
  }
  const PolarImage a = to_polar(base, g), b = to_polar(perturbed, g);
  for (int i = 0; i < g.num_angles(); ++i) CHECK(a(i, j) == b(i, j));
}

TEST_CASE("from_polar basics") {
  const int n = 40;
  const PolarGrid g = PolarGrid::for_image(n);
  const Image z = from_polar(PolarImage(g), n);
  CHECK(z.max() == 0.0);
  CHECK(z.min() == 0.0);

  const Image c = from_polar(to_polar(Image(n, n, 0.7), g), n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (std::hypot(x - g.center().x, y - g.center().y) <= (n - 1) / 2.0) {
        CHECK(c(y, x) == doctest::Approx(0.7).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("pixels beyond the grid radius are zero") {
  const int n = 32;
  const PolarGrid g = PolarGrid::for_image(n, Coverage::kInscribed);
  const Image out = from_polar(to_polar(Image(n, n, 1.0), g), n);
  CHECK(out(0, 0) == 0.0);
  CHECK(out(n - 1, n - 1) == 0.0);
}

TEST_CASE("round trip on a smooth 128 image") {
  const int n = 128;
  const PolarGrid g = PolarGrid::for_image(n);
  const Image img = testutil::smooth_image(n);
  const Image back = from_polar(to_polar(img, g), n);
  const double err = relative_l2(crop_border(back, 1), crop_border(img, 1));
  // Measured 3.28e-3.
  CHECK(err < 4.0e-3);
}

TEST_CASE("adjoint pairs") {
  const int n = 36;
  const PolarGrid g = PolarGrid::for_image(n);
  const Image x = testutil::random_image(n, n, 4);
  const PolarImage p(g, [&] {
    std::vector<double> v(static_cast<std::size_t>(g.num_angles()) * g.num_radii());
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (double& s : v) s = u(rng);
    return v;
  }());
  const double a = dot(to_polar(x, g), p), b = dot(x, to_polar_adjoint(p, n, n));
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
  const double c = dot(from_polar(p, n), x), d = dot(p, from_polar_adjoint(x, g));
  CHECK(c == doctest::Approx(d).epsilon(1e-12));
  const double e = dot(polar_splat(x, g), p), f = dot(x, polar_splat_adjoint(p, n));
  CHECK(e == doctest::Approx(f).epsilon(1e-12));
}

TEST_CASE("splat conserves flux of interior objects") {
  const int n = 48;
  const PolarGrid g = PolarGrid::for_image(n);
  Image img(n, n);
  img(20, 27) = 3.0;
  img(30, 15) = 1.0;
  const PolarImage p = polar_splat(img, g);
  double flux = 0.0;
  for (int i = 0; i < g.num_angles(); ++i) {
    for (int j = 0; j < g.num_radii(); ++j) flux += p(i, j) * node_area(g, j);
  }
  CHECK(flux == doctest::Approx(4.0).epsilon(1e-10));
}
