#include "rdm/reference.hpp"

#include <cmath>
#include <numbers>

#include "rdm/error.hpp"

namespace rdm::reference {

PolarImage to_polar(const Image& img, const PolarGrid& grid) {
  PolarImage out(grid);
  const Point c = grid.center();
  for (int i = 0; i < grid.num_angles(); ++i) {
    const double theta = grid.angle(i);
    for (int j = 0; j < grid.num_radii(); ++j) {
      const double r = grid.radius(j);
      out(i, j) = sample_bilinear(img, c.x + r * std::cos(theta), c.y + r * std::sin(theta));
    }
  }
  return out;
}

Image from_polar(const PolarImage& pimg, int n) {
  const PolarGrid& grid = pimg.grid();
  const int m = grid.num_angles();
  const int k = grid.num_radii();
  Image out(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double dx = x - grid.center().x;
      const double dy = y - grid.center().y;
      const double rho = std::sqrt(dx * dx + dy * dy);
      if (rho > grid.max_radius() * (1.0 + 1e-12) + 1e-12) continue;
      double phi = std::atan2(dy, dx);
      if (phi < 0.0) phi += 2.0 * std::numbers::pi;
      const double a = phi / grid.angular_step();
      const double b = std::min(rho / grid.radial_step(), k - 1.0);
      const int a0 = static_cast<int>(std::floor(a));
      const int b0 = std::min(static_cast<int>(b), k - 2);
      const double fa = a - a0;
      const double fb = b - b0;
      const int i0 = ((a0 % m) + m) % m;
      const int i1 = (i0 + 1) % m;
      out(y, x) = (1 - fb) * ((1 - fa) * pimg(i0, b0) + fa * pimg(i1, b0)) +
                  fb * ((1 - fa) * pimg(i0, b0 + 1) + fa * pimg(i1, b0 + 1));
    }
  }
  return out;
}

PolarImage ring_convolve_polar(const PolarImage& g, const std::vector<PolarImage>& psfs) {
  const PolarGrid& grid = g.grid();
  const int m = grid.num_angles();
  const int k = grid.num_radii();
  require(static_cast<int>(psfs.size()) == k, ErrorKind::kInvalidArgument,
          "need one polar PSF per radius");
  PolarImage out(grid);
  for (int i = 0; i < k; ++i) {
    for (int n = 0; n < m; ++n) {
      double acc = 0.0;
      for (int j = 0; j < k; ++j) {
        const double w = grid.radial_weight(j) * grid.angular_step();
        double ring = 0.0;
        for (int a = 0; a < m; ++a) ring += g(a, j) * psfs[j]((n - a + m) % m, i);
        acc += w * ring;
      }
      out(n, i) = acc;
    }
  }
  return out;
}

Image superpose_blur(const Image& obj, const RadialPsfTable& table, Point center) {
  const int n = obj.rows();
  const int nodes = static_cast<int>(table.psfs.size());
  Image out(n, n);
  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < n; ++u) {
      const double g = obj(v, u);
      if (g == 0.0) continue;
      const double dx = u - center.x;
      const double dy = v - center.y;
      const double theta = std::atan2(dy, dx);
      double pos = nodes > 1 ? std::hypot(dx, dy) / table.spacing_px : 0.0;
      pos = std::min(pos, nodes - 1.0);
      const int node = nodes > 1 ? std::min(static_cast<int>(pos), nodes - 2) : 0;
      const double frac = nodes > 1 ? pos - node : 0.0;
      Image psf = table.psfs[node] * (1.0 - frac);
      if (nodes > 1) psf += table.psfs[node + 1] * frac;
      const double pcx = psf.cols() / 2;
      const double pcy = psf.rows() / 2;
      const double c = std::cos(theta);
      const double s = std::sin(theta);
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          const double rx = x - u;
          const double ry = y - v;
          out(y, x) += g * sample_bilinear(psf, pcx + c * rx + s * ry, pcy - s * rx + c * ry);
        }
      }
    }
  }
  return out;
}

}  // namespace rdm::reference
