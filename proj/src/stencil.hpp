#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>

#include "rdm/polar.hpp"

namespace rdm::detail {

// Up to four (flat index, weight) pairs of a bilinear interpolation. Shared
// by every resampler and its transpose so the two stay exact adjoints.
struct Stencil {
  std::size_t index[4];
  double weight[4];
  int count = 0;
};

// Bilinear stencil into a rows x cols row-major image with a hard
// footprint [0, cols-1] x [0, rows-1].
inline Stencil cartesian_stencil(double x, double y, int rows, int cols) {
  Stencil s;
  if (!(x >= 0.0 && y >= 0.0 && x <= cols - 1 && y <= rows - 1)) return s;
  int x0 = static_cast<int>(x);
  int y0 = static_cast<int>(y);
  if (x0 == cols - 1 && cols > 1) --x0;
  if (y0 == rows - 1 && rows > 1) --y0;
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = cols > 1 ? x0 + 1 : x0;
  const int y1 = rows > 1 ? y0 + 1 : y0;
  auto idx = [cols](int yy, int xx) {
    return static_cast<std::size_t>(yy) * cols + xx;
  };
  s.index[0] = idx(y0, x0);
  s.weight[0] = (1 - fx) * (1 - fy);
  s.index[1] = idx(y0, x1);
  s.weight[1] = fx * (1 - fy);
  s.index[2] = idx(y1, x0);
  s.weight[2] = (1 - fx) * fy;
  s.index[3] = idx(y1, x1);
  s.weight[3] = fx * fy;
  s.count = 4;
  return s;
}

// Bilinear stencil into the angle-major polar sample array at pixel (x, y),
// periodic in angle. Empty beyond max_radius.
inline Stencil polar_stencil(const PolarGrid& grid, int x, int y) {
  Stencil s;
  const double dx = x - grid.center().x;
  const double dy = y - grid.center().y;
  const double rho = std::hypot(dx, dy);
  const double rmax = grid.max_radius();
  if (rho > rmax * (1.0 + 1e-12) + 1e-12) return s;
  const int m = grid.num_angles();
  const int k = grid.num_radii();
  double phi = std::atan2(dy, dx);
  if (phi < 0.0) phi += 2.0 * std::numbers::pi;
  double a = phi / grid.angular_step();
  int a0 = static_cast<int>(std::floor(a));
  double fa = a - a0;
  a0 %= m;
  if (a0 < 0) a0 += m;
  const int a1 = (a0 + 1) % m;
  double b = grid.radial_step() > 0.0 ? rho / grid.radial_step() : 0.0;
  if (b > k - 1) b = k - 1;
  int b0 = static_cast<int>(b);
  if (b0 >= k - 1) b0 = k - 2;
  const double fb = b - b0;
  auto idx = [k](int ai, int bi) { return static_cast<std::size_t>(ai) * k + bi; };
  s.index[0] = idx(a0, b0);
  s.weight[0] = (1 - fa) * (1 - fb);
  s.index[1] = idx(a1, b0);
  s.weight[1] = fa * (1 - fb);
  s.index[2] = idx(a0, b0 + 1);
  s.weight[2] = (1 - fa) * fb;
  s.index[3] = idx(a1, b0 + 1);
  s.weight[3] = fa * fb;
  s.count = 4;
  return s;
}

}  // namespace rdm::detail
