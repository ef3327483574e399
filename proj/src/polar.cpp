#include "rdm/polar.hpp"

#include <omp.h>

#include <bit>
#include <cmath>
#include <numbers>

#include "rdm/error.hpp"
#include "rdm/parallel.hpp"
#include "stencil.hpp"

namespace rdm {

PolarGrid::PolarGrid(int num_angles, int num_radii, double max_radius,
                     Point center)
    : num_angles_(num_angles),
      num_radii_(num_radii),
      max_radius_(max_radius),
      center_(center) {
  require(num_angles >= 4, ErrorKind::kInvalidGrid, "polar grid needs M >= 4");
  require(num_radii >= 1, ErrorKind::kInvalidGrid, "polar grid needs K >= 1");
  require(std::isfinite(max_radius) && max_radius >= 0.0,
          ErrorKind::kInvalidGrid, "polar grid max_radius must be finite, >= 0");
  require(std::isfinite(center.x) && std::isfinite(center.y),
          ErrorKind::kInvalidGrid, "polar grid center must be finite");
}

PolarGrid PolarGrid::for_image(int n, Coverage coverage, int oversample) {
  return for_image(n, Point{(n - 1) / 2.0, (n - 1) / 2.0}, coverage, oversample);
}

PolarGrid PolarGrid::for_image(int n, Point center, Coverage coverage,
                               int oversample) {
  require(n >= 2, ErrorKind::kInvalidArgument, "image side must be >= 2");
  require(oversample >= 1, ErrorKind::kInvalidArgument,
          "grid oversampling must be >= 1");
  double max_radius = 0.0;
  if (coverage == Coverage::kCorners) {
    for (double cx : {0.0, n - 1.0}) {
      for (double cy : {0.0, n - 1.0}) {
        max_radius = std::max(max_radius, std::hypot(cx - center.x, cy - center.y));
      }
    }
  } else {
    max_radius = std::min({center.x, center.y, n - 1 - center.x, n - 1 - center.y});
  }
  const int k = static_cast<int>(
      std::ceil(coverage == Coverage::kCorners ? n * std::numbers::sqrt2 / 2.0
                                               : n / 2.0));
  const int m = static_cast<int>(std::bit_ceil(static_cast<unsigned>(4 * k)));
  return PolarGrid(m * oversample, (std::max(k, 2) - 1) * oversample + 1,
                   max_radius, center);
}

double PolarGrid::radial_step() const {
  return num_radii_ > 1 ? max_radius_ / (num_radii_ - 1) : 0.0;
}

double PolarGrid::angular_step() const {
  return 2.0 * std::numbers::pi / num_angles_;
}

double PolarGrid::radial_weight(int j) const {
  const double dr = radial_step();
  return j == 0 ? dr * dr / 8.0 : dr * radius(j);
}

PolarImage::PolarImage(const PolarGrid& grid)
    : grid_(grid),
      samples_(static_cast<std::size_t>(grid.num_angles()) * grid.num_radii(),
               0.0) {}

PolarImage::PolarImage(const PolarGrid& grid, std::vector<double> samples)
    : grid_(grid), samples_(std::move(samples)) {
  require(samples_.size() ==
              static_cast<std::size_t>(grid.num_angles()) * grid.num_radii(),
          ErrorKind::kInvalidArgument, "polar sample count must equal M*K");
  for (double v : samples_) {
    require(std::isfinite(v), ErrorKind::kInvalidArgument,
            "polar samples must be finite");
  }
}

double dot(const PolarImage& a, const PolarImage& b) {
  require(a.grid() == b.grid(), ErrorKind::kInvalidArgument, "grid mismatch");
  double s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < av.size(); ++k) s += av[k] * bv[k];
  return s;
}

namespace {

void check_center(const PolarGrid& grid, int rows, int cols) {
  const Point c = grid.center();
  require(c.x >= 0.0 && c.y >= 0.0 && c.x <= cols - 1 && c.y <= rows - 1,
          ErrorKind::kInvalidGrid, "polar grid center lies outside the image");
}

}  // namespace

PolarImage to_polar(const Image& img, const PolarGrid& grid) {
  require(img.all_finite(), ErrorKind::kInvalidArgument, "image must be finite");
  check_center(grid, img.rows(), img.cols());
  PolarImage out(grid);
  const int m = grid.num_angles();
  const int k = grid.num_radii();
  const Point c = grid.center();
  auto values = img.values();
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (int i = 0; i < m; ++i) {
    const double ct = std::cos(grid.angle(i));
    const double st = std::sin(grid.angle(i));
    for (int j = 0; j < k; ++j) {
      const double r = grid.radius(j);
      const auto s = detail::cartesian_stencil(c.x + r * ct, c.y + r * st,
                                               img.rows(), img.cols());
      double v = 0.0;
      for (int t = 0; t < s.count; ++t) v += s.weight[t] * values[s.index[t]];
      out(i, j) = v;
    }
  }
  return out;
}

Image to_polar_adjoint(const PolarImage& pimg, int rows, int cols) {
  const PolarGrid& grid = pimg.grid();
  check_center(grid, rows, cols);
  Image out(rows, cols);
  auto values = out.values();
  const Point c = grid.center();
  for (int i = 0; i < grid.num_angles(); ++i) {
    const double ct = std::cos(grid.angle(i));
    const double st = std::sin(grid.angle(i));
    for (int j = 0; j < grid.num_radii(); ++j) {
      const double r = grid.radius(j);
      const auto s = detail::cartesian_stencil(c.x + r * ct, c.y + r * st, rows, cols);
      const double v = pimg(i, j);
      for (int t = 0; t < s.count; ++t) values[s.index[t]] += s.weight[t] * v;
    }
  }
  return out;
}

namespace {

void check_coverage(const PolarGrid& grid, int n) {
  require(n >= 1, ErrorKind::kInvalidArgument, "image side must be positive");
  require(grid.num_radii() >= 2, ErrorKind::kInvalidArgument,
          "from_polar needs at least two radii");
  const Point c = grid.center();
  require(c.x >= 0.0 && c.y >= 0.0 && c.x <= n - 1 && c.y <= n - 1,
          ErrorKind::kInvalidArgument,
          "image side inconsistent with grid: center outside the image");
}

}  // namespace

Image from_polar(const PolarImage& pimg, int n) {
  const PolarGrid& grid = pimg.grid();
  check_coverage(grid, n);
  Image out(n, n);
  auto src = pimg.values();
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const auto s = detail::polar_stencil(grid, x, y);
      double v = 0.0;
      for (int t = 0; t < s.count; ++t) v += s.weight[t] * src[s.index[t]];
      out(y, x) = v;
    }
  }
  return out;
}

PolarImage from_polar_adjoint(const Image& img, const PolarGrid& grid) {
  require(img.is_square(), ErrorKind::kInvalidArgument, "image must be square");
  const int n = img.rows();
  check_coverage(grid, n);
  PolarImage out(grid);
  auto dst = out.values();
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const auto s = detail::polar_stencil(grid, x, y);
      const double v = img(y, x);
      for (int t = 0; t < s.count; ++t) dst[s.index[t]] += s.weight[t] * v;
    }
  }
  return out;
}

double node_area(const PolarGrid& grid, int j) {
  return grid.radial_weight(j) * grid.angular_step();
}

PolarImage polar_splat(const Image& img, const PolarGrid& grid) {
  require(img.all_finite(), ErrorKind::kInvalidArgument, "image must be finite");
  PolarImage out = from_polar_adjoint(img, grid);
  const int k = grid.num_radii();
  std::vector<double> inv(k);
  for (int j = 0; j < k; ++j) inv[j] = 1.0 / node_area(grid, j);
  for (int i = 0; i < grid.num_angles(); ++i) {
    for (int j = 0; j < k; ++j) out(i, j) *= inv[j];
  }
  return out;
}

Image polar_splat_adjoint(const PolarImage& pimg, int n) {
  const PolarGrid& grid = pimg.grid();
  PolarImage scaled = pimg;
  for (int i = 0; i < grid.num_angles(); ++i) {
    for (int j = 0; j < grid.num_radii(); ++j) scaled(i, j) /= node_area(grid, j);
  }
  return from_polar(scaled, n);
}

PolarImage shift_angles(const PolarImage& pimg, int k) {
  PolarImage out(pimg.grid());
  const int m = pimg.num_angles();
  const int shift = ((k % m) + m) % m;
  for (int i = 0; i < m; ++i) {
    const int src = (i - shift + m) % m;
    for (int j = 0; j < pimg.num_radii(); ++j) out(i, j) = pimg(src, j);
  }
  return out;
}

}  // namespace rdm
