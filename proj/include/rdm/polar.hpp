#pragma once

#include <span>
#include <vector>

#include "rdm/image.hpp"

namespace rdm {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

enum class Coverage { kCorners, kInscribed };

// Uniform (angle x radius) sampling about `center`. Radii r_j = j * dr for
// j in [0, K), with r_{K-1} = max_radius; angles theta_i = i * 2pi / M.
class PolarGrid {
 public:
  PolarGrid(int num_angles, int num_radii, double max_radius, Point center);

  // Default sizing for an n x n image centered at ((n-1)/2, (n-1)/2):
  // K = ceil(n * sqrt(2) / 2) radii out to the half-diagonal (or (n-1)/2
  // for kInscribed), M = smallest power of two >= 4K. `oversample` refines
  // both axes: K -> (K - 1) * os + 1, M -> M * os.
  static PolarGrid for_image(int n, Coverage coverage = Coverage::kCorners,
                             int oversample = 1);
  static PolarGrid for_image(int n, Point center,
                             Coverage coverage = Coverage::kCorners,
                             int oversample = 1);

  int num_angles() const { return num_angles_; }
  int num_radii() const { return num_radii_; }
  double max_radius() const { return max_radius_; }
  Point center() const { return center_; }

  double radial_step() const;
  double angular_step() const;
  double radius(int j) const { return j * radial_step(); }
  double angle(int i) const { return i * angular_step(); }

  // Midpoint radial quadrature weight: dr * r_j, with the r = 0 ring
  // weighted by its disk area pi (dr/2)^2 / 2pi = dr^2 / 8.
  double radial_weight(int j) const;

  friend bool operator==(const PolarGrid&, const PolarGrid&) = default;

 private:
  int num_angles_;
  int num_radii_;
  double max_radius_;
  Point center_;
};

// M x K samples, angle-major: samples[i * K + j] is angle i, radius j.
class PolarImage {
 public:
  explicit PolarImage(const PolarGrid& grid);
  PolarImage(const PolarGrid& grid, std::vector<double> samples);

  const PolarGrid& grid() const { return grid_; }
  int num_angles() const { return grid_.num_angles(); }
  int num_radii() const { return grid_.num_radii(); }

  double& operator()(int angle, int radius) {
    return samples_[static_cast<std::size_t>(angle) * grid_.num_radii() +
                    radius];
  }
  double operator()(int angle, int radius) const {
    return samples_[static_cast<std::size_t>(angle) * grid_.num_radii() +
                    radius];
  }

  std::span<double> values() { return samples_; }
  std::span<const double> values() const { return samples_; }

  friend bool operator==(const PolarImage&, const PolarImage&) = default;

 private:
  PolarGrid grid_;
  std::vector<double> samples_;
};

double dot(const PolarImage& a, const PolarImage& b);

// Bilinear resampling onto the polar grid; samples outside the image
// footprint are zero. Throws kInvalidGrid when the center is outside.
PolarImage to_polar(const Image& img, const PolarGrid& grid);

// Gather: bilinear interpolation of the polar samples (periodic in angle)
// at each pixel's (rho, phi); pixels beyond max_radius are zero.
Image from_polar(const PolarImage& pimg, int n);

// Mass-conserving resampling: each pixel's value is split over the four
// surrounding polar nodes with the from_polar weights and divided by the
// node quadrature area, so sum(node area * sample) equals the image sum
// inside max_radius. Treats pixels as point sources.
PolarImage polar_splat(const Image& img, const PolarGrid& grid);
// Transpose of polar_splat.
Image polar_splat_adjoint(const PolarImage& pimg, int n);

// Quadrature area of node (angle i, radius j): radial_weight(j) * dtheta.
double node_area(const PolarGrid& grid, int j);

// Exact transposes of the two resamplers above.
Image to_polar_adjoint(const PolarImage& pimg, int rows, int cols);
PolarImage from_polar_adjoint(const Image& img, const PolarGrid& grid);

// Circular shift along the angle axis: out(i, j) = in(i - k mod M, j).
PolarImage shift_angles(const PolarImage& pimg, int k);

}  // namespace rdm
