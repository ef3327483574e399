#pragma once

#include <array>
#include <vector>

#include "rdm/fft.hpp"
#include "rdm/image.hpp"
#include "rdm/polar.hpp"

namespace rdm {

// The five primary Seidel coefficients, in waves.
struct SeidelCoeffs {
  double sphere = 0.0;
  double coma = 0.0;
  double astigmatism = 0.0;
  double field_curvature = 0.0;
  double distortion = 0.0;

  static constexpr int kCount = 5;

  std::array<double, kCount> as_array() const {
    return {sphere, coma, astigmatism, field_curvature, distortion};
  }
  static SeidelCoeffs from_array(const std::array<double, kCount>& a) {
    return {a[0], a[1], a[2], a[3], a[4]};
  }

  bool all_finite() const;
  // Euclidean norm of (coma, astigmatism, field_curvature, distortion).
  double off_axis_norm() const;

  friend bool operator==(const SeidelCoeffs&, const SeidelCoeffs&) = default;
};

// Pupil-to-PSF mapping. Lengths in meters. The pupil is sampled with L
// points across [-1, 1] and zero-padded to fft_size() so that one PSF pixel
// equals pixel_pitch.
struct OpticalConfig {
  double wavelength = 500e-9;
  double pupil_radius = 5e-3;
  double pupil_to_image_distance = 0.1;
  int pupil_samples = 256;
  int psf_side = 64;
  double pixel_pitch = 2.5e-6;
  double fov_radius = 64 * 2.5e-6;

  // Q = L * lambda * d / (2 R pitch), rounded.
  int fft_size() const;
  double fov_pixels() const { return fov_radius / pixel_pitch; }
  // PSF pixels per pupil sample spacing ratio Q / L.
  double oversampling() const;

  // Throws kInvalidArgument when any invariant fails.
  void validate() const;

  // Config with Q = 2L (intensity sampled at Nyquist). pupil_samples
  // defaults to 4 * psf_side.
  static OpticalConfig nyquist(int psf_side, double fov_pixels,
                               int pupil_samples = 0);

  friend bool operator==(const OpticalConfig&, const OpticalConfig&) = default;
};

struct Psf {
  Image intensity;
  double source_radius = 0.0;  // normalized, 1 = fov_radius
};

struct PsfRadialStack {
  std::vector<Psf> psfs;
  PolarGrid grid;
  double fov_pixels = 1.0;
};

// Square complex array, row index t, column index s.
struct Pupil {
  int size = 0;
  fft::CVector values;
};

// Pupil sample coordinate of index k on an L-point grid over [-1, 1]
// (cell centers).
double pupil_coord(int k, int samples);

double wavefront_at(const SeidelCoeffs& c, double s, double t, double r);

// Partial derivative of the wavefront with respect to coefficient `term`
// (0 = sphere ... 4 = distortion).
double wavefront_term(int term, double s, double t, double r);

// L x L phase in waves, row-major (t, s).
Image wavefront(const SeidelCoeffs& c, double r, int samples);

Pupil pupil(const SeidelCoeffs& c, double r, const OpticalConfig& cfg);

// |FFT(zero-padded pupil)|^2 cropped to psf_side around the optical axis
// (pixel psf_side / 2), unit sum. Throws kDegeneratePupil for a zero pupil.
Psf psf_from_pupil(const Pupil& p, const OpticalConfig& cfg);

// Canonical (theta = 0, +x field axis) PSF at normalized radius r.
Psf synth_psf(const SeidelCoeffs& c, double r, const OpticalConfig& cfg);

// One PSF per grid radius; r_j = grid.radius(j) / cfg.fov_pixels().
PsfRadialStack synth_radial_psfs(const SeidelCoeffs& c, const PolarGrid& grid,
                                 const OpticalConfig& cfg);

// Second-moment width sqrt(<(x-xbar)^2 + (y-ybar)^2>) in pixels.
double second_moment_width(const Image& psf);

}  // namespace rdm
