#include "rdm/seidel.hpp"

#include <omp.h>

#include <cmath>
#include <numbers>

#include "rdm/error.hpp"
#include "rdm/parallel.hpp"

namespace rdm {

bool SeidelCoeffs::all_finite() const {
  for (double v : as_array()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double SeidelCoeffs::off_axis_norm() const {
  return std::sqrt(coma * coma + astigmatism * astigmatism +
                   field_curvature * field_curvature + distortion * distortion);
}

int OpticalConfig::fft_size() const {
  return static_cast<int>(std::lround(oversampling() * pupil_samples));
}

double OpticalConfig::oversampling() const {
  return wavelength * pupil_to_image_distance / (2.0 * pupil_radius * pixel_pitch);
}

void OpticalConfig::validate() const {
  require(wavelength > 0 && pupil_radius > 0 && pupil_to_image_distance > 0 &&
              pixel_pitch > 0 && fov_radius > 0,
          ErrorKind::kInvalidArgument,
          "optical config: physical quantities must be positive");
  require(psf_side > 0, ErrorKind::kInvalidArgument,
          "optical config: psf_side must be positive");
  require(pupil_samples > 0 && pupil_samples % 2 == 0,
          ErrorKind::kInvalidArgument,
          "optical config: pupil_samples must be positive and even");
  require(pupil_samples >= psf_side, ErrorKind::kInvalidArgument,
          "optical config: pupil_samples must be >= psf_side");
  const int q = fft_size();
  require(q >= pupil_samples && q >= psf_side, ErrorKind::kInvalidArgument,
          "optical config: pixel pitch too coarse, padded FFT size " +
              std::to_string(q) + " smaller than the pupil grid");
}

OpticalConfig OpticalConfig::nyquist(int psf_side, double fov_pixels,
                                     int pupil_samples) {
  OpticalConfig cfg;
  cfg.psf_side = psf_side;
  cfg.pupil_samples = pupil_samples > 0 ? pupil_samples : 4 * psf_side;
  cfg.pixel_pitch = cfg.wavelength * cfg.pupil_to_image_distance /
                    (4.0 * cfg.pupil_radius);
  cfg.fov_radius = fov_pixels * cfg.pixel_pitch;
  return cfg;
}

double pupil_coord(int k, int samples) {
  return -1.0 + (2.0 * k + 1.0) / samples;
}

double wavefront_at(const SeidelCoeffs& c, double s, double t, double r) {
  const double rho2 = s * s + t * t;
  return c.sphere * rho2 * rho2 + c.coma * rho2 * s * r +
         c.astigmatism * s * s * r * r + c.field_curvature * rho2 * r * r +
         c.distortion * s * r * r * r;
}

double wavefront_term(int term, double s, double t, double r) {
  const double rho2 = s * s + t * t;
  switch (term) {
    case 0: return rho2 * rho2;
    case 1: return rho2 * s * r;
    case 2: return s * s * r * r;
    case 3: return rho2 * r * r;
    case 4: return s * r * r * r;
  }
  fail(ErrorKind::kInvalidArgument, "wavefront term index out of range");
}

Image wavefront(const SeidelCoeffs& c, double r, int samples) {
  require(c.all_finite() && std::isfinite(r), ErrorKind::kInvalidArgument,
          "wavefront: coefficients and radius must be finite");
  require(r >= 0.0 && r <= 1.0 + 1e-9, ErrorKind::kInvalidArgument,
          "wavefront: normalized radius must lie in [0, 1]");
  Image w(samples, samples);
  for (int kt = 0; kt < samples; ++kt) {
    const double t = pupil_coord(kt, samples);
    for (int ks = 0; ks < samples; ++ks) {
      w(kt, ks) = wavefront_at(c, pupil_coord(ks, samples), t, r);
    }
  }
  return w;
}

Pupil pupil(const SeidelCoeffs& c, double r, const OpticalConfig& cfg) {
  const int l = cfg.pupil_samples;
  const Image w = wavefront(c, r, l);
  Pupil p{l, fft::CVector(static_cast<std::size_t>(l) * l)};
  for (int kt = 0; kt < l; ++kt) {
    const double t = pupil_coord(kt, l);
    for (int ks = 0; ks < l; ++ks) {
      const double s = pupil_coord(ks, l);
      if (s * s + t * t <= 1.0) {
        const double phase = 2.0 * std::numbers::pi * w(kt, ks);
        p.values[static_cast<std::size_t>(kt) * l + ks] = std::polar(1.0, phase);
      }
    }
  }
  return p;
}

Psf psf_from_pupil(const Pupil& p, const OpticalConfig& cfg) {
  cfg.validate();
  const int l = p.size;
  require(l == cfg.pupil_samples &&
              p.values.size() == static_cast<std::size_t>(l) * l,
          ErrorKind::kInvalidArgument, "pupil size does not match config");
  double energy = 0.0;
  for (const auto& v : p.values) {
    require(std::isfinite(v.real()) && std::isfinite(v.imag()),
            ErrorKind::kInvalidArgument, "pupil must be finite");
    energy += std::norm(v);
  }
  require(energy > 0.0, ErrorKind::kDegeneratePupil, "pupil is all zero");

  const int q = cfg.fft_size();
  const int off = (q - l) / 2;
  fft::CVector field(static_cast<std::size_t>(q) * q);
  for (int kt = 0; kt < l; ++kt) {
    for (int ks = 0; ks < l; ++ks) {
      field[static_cast<std::size_t>(kt + off) * q + ks + off] =
          p.values[static_cast<std::size_t>(kt) * l + ks];
    }
  }
  fft::forward_2d(field, q, q);

  const int side = cfg.psf_side;
  const int c = side / 2;
  Psf psf{Image(side, side), 0.0};
  double total = 0.0;
  for (int y = 0; y < side; ++y) {
    const int fy = ((y - c) % q + q) % q;
    for (int x = 0; x < side; ++x) {
      const int fx = ((x - c) % q + q) % q;
      const double v = std::norm(field[static_cast<std::size_t>(fy) * q + fx]);
      psf.intensity(y, x) = v;
      total += v;
    }
  }
  require(total > 0.0, ErrorKind::kDegeneratePupil,
          "PSF crop carries no energy");
  psf.intensity *= 1.0 / total;
  return psf;
}

Psf synth_psf(const SeidelCoeffs& c, double r, const OpticalConfig& cfg) {
  Psf psf = psf_from_pupil(pupil(c, r, cfg), cfg);
  psf.source_radius = r;
  return psf;
}

PsfRadialStack synth_radial_psfs(const SeidelCoeffs& c, const PolarGrid& grid,
                                 const OpticalConfig& cfg) {
  cfg.validate();
  require(c.all_finite(), ErrorKind::kInvalidArgument,
          "Seidel coefficients must be finite");
  const double fov = cfg.fov_pixels();
  require(grid.max_radius() <= fov * (1.0 + 1e-9), ErrorKind::kInvalidArgument,
          "grid extends beyond the configured field of view");
  const int k = grid.num_radii();
  PsfRadialStack stack{std::vector<Psf>(k), grid, fov};
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
  for (int j = 0; j < k; ++j) {
    stack.psfs[j] = synth_psf(c, std::min(grid.radius(j) / fov, 1.0), cfg);
  }
  return stack;
}

double second_moment_width(const Image& psf) {
  double total = 0.0, mx = 0.0, my = 0.0;
  for (int y = 0; y < psf.rows(); ++y) {
    for (int x = 0; x < psf.cols(); ++x) {
      total += psf(y, x);
      mx += x * psf(y, x);
      my += y * psf(y, x);
    }
  }
  if (total <= 0.0) return 0.0;
  mx /= total;
  my /= total;
  double var = 0.0;
  for (int y = 0; y < psf.rows(); ++y) {
    for (int x = 0; x < psf.cols(); ++x) {
      var += psf(y, x) * ((x - mx) * (x - mx) + (y - my) * (y - my));
    }
  }
  return std::sqrt(var / total);
}

}  // namespace rdm
