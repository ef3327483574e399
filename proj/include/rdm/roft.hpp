#pragma once

#include <vector>

#include "rdm/fft.hpp"
#include "rdm/forward.hpp"
#include "rdm/image.hpp"
#include "rdm/polar.hpp"
#include "rdm/seidel.hpp"

namespace rdm {

// Rotational Fourier transform: per radius, F(r, xi) = sum_m f(r, theta_m)
// exp(+2 pi i m xi / M). The positive exponent is the opposite of the usual
// forward FFT sign; for real inputs F(r, xi) = conj(F(r, -xi)).
class RoftImage {
 public:
  explicit RoftImage(const PolarGrid& grid);
  const PolarGrid& grid() const { return grid_; }
  int num_radii() const { return grid_.num_radii(); }
  int num_freqs() const { return grid_.num_angles(); }
  fft::cdouble& operator()(int radius, int xi) {
    return data_[static_cast<std::size_t>(radius) * grid_.num_angles() + xi];
  }
  fft::cdouble operator()(int radius, int xi) const {
    return data_[static_cast<std::size_t>(radius) * grid_.num_angles() + xi];
  }
  const fft::CVector& values() const { return data_; }
  fft::CVector& values() { return data_; }

 private:
  PolarGrid grid_;
  fft::CVector data_;
};

RoftImage roft(const PolarImage& pimg);
// roft(to_polar(img, grid)).
RoftImage roft(const Image& img, const PolarGrid& grid);
PolarImage inverse_roft_polar(const RoftImage& spec);
// from_polar(inverse_roft_polar(spec), n).
Image inverse_roft(const RoftImage& spec, int n);

// out(rho_i, xi) = sum_j w_j dtheta G(r_j, xi) H(rho_i, xi; r_j), where H is
// the RoFT of the j-th polar PSF (the conjugate of the stored FFT spectra)
// and w_j the radial quadrature weight. Commutes with ring_convolve_polar.
RoftImage lri_filter_spectrum(const RoftImage& obj, const RingSpectrumStack& spectra);

struct PsfSpectralMetrics {
  double source_radius = 0.0;  // pixels
  // Smallest |xi| bound holding 99% of the RoFT energy on ring rho = r.
  double bandwidth = 0.0;
  // Number of output rings in the shortest run holding 99% of the energy.
  double mix_width = 0.0;
};

std::vector<PsfSpectralMetrics> psf_metrics(const RingSpectrumStack& spectra,
                                            const PolarGrid& grid,
                                            double energy_fraction = 0.99);
std::vector<PsfSpectralMetrics> psf_metrics(const PsfRadialStack& stack,
                                            const PolarGrid& grid,
                                            double energy_fraction = 0.99);

}  // namespace rdm
