#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rdm/fft.hpp"
#include "rdm/image.hpp"
#include "rdm/polar.hpp"
#include "rdm/seidel.hpp"

namespace rdm {

// Angular spectra of the polar-resampled PSFs, indexed (source radius j,
// output radius i, angular frequency xi). The PSFs are real, so only
// xi in [0, M/2] is stored; at() reconstructs the rest by conjugate
// symmetry. For each source j only the band of output rings the PSF patch
// can reach is stored; entries outside the band are exactly zero.
class RingSpectrumStack {
 public:
  RingSpectrumStack() = default;

  int num_sources() const { return num_radii_; }
  int num_rings() const { return num_radii_; }
  int num_angles() const { return num_angles_; }
  int num_freqs() const { return num_angles_ / 2 + 1; }

  int band_begin(int j) const { return begin_[j]; }
  int band_end(int j) const { return end_[j]; }
  bool in_band(int j, int i) const { return i >= begin_[j] && i < end_[j]; }

  // Half spectrum (num_freqs entries) for (j, i); empty outside the band.
  std::span<const fft::cdouble> row(int j, int i) const;
  std::span<fft::cdouble> row(int j, int i);

  // Full-spectrum accessor, xi in [0, M).
  fft::cdouble at(int j, int i, int xi) const;

  bool all_finite() const;
  std::size_t stored_entries() const { return data_.size(); }

  // Spectra of arbitrary polar PSFs (angle-major M x K per source), used
  // for synthetic kernels such as deltas.
  static RingSpectrumStack from_polar_psfs(const std::vector<PolarImage>& psfs);

  friend bool operator==(const RingSpectrumStack& a, const RingSpectrumStack& b) {
    return a.num_radii_ == b.num_radii_ && a.num_angles_ == b.num_angles_ &&
           a.begin_ == b.begin_ && a.end_ == b.end_ && a.data_ == b.data_;
  }

 private:
  friend RingSpectrumStack precompute_ring_spectra(const PsfRadialStack&,
                                                   const PolarGrid&);
  void allocate(int num_radii, int num_angles, std::vector<int> begin,
                std::vector<int> end);

  int num_radii_ = 0;
  int num_angles_ = 0;
  std::vector<int> begin_;
  std::vector<int> end_;
  std::vector<std::size_t> offset_;
  fft::CVector data_;
};

// Polar PSF of source j sampled on `grid`: the canonical patch placed with
// its optical axis (pixel psf_side / 2) at (r_j, 0) relative to the grid
// center, bilinear, zero outside the patch.
PolarImage polar_psf(const Image& patch, double source_radius_px,
                     const PolarGrid& grid);

RingSpectrumStack precompute_ring_spectra(const PsfRadialStack& stack,
                                          const PolarGrid& grid);

// Polar-domain core of ring convolution:
//   f(rho_i, .) = IFFT{ sum_j w_j dtheta FFT{g(r_j, .)} * S(j, i, .) }
// with w_j the grid's radial quadrature weight.
PolarImage ring_convolve_polar(const PolarImage& g, const RingSpectrumStack& spectra);
// Exact transpose of ring_convolve_polar.
PolarImage ring_convolve_polar_adjoint(const PolarImage& f,
                                       const RingSpectrumStack& spectra);

// from_polar(ring_convolve_polar(polar_splat(obj))).
Image ring_convolve(const Image& obj, const RingSpectrumStack& spectra,
                    const PolarGrid& grid);

// Canonical PSFs on a uniform radial table (pixels) used by the
// superposition oracle; PSFs between nodes are linearly interpolated.
struct RadialPsfTable {
  double spacing_px = 1.0;
  double fov_pixels = 1.0;
  std::vector<Image> psfs;

  static RadialPsfTable build(const SeidelCoeffs& c, const OpticalConfig& cfg,
                              double max_radius_px, double spacing_px = 1.0);
};

struct SuperposeOptions {
  std::optional<Point> center;  // default ((N-1)/2, (N-1)/2)
  int size_guard = 256;
  bool allow_large = false;
};

// Brute-force superposition: every source pixel contributes its canonical
// PSF at radius r rotated by its field angle. O(N^4).
Image superpose_blur(const Image& obj, const SeidelCoeffs& c,
                     const OpticalConfig& cfg, const SuperposeOptions& opt = {});
Image superpose_blur(const Image& obj, const RadialPsfTable& table,
                     const SuperposeOptions& opt = {});

// Linear (zero-padded) convolution with the PSF centered at pixel
// (side / 2, side / 2), cropped to the input frame.
Image lsi_convolve(const Image& obj, const Psf& psf);
// Transpose of lsi_convolve.
Image lsi_correlate(const Image& img, const Psf& psf);

}  // namespace rdm
