#include "rdm/roft.hpp"

#include <algorithm>
#include <cmath>

#include "rdm/error.hpp"
#include "rdm/parallel.hpp"

namespace rdm {

using fft::cdouble;

RoftImage::RoftImage(const PolarGrid& grid)
    : grid_(grid),
      data_(static_cast<std::size_t>(grid.num_radii()) * grid.num_angles()) {}

RoftImage roft(const PolarImage& pimg) {
  const PolarGrid& grid = pimg.grid();
  const int m = grid.num_angles();
  const int k = grid.num_radii();
  const int nf = m / 2 + 1;
  fft::RVector rings(static_cast<std::size_t>(k) * m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < k; ++j) rings[static_cast<std::size_t>(j) * m + i] = pimg(i, j);
  }
  fft::CVector half;
  fft::r2c_rows(rings, half, m, k);
  RoftImage out(grid);
  for (int j = 0; j < k; ++j) {
    const cdouble* h = half.data() + static_cast<std::size_t>(j) * nf;
    for (int xi = 0; xi < nf; ++xi) {
      // exp(+i) transform of real data is the conjugate of the exp(-i) one.
      out(j, xi) = std::conj(h[xi]);
      if (xi > 0 && xi < m - xi) out(j, m - xi) = h[xi];
    }
  }
  return out;
}

RoftImage roft(const Image& img, const PolarGrid& grid) {
  require(img.all_finite(), ErrorKind::kInvalidArgument, "image must be finite");
  return roft(to_polar(img, grid));
}

PolarImage inverse_roft_polar(const RoftImage& spec) {
  const PolarGrid& grid = spec.grid();
  const int m = grid.num_angles();
  const int k = grid.num_radii();
  const int nf = m / 2 + 1;
  // Keep the real part: average each xi with its mirror so non-symmetric
  // input is projected onto real rings.
  fft::CVector half(static_cast<std::size_t>(k) * nf);
  for (int j = 0; j < k; ++j) {
    for (int xi = 0; xi < nf; ++xi) {
      const cdouble a = spec(j, xi);
      const cdouble b = spec(j, (m - xi) % m);
      half[static_cast<std::size_t>(j) * nf + xi] = 0.5 * (std::conj(a) + b);
    }
  }
  fft::RVector rings;
  fft::c2r_rows(half, rings, m, k);
  PolarImage out(grid);
  const double inv = 1.0 / m;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < k; ++j) out(i, j) = rings[static_cast<std::size_t>(j) * m + i] * inv;
  }
  return out;
}

Image inverse_roft(const RoftImage& spec, int n) {
  return from_polar(inverse_roft_polar(spec), n);
}

RoftImage lri_filter_spectrum(const RoftImage& obj, const RingSpectrumStack& spectra) {
  const PolarGrid& grid = obj.grid();
  const int m = grid.num_angles();
  const int k = grid.num_radii();
  require(spectra.num_rings() == k && spectra.num_angles() == m,
          ErrorKind::kInvalidArgument, "spectra shape does not match the RoFT grid");
  const int nf = spectra.num_freqs();
  RoftImage out(grid);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (!spectra.in_band(j, i)) continue;
      const auto s = spectra.row(j, i);
      const double w = grid.radial_weight(j) * grid.angular_step();
      for (int xi = 0; xi < m; ++xi) {
        // RoFT of the PSF ring: conj of the FFT value at xi.
        const cdouble h = xi < nf ? std::conj(s[xi]) : s[m - xi];
        out(i, xi) += w * obj(j, xi) * h;
      }
    }
  }
  return out;
}

namespace {

double shortest_run(const std::vector<double>& e, double fraction) {
  double total = 0.0;
  for (double v : e) total += v;
  const double target = fraction * total;
  int best = static_cast<int>(e.size());
  double acc = 0.0;
  std::size_t lo = 0;
  for (std::size_t hi = 0; hi < e.size(); ++hi) {
    acc += e[hi];
    while (lo < hi && acc - e[lo] >= target) acc -= e[lo++];
    if (acc >= target) best = std::min(best, static_cast<int>(hi - lo + 1));
  }
  return best;
}

}  // namespace

std::vector<PsfSpectralMetrics> psf_metrics(const RingSpectrumStack& spectra,
                                            const PolarGrid& grid,
                                            double energy_fraction) {
  require(energy_fraction > 0.0 && energy_fraction <= 1.0, ErrorKind::kInvalidArgument,
          "energy fraction must lie in (0, 1]");
  const int k = grid.num_radii();
  const int m = grid.num_angles();
  require(spectra.num_rings() == k && spectra.num_angles() == m,
          ErrorKind::kInvalidArgument, "spectra shape does not match the grid");
  const int nf = spectra.num_freqs();
  std::vector<PsfSpectralMetrics> out(k);
  for (int j = 0; j < k; ++j) {
    std::vector<double> ring_energy(k, 0.0);
    for (int i = spectra.band_begin(j); i < spectra.band_end(j); ++i) {
      const auto s = spectra.row(j, i);
      for (int xi = 0; xi < nf; ++xi) {
        const double mult = (xi == 0 || 2 * xi == m) ? 1.0 : 2.0;
        ring_energy[i] += mult * std::norm(s[xi]);
      }
    }
    double total = 0.0;
    for (double v : ring_energy) total += v;
    require(total > 0.0, ErrorKind::kDegeneratePatch,
            "PSF at radius index " + std::to_string(j) + " has zero energy");

    PsfSpectralMetrics& mtr = out[j];
    mtr.source_radius = grid.radius(j);
    mtr.mix_width = shortest_run(ring_energy, energy_fraction);

    // An angle-constant r = 0 source has all of its own-ring energy at xi = 0.
    double own = ring_energy[j];
    if (own > 0.0) {
      const auto s = spectra.row(j, j);
      double acc = 0.0;
      for (int xi = 0; xi < nf; ++xi) {
        const double mult = (xi == 0 || 2 * xi == m) ? 1.0 : 2.0;
        acc += mult * std::norm(s[xi]);
        if (acc >= energy_fraction * own) {
          mtr.bandwidth = xi;
          break;
        }
      }
    }
  }
  return out;
}

std::vector<PsfSpectralMetrics> psf_metrics(const PsfRadialStack& stack,
                                            const PolarGrid& grid,
                                            double energy_fraction) {
  return psf_metrics(precompute_ring_spectra(stack, grid), grid, energy_fraction);
}

}  // namespace rdm
