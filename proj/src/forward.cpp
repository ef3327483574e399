#include "rdm/forward.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rdm/error.hpp"
#include "rdm/parallel.hpp"
#include "stencil.hpp"

namespace rdm {

using fft::cdouble;

void RingSpectrumStack::allocate(int num_radii, int num_angles,
                                 std::vector<int> begin, std::vector<int> end) {
  num_radii_ = num_radii;
  num_angles_ = num_angles;
  begin_ = std::move(begin);
  end_ = std::move(end);
  offset_.assign(num_radii + 1, 0);
  const std::size_t nf = num_freqs();
  for (int j = 0; j < num_radii; ++j) {
    offset_[j + 1] = offset_[j] + static_cast<std::size_t>(end_[j] - begin_[j]) * nf;
  }
  data_.assign(offset_.back(), cdouble{});
}

std::span<const cdouble> RingSpectrumStack::row(int j, int i) const {
  if (!in_band(j, i)) return {};
  const std::size_t nf = num_freqs();
  return {data_.data() + offset_[j] + (i - begin_[j]) * nf, nf};
}

std::span<cdouble> RingSpectrumStack::row(int j, int i) {
  if (!in_band(j, i)) return {};
  const std::size_t nf = num_freqs();
  return {data_.data() + offset_[j] + (i - begin_[j]) * nf, nf};
}

cdouble RingSpectrumStack::at(int j, int i, int xi) const {
  auto r = row(j, i);
  if (r.empty()) return {};
  xi = ((xi % num_angles_) + num_angles_) % num_angles_;
  if (xi < num_freqs()) return r[xi];
  return std::conj(r[num_angles_ - xi]);
}

bool RingSpectrumStack::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](const cdouble& v) {
    return std::isfinite(v.real()) && std::isfinite(v.imag());
  });
}

namespace {

// r2c of each ring in [begin, end) of an angle-major polar array, written
// to consecutive half spectra starting at `out`.
void ring_spectra(std::span<const double> polar, int m, int k, int begin,
                  int end, cdouble* out) {
  const int nf = m / 2 + 1;
  fft::RVector ring(m);
  fft::CVector spec(nf);
  for (int i = begin; i < end; ++i) {
    for (int a = 0; a < m; ++a) ring[a] = polar[static_cast<std::size_t>(a) * k + i];
    fft::r2c_rows(ring, spec, m, 1);
    std::copy(spec.begin(), spec.end(), out + static_cast<std::size_t>(i - begin) * nf);
  }
}

}  // namespace

RingSpectrumStack RingSpectrumStack::from_polar_psfs(
    const std::vector<PolarImage>& psfs) {
  require(!psfs.empty(), ErrorKind::kInvalidArgument, "no polar PSFs");
  const PolarGrid& grid = psfs.front().grid();
  const int k = grid.num_radii();
  const int m = grid.num_angles();
  require(static_cast<int>(psfs.size()) == k, ErrorKind::kInvalidArgument,
          "need one polar PSF per grid radius");
  RingSpectrumStack out;
  out.allocate(k, m, std::vector<int>(k, 0), std::vector<int>(k, k));
  for (int j = 0; j < k; ++j) {
    require(psfs[j].grid() == grid, ErrorKind::kInvalidArgument,
            "polar PSFs must share one grid");
    ring_spectra(psfs[j].values(), m, k, 0, k, out.row(j, 0).data());
  }
  return out;
}

namespace {

double patch_reach(const Image& patch) {
  const double c = patch.cols() / 2;
  const double cy = patch.rows() / 2;
  const double rx = std::max(c, patch.cols() - 1 - c);
  const double ry = std::max(cy, patch.rows() - 1 - cy);
  return std::hypot(rx, ry);
}

void sample_polar_psf(const Image& patch, double source_radius_px,
                      const PolarGrid& grid, int begin, int end,
                      std::span<double> out) {
  const int m = grid.num_angles();
  const int k = grid.num_radii();
  const double cx = patch.cols() / 2;
  const double cy = patch.rows() / 2;
  auto values = patch.values();
  for (int a = 0; a < m; ++a) {
    const double ct = std::cos(grid.angle(a));
    const double st = std::sin(grid.angle(a));
    for (int i = begin; i < end; ++i) {
      const double rho = grid.radius(i);
      const auto s = detail::cartesian_stencil(cx + rho * ct - source_radius_px,
                                               cy + rho * st, patch.rows(),
                                               patch.cols());
      double v = 0.0;
      for (int t = 0; t < s.count; ++t) v += s.weight[t] * values[s.index[t]];
      out[static_cast<std::size_t>(a) * k + i] = v;
    }
  }
}

}  // namespace

PolarImage polar_psf(const Image& patch, double source_radius_px,
                     const PolarGrid& grid) {
  PolarImage out(grid);
  sample_polar_psf(patch, source_radius_px, grid, 0, grid.num_radii(), out.values());
  return out;
}

RingSpectrumStack precompute_ring_spectra(const PsfRadialStack& stack,
                                          const PolarGrid& grid) {
  const int k = grid.num_radii();
  const int m = grid.num_angles();
  require(k >= 2, ErrorKind::kInvalidArgument, "ring convolution needs K >= 2");
  require(static_cast<int>(stack.psfs.size()) == k, ErrorKind::kInvalidArgument,
          "PSF stack has " + std::to_string(stack.psfs.size()) +
              " entries, grid has " + std::to_string(k) + " radii");
  const double tol = 1e-6 * std::max(1.0, grid.max_radius());
  for (int j = 0; j < k; ++j) {
    const double r_px = stack.psfs[j].source_radius * stack.fov_pixels;
    require(std::abs(r_px - grid.radius(j)) <= tol, ErrorKind::kInvalidArgument,
            "PSF stack radius " + std::to_string(j) +
                " does not match the grid radius");
    require(stack.psfs[j].intensity.all_finite() && !stack.psfs[j].intensity.empty(),
            ErrorKind::kInvalidArgument, "PSF must be finite and non-empty");
  }

  const double dr = grid.radial_step();
  std::vector<int> begin(k), end(k);
  for (int j = 0; j < k; ++j) {
    const double reach = patch_reach(stack.psfs[j].intensity);
    const double rj = grid.radius(j);
    begin[j] = std::max(0, static_cast<int>(std::floor((rj - reach) / dr)) - 1);
    end[j] = std::min(k, static_cast<int>(std::ceil((rj + reach) / dr)) + 2);
  }
  RingSpectrumStack out;
  out.allocate(k, m, std::move(begin), std::move(end));

#pragma omp parallel num_threads(thread_count())
  {
    std::vector<double> polar(static_cast<std::size_t>(m) * k);
#pragma omp for schedule(dynamic)
    for (int j = 0; j < k; ++j) {
      const int b = out.band_begin(j);
      const int e = out.band_end(j);
      sample_polar_psf(stack.psfs[j].intensity, grid.radius(j), grid, b, e, polar);
      ring_spectra(polar, m, k, b, e, out.row(j, b).data());
    }
  }
  return out;
}

namespace {

void check_spectra_grid(const PolarGrid& grid, const RingSpectrumStack& spectra) {
  require(grid.num_radii() == spectra.num_rings() &&
              grid.num_angles() == spectra.num_angles(),
          ErrorKind::kInvalidArgument, "spectra shape does not match the grid");
}

// Half spectra of every ring, radius-major: K x (M/2 + 1).
fft::CVector all_ring_spectra(const PolarImage& p) {
  const int m = p.num_angles();
  const int k = p.num_radii();
  fft::RVector rows(static_cast<std::size_t>(m) * k);
  for (int a = 0; a < m; ++a) {
    for (int j = 0; j < k; ++j) rows[static_cast<std::size_t>(j) * m + a] = p(a, j);
  }
  fft::CVector spec;
  fft::r2c_rows(rows, spec, m, k);
  return spec;
}

// Inverse of all_ring_spectra including the 1/M factor.
PolarImage rings_from_spectra(fft::CVector& spec, const PolarGrid& grid) {
  const int m = grid.num_angles();
  const int k = grid.num_radii();
  fft::RVector rows;
  fft::c2r_rows(spec, rows, m, k);
  PolarImage out(grid);
  const double inv = 1.0 / m;
  for (int a = 0; a < m; ++a) {
    for (int j = 0; j < k; ++j) out(a, j) = rows[static_cast<std::size_t>(j) * m + a] * inv;
  }
  return out;
}

}  // namespace

PolarImage ring_convolve_polar(const PolarImage& g, const RingSpectrumStack& spectra) {
  const PolarGrid& grid = g.grid();
  check_spectra_grid(grid, spectra);
  const int k = grid.num_radii();
  const int nf = spectra.num_freqs();
  const fft::CVector gs = all_ring_spectra(g);
  std::vector<double> weight(k);
  for (int j = 0; j < k; ++j) weight[j] = grid.radial_weight(j) * grid.angular_step();

  fft::CVector acc(static_cast<std::size_t>(k) * nf);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
  for (int i = 0; i < k; ++i) {
    cdouble* out = acc.data() + static_cast<std::size_t>(i) * nf;
    for (int j = 0; j < k; ++j) {
      auto s = spectra.row(j, i);
      if (s.empty()) continue;
      const cdouble* gj = gs.data() + static_cast<std::size_t>(j) * nf;
      const double w = weight[j];
      for (int xi = 0; xi < nf; ++xi) out[xi] += w * gj[xi] * s[xi];
    }
  }
  return rings_from_spectra(acc, grid);
}

PolarImage ring_convolve_polar_adjoint(const PolarImage& f,
                                       const RingSpectrumStack& spectra) {
  const PolarGrid& grid = f.grid();
  check_spectra_grid(grid, spectra);
  const int k = grid.num_radii();
  const int nf = spectra.num_freqs();
  const fft::CVector fs = all_ring_spectra(f);

  fft::CVector acc(static_cast<std::size_t>(k) * nf);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
  for (int j = 0; j < k; ++j) {
    cdouble* out = acc.data() + static_cast<std::size_t>(j) * nf;
    const double w = grid.radial_weight(j) * grid.angular_step();
    for (int i = spectra.band_begin(j); i < spectra.band_end(j); ++i) {
      auto s = spectra.row(j, i);
      const cdouble* fi = fs.data() + static_cast<std::size_t>(i) * nf;
      for (int xi = 0; xi < nf; ++xi) out[xi] += w * std::conj(s[xi]) * fi[xi];
    }
  }
  return rings_from_spectra(acc, grid);
}

Image ring_convolve(const Image& obj, const RingSpectrumStack& spectra,
                    const PolarGrid& grid) {
  require(obj.is_square(), ErrorKind::kInvalidArgument,
          "ring_convolve needs a square image");
  check_spectra_grid(grid, spectra);
  return from_polar(ring_convolve_polar(polar_splat(obj, grid), spectra), obj.rows());
}

RadialPsfTable RadialPsfTable::build(const SeidelCoeffs& c, const OpticalConfig& cfg,
                                     double max_radius_px, double spacing_px) {
  cfg.validate();
  require(spacing_px > 0.0 && max_radius_px >= 0.0, ErrorKind::kInvalidArgument,
          "PSF table spacing must be positive");
  const double fov = cfg.fov_pixels();
  require(max_radius_px <= fov * (1.0 + 1e-9), ErrorKind::kInvalidArgument,
          "PSF table extends beyond the configured field of view");
  const int n = static_cast<int>(std::ceil(max_radius_px / spacing_px)) + 1;
  RadialPsfTable table;
  table.fov_pixels = fov;
  table.spacing_px = n > 1 ? max_radius_px / (n - 1) : 1.0;
  table.psfs.resize(n);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
  for (int k = 0; k < n; ++k) {
    const double r = std::min(k * table.spacing_px / fov, 1.0);
    table.psfs[k] = synth_psf(c, r, cfg).intensity;
  }
  return table;
}

Image superpose_blur(const Image& obj, const SeidelCoeffs& c,
                     const OpticalConfig& cfg, const SuperposeOptions& opt) {
  require(obj.is_square(), ErrorKind::kInvalidArgument,
          "superpose_blur needs a square image");
  const int n = obj.rows();
  require(n <= opt.size_guard || opt.allow_large, ErrorKind::kIntractable,
          "superpose_blur on " + std::to_string(n) + "x" + std::to_string(n) +
              " exceeds the size guard " + std::to_string(opt.size_guard) +
              " (O(N^4) cost); pass allow_large to override");
  const Point center = opt.center.value_or(Point{(n - 1) / 2.0, (n - 1) / 2.0});
  double reach = 0.0;
  for (double x : {0.0, n - 1.0}) {
    for (double y : {0.0, n - 1.0}) {
      reach = std::max(reach, std::hypot(x - center.x, y - center.y));
    }
  }
  return superpose_blur(obj, RadialPsfTable::build(c, cfg, reach, 0.5), opt);
}

namespace {

struct Source {
  int x, y;
  double value;
  double cos_t, sin_t;
  int node;
  double frac;
};

}  // namespace

Image superpose_blur(const Image& obj, const RadialPsfTable& table,
                     const SuperposeOptions& opt) {
  require(obj.is_square(), ErrorKind::kInvalidArgument,
          "superpose_blur needs a square image");
  require(obj.all_finite(), ErrorKind::kInvalidArgument, "object must be finite");
  require(!table.psfs.empty(), ErrorKind::kInvalidArgument, "empty PSF table");
  const int n = obj.rows();
  require(n <= opt.size_guard || opt.allow_large, ErrorKind::kIntractable,
          "superpose_blur on " + std::to_string(n) + "x" + std::to_string(n) +
              " exceeds the size guard " + std::to_string(opt.size_guard) +
              " (O(N^4) cost); pass allow_large to override");
  const Point center = opt.center.value_or(Point{(n - 1) / 2.0, (n - 1) / 2.0});
  const int nodes = static_cast<int>(table.psfs.size());

  std::vector<Source> sources;
  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < n; ++u) {
      const double g = obj(v, u);
      if (g == 0.0) continue;
      const double dx = u - center.x;
      const double dy = v - center.y;
      const double rho = std::hypot(dx, dy);
      const double theta = std::atan2(dy, dx);
      double pos = nodes > 1 ? rho / table.spacing_px : 0.0;
      pos = std::min(pos, static_cast<double>(nodes - 1));
      int node = static_cast<int>(pos);
      if (node >= nodes - 1) node = std::max(0, nodes - 2);
      const double frac = nodes > 1 ? pos - node : 0.0;
      sources.push_back({u, v, g, std::cos(theta), std::sin(theta), node, frac});
    }
  }

  const Image& first = table.psfs.front();
  const int ph = first.rows();
  const int pw = first.cols();
  const double pcx = pw / 2;
  const double pcy = ph / 2;

  // Row blocks outermost, sources next: each block streams every source's
  // PSF pair once instead of touching the whole table per pixel. Every
  // pixel still accumulates its sources in the same order.
  constexpr int kBlock = 8;
  const int blocks = (n + kBlock - 1) / kBlock;
  Image out(n, n);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
  for (int b = 0; b < blocks; ++b) {
    const int y0 = b * kBlock, y1 = std::min(n, y0 + kBlock);
    for (const Source& s : sources) {
      auto a = table.psfs[s.node].values();
      auto bnext = table.psfs[std::min(s.node + 1, nodes - 1)].values();
      for (int y = y0; y < y1; ++y) {
        const double ry = y - s.y;
        for (int x = 0; x < n; ++x) {
          const double rx = x - s.x;
          // Canonical-frame position: rotate the offset back by -theta.
          const double qx = pcx + s.cos_t * rx + s.sin_t * ry;
          const double qy = pcy - s.sin_t * rx + s.cos_t * ry;
          if (!(qx >= 0.0 && qy >= 0.0 && qx <= pw - 1 && qy <= ph - 1)) continue;
          const auto st = detail::cartesian_stencil(qx, qy, ph, pw);
          double va = 0.0;
          for (int t = 0; t < st.count; ++t) va += st.weight[t] * a[st.index[t]];
          double v = va;
          if (nodes > 1) {
            double vb = 0.0;
            for (int t = 0; t < st.count; ++t) vb += st.weight[t] * bnext[st.index[t]];
            v = (1.0 - s.frac) * va + s.frac * vb;
          }
          out(y, x) += s.value * v;
        }
      }
    }
  }
  return out;
}

namespace {

struct LsiPlan {
  int sy, sx;
};

LsiPlan lsi_plan(const Image& img, const Psf& psf) {
  return {fft::good_size(img.rows() + psf.intensity.rows() - 1),
          fft::good_size(img.cols() + psf.intensity.cols() - 1)};
}

fft::CVector kernel_spectrum(const Psf& psf, const LsiPlan& p) {
  const Image& h = psf.intensity;
  const int cy = h.rows() / 2;
  const int cx = h.cols() / 2;
  fft::RVector buf(static_cast<std::size_t>(p.sy) * p.sx, 0.0);
  for (int y = 0; y < h.rows(); ++y) {
    const int yy = ((y - cy) % p.sy + p.sy) % p.sy;
    for (int x = 0; x < h.cols(); ++x) {
      const int xx = ((x - cx) % p.sx + p.sx) % p.sx;
      buf[static_cast<std::size_t>(yy) * p.sx + xx] += h(y, x);
    }
  }
  fft::CVector spec;
  fft::r2c_2d(buf, spec, p.sy, p.sx);
  return spec;
}

Image lsi_apply(const Image& img, const Psf& psf, bool adjoint) {
  require(img.all_finite(), ErrorKind::kInvalidArgument, "image must be finite");
  require(!psf.intensity.empty() && psf.intensity.all_finite(),
          ErrorKind::kInvalidArgument, "PSF must be finite and non-empty");
  const LsiPlan p = lsi_plan(img, psf);
  const fft::CVector h = kernel_spectrum(psf, p);
  fft::RVector buf(static_cast<std::size_t>(p.sy) * p.sx, 0.0);
  for (int y = 0; y < img.rows(); ++y) {
    for (int x = 0; x < img.cols(); ++x) buf[static_cast<std::size_t>(y) * p.sx + x] = img(y, x);
  }
  fft::CVector spec;
  fft::r2c_2d(buf, spec, p.sy, p.sx);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    spec[k] *= adjoint ? std::conj(h[k]) : h[k];
  }
  fft::c2r_2d(spec, buf, p.sy, p.sx);
  const double inv = 1.0 / (static_cast<double>(p.sy) * p.sx);
  Image out(img.rows(), img.cols());
  for (int y = 0; y < img.rows(); ++y) {
    for (int x = 0; x < img.cols(); ++x) out(y, x) = buf[static_cast<std::size_t>(y) * p.sx + x] * inv;
  }
  return out;
}

}  // namespace

Image lsi_convolve(const Image& obj, const Psf& psf) { return lsi_apply(obj, psf, false); }

Image lsi_correlate(const Image& img, const Psf& psf) { return lsi_apply(img, psf, true); }

}  // namespace rdm
