#include "rdm/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "rdm/fft.hpp"
#include "rdm/parallel.hpp"
#include "stencil.hpp"

namespace rdm {

using fft::cdouble;

void DetectionConfig::validate() const {
  require(threshold > 0.0 && threshold < 1.0, ErrorKind::kInvalidArgument,
          "detection threshold must lie in (0, 1)");
  require(min_separation >= 0.0, ErrorKind::kInvalidArgument,
          "min_separation must be nonnegative");
  require(patch_size > 0 && patch_size % 2 == 1, ErrorKind::kInvalidArgument,
          "patch_size must be a positive odd integer");
  require(centroid_radius >= 0 && smoothing_sigma >= 0.0 && fov_pixels >= 0.0,
          ErrorKind::kInvalidArgument, "detection parameters must be nonnegative");
}

void FitSettings::validate() const {
  require(iterations > 0 && restarts > 0, ErrorKind::kInvalidArgument,
          "fit needs positive iterations and restarts");
  require(step > 0.0 && final_step_fraction > 0.0 && final_step_fraction <= 1.0,
          ErrorKind::kInvalidArgument, "fit step settings out of range");
  require(init_low <= init_high, ErrorKind::kInvalidArgument,
          "fit initialization range is empty");
  require(smoothing_sigma >= 0.0 && smoothing_fraction > 0.0 && smoothing_fraction < 1.0,
          ErrorKind::kInvalidArgument, "fit smoothing settings out of range");
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  return m;
}

Image gaussian_smooth(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[i + radius];
  }
  for (double& v : k) v /= total;
  const int rows = img.rows();
  const int cols = img.cols();
  Image tmp(rows, cols), out(rows, cols);
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * img(y, std::clamp(x + i, 0, cols - 1));
      }
      tmp(y, x) = acc;
    }
  }
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * tmp(std::clamp(y + i, 0, rows - 1), x);
      }
      out(y, x) = acc;
    }
  }
  return out;
}

}  // namespace

Image normalize_patch(const Image& patch, double threshold_sigmas) {
  require(patch.all_finite() && !patch.empty(), ErrorKind::kInvalidArgument,
          "patch must be finite and non-empty");
  require(threshold_sigmas >= 0.0, ErrorKind::kInvalidArgument,
          "patch threshold must be nonnegative");
  const double bg = median(patch.storage());
  // Noise scale from the half below the background, which the (positive)
  // signal does not reach.
  std::vector<double> below;
  for (double v : patch.values()) {
    if (v < bg) below.push_back(bg - v);
  }
  const double cut = threshold_sigmas * 1.4826 * median(std::move(below));
  Image out = patch;
  double total = 0.0;
  for (double& v : out.values()) {
    v -= bg;
    if (v <= cut) v = 0.0;
    total += v;
  }
  require(total > 0.0, ErrorKind::kDegeneratePatch,
          "patch is empty after background subtraction");
  out *= 1.0 / total;
  return out;
}

SourcePatch extract_patch(const Image& calib, Point source, Point axis,
                          double fov_pixels, int patch_size, double background) {
  require(patch_size > 0 && patch_size % 2 == 1, ErrorKind::kInvalidArgument,
          "patch_size must be a positive odd integer");
  require(fov_pixels > 0.0, ErrorKind::kInvalidArgument, "fov_pixels must be positive");
  const int h = patch_size / 2;
  const int ix = static_cast<int>(std::lround(source.x));
  const int iy = static_cast<int>(std::lround(source.y));
  SourcePatch sp;
  sp.signal = Image(patch_size, patch_size);
  for (int y = 0; y < patch_size; ++y) {
    const int yy = iy + y - h;
    if (yy < 0 || yy >= calib.rows()) continue;
    for (int x = 0; x < patch_size; ++x) {
      const int xx = ix + x - h;
      if (xx < 0 || xx >= calib.cols()) continue;
      sp.signal(y, x) = calib(yy, xx) - background;
    }
  }
  sp.patch = normalize_patch(sp.signal);
  sp.center = source;
  const double dx = source.x - axis.x;
  const double dy = source.y - axis.y;
  sp.field_radius = std::hypot(dx, dy) / fov_pixels;
  sp.field_angle = std::atan2(dy, dx);
  return sp;
}

Detection detect_sources(const Image& calib, const DetectionConfig& cfg) {
  cfg.validate();
  require(calib.all_finite() && !calib.empty(), ErrorKind::kInvalidArgument,
          "calibration image must be finite and non-empty");
  const int rows = calib.rows();
  const int cols = calib.cols();
  const Point axis = cfg.center.value_or(Point{(cols - 1) / 2.0, (rows - 1) / 2.0});
  double fov = cfg.fov_pixels;
  if (fov == 0.0) {
    for (double x : {0.0, cols - 1.0}) {
      for (double y : {0.0, rows - 1.0}) {
        fov = std::max(fov, std::hypot(x - axis.x, y - axis.y));
      }
    }
    if (fov == 0.0) fov = 1.0;
  }

  const double bg = median(calib.storage());
  const Image smooth = gaussian_smooth(calib, cfg.smoothing_sigma);
  const double peak = smooth.max();
  require(peak > bg, ErrorKind::kEmptyCalibration,
          "no point sources found: the calibration image is flat");
  const double level = bg + cfg.threshold * (peak - bg);

  struct Candidate {
    int x, y;
    double value;
  };
  std::vector<Candidate> cands;
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      const double v = smooth(y, x);
      if (v <= level) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int yy = y + dy;
          const int xx = x + dx;
          if (yy < 0 || yy >= rows || xx < 0 || xx >= cols) continue;
          const double w = smooth(yy, xx);
          // Plateaus keep only their first pixel in raster order.
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (w > v || (earlier && w == v)) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) cands.push_back({x, y, v});
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.value > b.value; });

  Detection out;
  std::vector<Point> accepted;
  for (const Candidate& c : cands) {
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (int dy = -cfg.centroid_radius; dy <= cfg.centroid_radius; ++dy) {
      for (int dx = -cfg.centroid_radius; dx <= cfg.centroid_radius; ++dx) {
        const int yy = c.y + dy;
        const int xx = c.x + dx;
        if (yy < 0 || yy >= rows || xx < 0 || xx >= cols) continue;
        const double w = std::max(calib(yy, xx) - bg, 0.0);
        sw += w;
        sx += w * xx;
        sy += w * yy;
      }
    }
    const Point p = sw > 0.0 ? Point{sx / sw, sy / sw}
                             : Point{static_cast<double>(c.x), static_cast<double>(c.y)};
    bool overlaps = false;
    for (const Point& q : accepted) {
      if (std::hypot(p.x - q.x, p.y - q.y) < cfg.min_separation) {
        overlaps = true;
        break;
      }
    }
    if (overlaps) {
      ++out.dropped_overlaps;
      continue;
    }
    if (std::hypot(p.x - axis.x, p.y - axis.y) > fov * (1.0 + 1e-12)) {
      ++out.dropped_outside_field;
      continue;
    }
    accepted.push_back(p);
    out.patches.push_back(extract_patch(calib, p, axis, fov, cfg.patch_size, bg));
  }
  require(!out.patches.empty(), ErrorKind::kEmptyCalibration,
          "no point sources found above the detection threshold");
  return out;
}

namespace {

// Geometry mapping a canonical PSF into one patch: the PSF optical axis
// lands on the patch's sub-pixel source position, rotated by the field
// angle.
struct PatchTransform {
  std::vector<detail::Stencil> stencils;  // one per patch pixel
};

PatchTransform patch_transform(const SourcePatch& sp, int psf_side) {
  const int rows = sp.signal.rows();
  const int cols = sp.signal.cols();
  const double ox = cols / 2 + (sp.center.x - std::lround(sp.center.x));
  const double oy = rows / 2 + (sp.center.y - std::lround(sp.center.y));
  const double c = std::cos(sp.field_angle);
  const double s = std::sin(sp.field_angle);
  const double pc = psf_side / 2;
  PatchTransform t;
  t.stencils.resize(static_cast<std::size_t>(rows) * cols);
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      const double rx = x - ox;
      const double ry = y - oy;
      t.stencils[static_cast<std::size_t>(y) * cols + x] =
          detail::cartesian_stencil(pc + c * rx + s * ry, pc - s * rx + c * ry, psf_side,
                                    psf_side);
    }
  }
  return t;
}

// Padded pupil field transform; same layout as psf_from_pupil.
struct Field {
  int q = 0;
  int off = 0;
  fft::CVector pupil;  // q x q, zero padded
  fft::CVector e;      // forward transform
};

Field propagate(const SeidelCoeffs& c, double r, const OpticalConfig& cfg) {
  const Pupil p = pupil(c, r, cfg);
  Field f;
  f.q = cfg.fft_size();
  f.off = (f.q - p.size) / 2;
  f.pupil.assign(static_cast<std::size_t>(f.q) * f.q, cdouble{});
  for (int kt = 0; kt < p.size; ++kt) {
    for (int ks = 0; ks < p.size; ++ks) {
      f.pupil[static_cast<std::size_t>(kt + f.off) * f.q + ks + f.off] =
          p.values[static_cast<std::size_t>(kt) * p.size + ks];
    }
  }
  f.e = f.pupil;
  fft::forward_2d(f.e, f.q, f.q);
  return f;
}

std::size_t crop_index(const Field& f, int side, int y, int x) {
  const int c = side / 2;
  const int fy = ((y - c) % f.q + f.q) % f.q;
  const int fx = ((x - c) % f.q + f.q) % f.q;
  return static_cast<std::size_t>(fy) * f.q + fx;
}

// Separable Gaussian blur with zero padding; the matrix is symmetric, so it
// is its own transpose in the gradient.
void blur_zero(std::vector<double>& v, int rows, int cols, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[i + radius];
  }
  for (double& w : k) w /= total;
  std::vector<double> tmp(v.size(), 0.0);
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (int i = std::max(-radius, -x); i <= std::min(radius, cols - 1 - x); ++i) {
        acc += k[i + radius] * v[static_cast<std::size_t>(y) * cols + x + i];
      }
      tmp[static_cast<std::size_t>(y) * cols + x] = acc;
    }
  }
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (int i = std::max(-radius, -y); i <= std::min(radius, rows - 1 - y); ++i) {
        acc += k[i + radius] * tmp[static_cast<std::size_t>(y + i) * cols + x];
      }
      v[static_cast<std::size_t>(y) * cols + x] = acc;
    }
  }
}

double cosine_loss(const std::vector<double>& d, const std::vector<double>& m,
                   double* dm_out = nullptr, double* dd_out = nullptr,
                   double* mm_out = nullptr) {
  double dm = 0.0, mm = 0.0, dd = 0.0;
  for (std::size_t q = 0; q < d.size(); ++q) {
    dm += d[q] * m[q];
    mm += m[q] * m[q];
    dd += d[q] * d[q];
  }
  if (dm_out) *dm_out = dm;
  if (dd_out) *dd_out = dd;
  if (mm_out) *mm_out = mm;
  return mm == 0.0 || dd == 0.0 ? 1.0 : 1.0 - dm * dm / (dd * mm);
}

// Returns the plain loss. With sigma > 0 the gradient is that of the loss
// between Gaussian-blurred signal and model, used to widen the basin early
// in the fit.
double patch_loss(const SourcePatch& sp, const SeidelCoeffs& c, const OpticalConfig& cfg,
                  std::array<double, SeidelCoeffs::kCount>* grad, double sigma = 0.0) {
  const int side = cfg.psf_side;
  const double r = std::min(sp.field_radius, 1.0);
  const Field f = propagate(c, r, cfg);
  Image intensity(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) intensity(y, x) = std::norm(f.e[crop_index(f, side, y, x)]);
  }
  const PatchTransform t = patch_transform(sp, side);
  const auto iv = intensity.values();
  const std::vector<double>& data = sp.signal.storage();
  std::vector<double> model(data.size(), 0.0);
  for (std::size_t q = 0; q < model.size(); ++q) {
    const auto& st = t.stencils[q];
    double v = 0.0;
    for (int k = 0; k < st.count; ++k) v += st.weight[k] * iv[st.index[k]];
    model[q] = v;
  }
  double dm = 0.0, dd = 0.0, mm = 0.0;
  const double loss = cosine_loss(data, model, &dm, &dd, &mm);
  require(dd > 0.0, ErrorKind::kDegeneratePatch, "patch signal is all zero");
  if (!grad) return loss;
  if (mm == 0.0) {
    grad->fill(0.0);
    return loss;
  }

  const int rows = sp.signal.rows();
  const int cols = sp.signal.cols();
  std::vector<double> bd = data, bm = model;
  if (sigma > 0.0) {
    blur_zero(bd, rows, cols, sigma);
    blur_zero(bm, rows, cols, sigma);
    cosine_loss(bd, bm, &dm, &dd, &mm);
    if (mm == 0.0 || dd == 0.0) {
      grad->fill(0.0);
      return loss;
    }
  }
  // Back through the cosine loss, the blur, the resampling and |E|^2.
  const double a = -2.0 * dm / (dd * mm);
  const double b = 2.0 * dm * dm / (dd * mm * mm);
  std::vector<double> gm(model.size());
  for (std::size_t q = 0; q < gm.size(); ++q) gm[q] = a * bd[q] + b * bm[q];
  blur_zero(gm, rows, cols, sigma);
  Image g_int(side, side);
  auto gv = g_int.values();
  for (std::size_t q = 0; q < gm.size(); ++q) {
    const auto& st = t.stencils[q];
    for (int k = 0; k < st.count; ++k) gv[st.index[k]] += st.weight[k] * gm[q];
  }
  fft::CVector back(static_cast<std::size_t>(f.q) * f.q);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const std::size_t idx = crop_index(f, side, y, x);
      back[idx] += g_int(y, x) * f.e[idx];
    }
  }
  fft::backward_2d(back, f.q, f.q);

  grad->fill(0.0);
  const int l = cfg.pupil_samples;
  for (int kt = 0; kt < l; ++kt) {
    const double tt = pupil_coord(kt, l);
    for (int ks = 0; ks < l; ++ks) {
      const double ss = pupil_coord(ks, l);
      if (ss * ss + tt * tt > 1.0) continue;
      const std::size_t idx = static_cast<std::size_t>(kt + f.off) * f.q + ks + f.off;
      const double dw = -4.0 * std::numbers::pi * (f.pupil[idx] * std::conj(back[idx])).imag();
      for (int term = 0; term < SeidelCoeffs::kCount; ++term) {
        (*grad)[term] += dw * wavefront_term(term, ss, tt, r);
      }
    }
  }
  return loss;
}

double smoothed_fit_loss(const std::vector<SourcePatch>& patches, const SeidelCoeffs& c,
                         const OpticalConfig& cfg, double sigma,
                         std::array<double, SeidelCoeffs::kCount>* grad,
                         std::vector<double>* per_patch = nullptr) {
  if (grad) grad->fill(0.0);
  if (per_patch) per_patch->assign(patches.size(), 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < patches.size(); ++j) {
    std::array<double, SeidelCoeffs::kCount> g{};
    const double lj = patch_loss(patches[j], c, cfg, grad ? &g : nullptr, sigma);
    total += lj;
    if (per_patch) (*per_patch)[j] = lj;
    if (grad) {
      for (int k = 0; k < SeidelCoeffs::kCount; ++k) (*grad)[k] += g[k];
    }
  }
  return total;
}

}  // namespace

double fit_loss(const std::vector<SourcePatch>& patches, const SeidelCoeffs& c,
                const OpticalConfig& cfg, std::array<double, SeidelCoeffs::kCount>* grad,
                std::vector<double>* per_patch) {
  cfg.validate();
  return smoothed_fit_loss(patches, c, cfg, 0.0, grad, per_patch);
}

Image render_patch_model(const SourcePatch& patch, const SeidelCoeffs& c,
                         const OpticalConfig& cfg) {
  const Psf psf = synth_psf(c, std::min(patch.field_radius, 1.0), cfg);
  const PatchTransform t = patch_transform(patch, cfg.psf_side);
  Image out(patch.signal.rows(), patch.signal.cols());
  const auto iv = psf.intensity.values();
  auto ov = out.values();
  for (std::size_t q = 0; q < ov.size(); ++q) {
    const auto& st = t.stencils[q];
    for (int k = 0; k < st.count; ++k) ov[q] += st.weight[k] * iv[st.index[k]];
  }
  return out;
}

SeidelCoeffs canonical_twin(const SeidelCoeffs& c) {
  if (c.sphere + c.astigmatism + c.field_curvature >= 0.0) return c;
  return {-c.sphere, c.coma, -c.astigmatism, -c.field_curvature, c.distortion};
}

FitReport fit_seidel(const std::vector<SourcePatch>& patches, const OpticalConfig& cfg,
                     const FitSettings& opt) {
  cfg.validate();
  opt.validate();
  require(!patches.empty(), ErrorKind::kEmptyCalibration, "no patches to fit");
  for (const auto& sp : patches) {
    require(!sp.signal.empty() && sp.signal.all_finite(), ErrorKind::kInvalidArgument,
            "patch signal must be finite and non-empty");
    require(sp.field_radius >= 0.0 && sp.field_radius <= 1.0 + 1e-9,
            ErrorKind::kInvalidArgument, "patch field radius must lie in [0, 1]");
  }

  // Off-axis terms all carry a factor of r; sources within a pixel of the
  // axis leave them unconstrained.
  bool off_axis = false;
  for (const auto& sp : patches) off_axis |= sp.field_radius * cfg.fov_pixels() >= 1.0;
  std::array<bool, SeidelCoeffs::kCount> free{true, off_axis, off_axis, off_axis, off_axis};

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> init(opt.init_low, opt.init_high);
  std::vector<std::array<double, SeidelCoeffs::kCount>> starts(opt.restarts);
  for (auto& st : starts) {
    for (int k = 0; k < SeidelCoeffs::kCount; ++k) {
      const double v = init(rng);
      st[k] = free[k] ? v : 0.0;
    }
  }

  struct Run {
    std::array<double, SeidelCoeffs::kCount> best{};
    double best_loss = 0.0;
    std::vector<double> trace;
    bool converged = false;
    bool finite = true;
  };
  std::vector<Run> runs(opt.restarts);

#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
  for (int rs = 0; rs < opt.restarts; ++rs) {
    Run& run = runs[rs];
    auto w = starts[rs];
    std::array<double, SeidelCoeffs::kCount> m1{}, m2{};
    // Short second-moment memory: near a minimum the loss is quartic in the
    // even terms, so gradients shrink by orders of magnitude and a long
    // memory of early gradients would stall the steps.
    constexpr double kBeta1 = 0.9, kBeta2 = 0.9, kEps = 1e-12;
    int t0 = -1;  // moments restart once the blur reaches zero
    run.best_loss = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opt.iterations; ++it) {
      const double sigma =
          opt.smoothing_sigma * std::max(0.0, 1.0 - it / (opt.smoothing_fraction * opt.iterations));
      std::array<double, SeidelCoeffs::kCount> g{};
      const double loss =
          smoothed_fit_loss(patches, SeidelCoeffs::from_array(w), cfg, sigma, &g);
      if (!std::isfinite(loss)) {
        run.finite = false;
        break;
      }
      run.trace.push_back(loss);
      if (loss < run.best_loss) {
        run.best_loss = loss;
        run.best = w;
      }
      if (it > 0 && sigma == 0.0) {
        const double prev = run.trace[run.trace.size() - 2];
        if (std::abs(prev - loss) <= opt.stop_tol * std::max(prev, 1e-300)) {
          run.converged = true;
          break;
        }
      }
      const double lr =
          opt.step * (opt.iterations > 1
                          ? std::pow(opt.final_step_fraction, it / (opt.iterations - 1.0))
                          : 1.0);
      if (sigma == 0.0 && t0 < 0) {
        t0 = it;
        m1 = {};
        m2 = {};
      }
      const double age = it - std::max(t0, 0) + 1.0;
      const double c1 = 1.0 - std::pow(kBeta1, age);
      const double c2 = 1.0 - std::pow(kBeta2, age);
      for (int k = 0; k < SeidelCoeffs::kCount; ++k) {
        if (!free[k]) continue;
        m1[k] = kBeta1 * m1[k] + (1.0 - kBeta1) * g[k];
        m2[k] = kBeta2 * m2[k] + (1.0 - kBeta2) * g[k] * g[k];
        w[k] -= lr * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + kEps);
      }
    }
  }

  FitReport report;
  report.constrained = free;
  for (int rs = 0; rs < opt.restarts; ++rs) {
    report.restart_losses.push_back(runs[rs].best_loss);
    if (!runs[rs].finite) {
      report.per_iteration_loss = runs[rs].trace;
      report.restart = rs;
      throw NonConvergenceError(
          "Seidel fit loss became non-finite in restart " + std::to_string(rs), report);
    }
    if (runs[rs].best_loss < runs[report.restart].best_loss) report.restart = rs;
  }
  const Run& win = runs[report.restart];
  report.coeffs = canonical_twin(SeidelCoeffs::from_array(win.best));
  report.per_iteration_loss = win.trace;
  report.converged = win.converged;
  fit_loss(patches, report.coeffs, cfg, nullptr, &report.per_patch_residual);
  return report;
}

}  // namespace rdm
