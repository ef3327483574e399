#include "rdm/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace rdm {

void SolverSettings::validate() const {
  require(max_iters > 0, ErrorKind::kInvalidArgument, "max_iters must be positive");
  require(step > 0.0 && std::isfinite(step), ErrorKind::kInvalidArgument,
          "solver step must be positive");
  require(tv_weight >= 0.0, ErrorKind::kInvalidArgument,
          "tv_weight must be nonnegative");
  require(stop_tol >= 0.0, ErrorKind::kInvalidArgument,
          "stop_tol must be nonnegative");
  require(final_step_fraction > 0.0 && final_step_fraction <= 1.0,
          ErrorKind::kInvalidArgument, "final_step_fraction must lie in (0, 1]");
}

const char* to_string(Method m) {
  switch (m) {
    case Method::kRing: return "ring";
    case Method::kWiener: return "wiener";
    case Method::kRichardsonLucy: return "richardson_lucy";
    case Method::kIterativeLs: return "iterative_ls";
    case Method::kSeidel: return "seidel";
    case Method::kBlind: return "blind";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  for (Method m : {Method::kRing, Method::kWiener, Method::kRichardsonLucy,
                   Method::kIterativeLs, Method::kSeidel, Method::kBlind}) {
    if (s == to_string(m)) return m;
  }
  if (s == "rl") return Method::kRichardsonLucy;
  if (s == "ls") return Method::kIterativeLs;
  fail(ErrorKind::kInvalidArgument, "unknown deblur method '" + s + "'");
}

Image ring_convolve_adjoint(const Image& img, const RingSpectrumStack& spectra,
                            const PolarGrid& grid) {
  require(img.is_square(), ErrorKind::kInvalidArgument,
          "ring_convolve_adjoint needs a square image");
  require(grid.num_radii() == spectra.num_rings() &&
              grid.num_angles() == spectra.num_angles(),
          ErrorKind::kInvalidArgument, "spectra shape does not match the grid");
  return polar_splat_adjoint(
      ring_convolve_polar_adjoint(from_polar_adjoint(img, grid), spectra), img.rows());
}

LinearOperator ring_operator(const RingSpectrumStack& spectra, const PolarGrid& grid) {
  return {[&spectra, grid](const Image& x) { return ring_convolve(x, spectra, grid); },
          [&spectra, grid](const Image& y) {
            return ring_convolve_adjoint(y, spectra, grid);
          }};
}

LinearOperator lsi_operator(const Psf& psf) {
  return {[psf](const Image& x) { return lsi_convolve(x, psf); },
          [psf](const Image& y) { return lsi_correlate(y, psf); }};
}

double total_variation(const Image& g) {
  double tv = 0.0;
  for (int y = 0; y < g.rows(); ++y) {
    for (int x = 0; x < g.cols(); ++x) {
      if (x + 1 < g.cols()) tv += std::abs(g(y, x + 1) - g(y, x));
      if (y + 1 < g.rows()) tv += std::abs(g(y + 1, x) - g(y, x));
    }
  }
  return tv;
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Image tv_subgradient(const Image& g) {
  Image out(g.rows(), g.cols());
  for (int y = 0; y < g.rows(); ++y) {
    for (int x = 0; x < g.cols(); ++x) {
      if (x + 1 < g.cols()) {
        const double s = sign(g(y, x + 1) - g(y, x));
        out(y, x + 1) += s;
        out(y, x) -= s;
      }
      if (y + 1 < g.rows()) {
        const double s = sign(g(y + 1, x) - g(y, x));
        out(y + 1, x) += s;
        out(y, x) -= s;
      }
    }
  }
  return out;
}

double objective(const LinearOperator& a, const Image& f, const Image& g,
                 double tv_weight) {
  const Image r = a.apply(g) - f;
  double loss = dot(r, r);
  if (tv_weight > 0.0) loss += tv_weight * total_variation(g);
  return loss;
}

Image objective_gradient(const LinearOperator& a, const Image& f, const Image& g,
                         double tv_weight) {
  Image grad = a.adjoint(a.apply(g) - f) * 2.0;
  if (tv_weight > 0.0) grad += tv_subgradient(g) * tv_weight;
  return grad;
}

double operator_norm_sq(const LinearOperator& a, int rows, int cols, int iterations,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Image v(rows, cols);
  for (double& x : v.values()) x = normal(rng);
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const double norm = l2_norm(v);
    if (norm == 0.0) return 0.0;
    v *= 1.0 / norm;
    Image w = a.adjoint(a.apply(v));
    lambda = dot(v, w);
    v = std::move(w);
  }
  return lambda;
}

namespace {

void project_nonneg(Image& g) {
  for (double& v : g.values()) v = std::max(v, 0.0);
}

}  // namespace

DeblurResult solve_least_squares(const LinearOperator& a, const Image& f,
                                 const SolverSettings& s, Method tag) {
  s.validate();
  require(f.all_finite(), ErrorKind::kInvalidArgument, "image must be finite");
  DeblurResult result;
  result.method = tag;

  Image g = f;
  if (s.nonneg) project_nonneg(g);

  double step = s.step;
  if (s.optimizer != Optimizer::kAdam) {
    const double lip = 2.0 * operator_norm_sq(a, f.rows(), f.cols(), 30, s.seed);
    require(lip > 0.0, ErrorKind::kUninformativeInput, "forward operator is zero");
    step = s.step / lip;
  }

  const std::size_t n = g.size();
  std::vector<double> m1(n, 0.0), m2(n, 0.0);
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  Image previous = g;  // accelerated: last x iterate
  double momentum_t = 1.0;

  Image best = g;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int it = 0; it < s.max_iters; ++it) {
    const Image residual = a.apply(g) - f;
    double loss = dot(residual, residual);
    if (s.tv_weight > 0.0) loss += s.tv_weight * total_variation(g);
    if (!std::isfinite(loss)) {
      throw DivergenceError("solver loss became non-finite at iteration " +
                                std::to_string(it),
                            result.loss_trace);
    }
    result.loss_trace.push_back(loss);
    if (loss < best_loss) {
      best_loss = loss;
      best = g;
    }
    const std::size_t k = result.loss_trace.size();
    if (k > 1) {
      const double prev = result.loss_trace[k - 2];
      if (std::abs(prev - loss) <= s.stop_tol * std::max(prev, 1e-300)) {
        result.converged = true;
        break;
      }
    }

    Image grad = a.adjoint(residual) * 2.0;
    if (s.tv_weight > 0.0) grad += tv_subgradient(g) * s.tv_weight;
    auto gv = g.values();
    auto dv = grad.values();
    switch (s.optimizer) {
      case Optimizer::kAdam: {
        const double t = it + 1.0;
        const double frac =
            s.max_iters > 1 ? std::pow(s.final_step_fraction, it / (s.max_iters - 1.0))
                            : 1.0;
        const double lr = s.step * frac;
        const double c1 = 1.0 - std::pow(kBeta1, t);
        const double c2 = 1.0 - std::pow(kBeta2, t);
        for (std::size_t q = 0; q < n; ++q) {
          m1[q] = kBeta1 * m1[q] + (1.0 - kBeta1) * dv[q];
          m2[q] = kBeta2 * m2[q] + (1.0 - kBeta2) * dv[q] * dv[q];
          gv[q] -= lr * (m1[q] / c1) / (std::sqrt(m2[q] / c2) + kEps);
        }
        if (s.nonneg) project_nonneg(g);
        break;
      }
      case Optimizer::kGradientDescent: {
        for (std::size_t q = 0; q < n; ++q) gv[q] -= step * dv[q];
        if (s.nonneg) project_nonneg(g);
        break;
      }
      case Optimizer::kAccelerated: {
        Image x = g;
        auto xv = x.values();
        for (std::size_t q = 0; q < n; ++q) xv[q] -= step * dv[q];
        if (s.nonneg) project_nonneg(x);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum_t * momentum_t));
        const double beta = (momentum_t - 1.0) / t_next;
        auto pv = previous.values();
        for (std::size_t q = 0; q < n; ++q) gv[q] = xv[q] + beta * (xv[q] - pv[q]);
        if (s.nonneg) project_nonneg(g);
        previous = std::move(x);
        momentum_t = t_next;
        break;
      }
    }
  }
  result.iterations_run = static_cast<int>(result.loss_trace.size());
  result.image = std::move(best);
  return result;
}

DeblurResult ring_deconvolve(const Image& img, const RingSpectrumStack& spectra,
                             const PolarGrid& grid, const SolverSettings& s) {
  require(img.is_square(), ErrorKind::kInvalidArgument,
          "ring_deconvolve needs a square image");
  return solve_least_squares(ring_operator(spectra, grid), img, s, Method::kRing);
}

namespace {

void check_psf(const Psf& psf) {
  require(!psf.intensity.empty() && psf.intensity.all_finite(),
          ErrorKind::kInvalidArgument, "PSF must be finite and non-empty");
  require(std::abs(psf.intensity.sum() - 1.0) < 1e-6, ErrorKind::kInvalidArgument,
          "PSF must have unit sum");
}

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

DeblurResult wiener(const Image& img, const Psf& psf, const SolverSettings& s) {
  require(s.wiener_kappa > 0.0, ErrorKind::kInvalidArgument,
          "wiener kappa must be positive");
  const Image& h = psf.intensity;
  const int pad = std::max(h.rows(), h.cols());
  const int sy = fft::good_size(img.rows() + 2 * pad);
  const int sx = fft::good_size(img.cols() + 2 * pad);
  fft::RVector buf(static_cast<std::size_t>(sy) * sx);
  for (int y = 0; y < sy; ++y) {
    const int yy = reflect(y - pad, img.rows());
    for (int x = 0; x < sx; ++x) {
      buf[static_cast<std::size_t>(y) * sx + x] = img(yy, reflect(x - pad, img.cols()));
    }
  }
  fft::RVector kbuf(static_cast<std::size_t>(sy) * sx, 0.0);
  const int cy = h.rows() / 2;
  const int cx = h.cols() / 2;
  for (int y = 0; y < h.rows(); ++y) {
    for (int x = 0; x < h.cols(); ++x) {
      const int yy = ((y - cy) % sy + sy) % sy;
      const int xx = ((x - cx) % sx + sx) % sx;
      kbuf[static_cast<std::size_t>(yy) * sx + xx] += h(y, x);
    }
  }
  fft::CVector spec, kspec;
  fft::r2c_2d(buf, spec, sy, sx);
  fft::r2c_2d(kbuf, kspec, sy, sx);
  for (std::size_t q = 0; q < spec.size(); ++q) {
    const auto hk = kspec[q];
    spec[q] *= std::conj(hk) / (std::norm(hk) + s.wiener_kappa);
  }
  fft::c2r_2d(spec, buf, sy, sx);
  const double inv = 1.0 / (static_cast<double>(sy) * sx);
  DeblurResult r;
  r.method = Method::kWiener;
  r.image = Image(img.rows(), img.cols());
  for (int y = 0; y < img.rows(); ++y) {
    for (int x = 0; x < img.cols(); ++x) {
      r.image(y, x) = buf[static_cast<std::size_t>(y + pad) * sx + x + pad] * inv;
    }
  }
  if (s.nonneg) project_nonneg(r.image);
  const Image res = lsi_convolve(r.image, psf) - img;
  r.loss_trace = {dot(res, res)};
  r.iterations_run = 1;
  r.converged = true;
  return r;
}

DeblurResult richardson_lucy(const Image& img, const Psf& psf, const SolverSettings& s) {
  Image f = img;
  project_nonneg(f);
  const double flux = f.sum();
  DeblurResult r;
  r.method = Method::kRichardsonLucy;
  r.image = Image(f.rows(), f.cols(), flux / static_cast<double>(f.size()));
  for (int it = 0; it < s.max_iters; ++it) {
    const Image blurred = lsi_convolve(r.image, psf);
    Image ratio(f.rows(), f.cols());
    double loss = 0.0;
    for (std::size_t q = 0; q < f.size(); ++q) {
      const double b = blurred.values()[q];
      const double d = f.values()[q] - b;
      loss += d * d;
      ratio.values()[q] = b > 1e-300 ? f.values()[q] / b : 0.0;
    }
    if (!std::isfinite(loss)) {
      throw DivergenceError("Richardson-Lucy loss became non-finite", r.loss_trace);
    }
    r.loss_trace.push_back(loss);
    const std::size_t k = r.loss_trace.size();
    if (k > 1 && std::abs(r.loss_trace[k - 2] - loss) <=
                     s.stop_tol * std::max(r.loss_trace[k - 2], 1e-300)) {
      r.converged = true;
      break;
    }
    const Image correction = lsi_correlate(ratio, psf);
    auto gv = r.image.values();
    auto cv = correction.values();
    for (std::size_t q = 0; q < gv.size(); ++q) gv[q] = std::max(gv[q] * cv[q], 0.0);
  }
  r.iterations_run = static_cast<int>(r.loss_trace.size());
  return r;
}

}  // namespace

DeblurResult deconvolve(const Image& img, const Psf& psf, Method method,
                        const SolverSettings& s) {
  require(img.all_finite() && !img.empty(), ErrorKind::kInvalidArgument,
          "image must be finite and non-empty");
  check_psf(psf);
  switch (method) {
    case Method::kWiener: return wiener(img, psf, s);
    case Method::kRichardsonLucy:
      s.validate();
      return richardson_lucy(img, psf, s);
    case Method::kIterativeLs:
      return solve_least_squares(lsi_operator(psf), img, s, Method::kIterativeLs);
    default:
      fail(ErrorKind::kInvalidArgument,
           std::string("deconvolve does not support method ") + to_string(method));
  }
}

DeblurResult seidel_deconvolve(const Image& img, const SeidelCoeffs& coeffs,
                               const OpticalConfig& cfg, const SolverSettings& s,
                               Method method) {
  const Psf psf = psf_from_pupil(pupil(coeffs, 0.0, cfg), cfg);
  DeblurResult r = deconvolve(img, psf, method, s);
  r.method = Method::kSeidel;
  return r;
}

namespace {

// Accumulates sum |grad| and sum |grad|^2 over the interior.
std::pair<double, double> gradient_norms(const Image& img, int crop) {
  const Image inner = crop > 0 ? crop_border(img, crop) : img;
  double l1 = 0.0;
  double l2sq = 0.0;
  for (int y = 0; y + 1 < inner.rows(); ++y) {
    for (int x = 0; x + 1 < inner.cols(); ++x) {
      const double gx = inner(y, x + 1) - inner(y, x);
      const double gy = inner(y + 1, x) - inner(y, x);
      const double m2 = gx * gx + gy * gy;
      l1 += std::sqrt(m2);
      l2sq += m2;
    }
  }
  return {l1, l2sq};
}

}  // namespace

double sharpness(const Image& img, int crop) { return gradient_norms(img, crop).first; }

double normalized_sharpness(const Image& img, int crop) {
  const auto [l1, l2sq] = gradient_norms(img, crop);
  return l1 > 0.0 ? std::sqrt(l2sq) / l1 : 0.0;
}

double sharpness(const Image& img, int crop, SharpnessScore score) {
  return score == SharpnessScore::kGradientSum ? sharpness(img, crop)
                                               : normalized_sharpness(img, crop);
}

BlindResult blind_deconvolve(const Image& img, const OpticalConfig& cfg,
                             const SolverSettings& s, const BlindOptions& opt) {
  require(img.all_finite() && !img.empty(), ErrorKind::kInvalidArgument,
          "image must be finite and non-empty");
  require(opt.lower < opt.upper, ErrorKind::kInvalidArgument,
          "blind search interval is empty");
  require(opt.scan_points >= 2, ErrorKind::kInvalidArgument,
          "blind scan needs at least two points");
  require(sharpness(img, 0) > 0.0, ErrorKind::kUninformativeInput,
          "blind deconvolution needs a non-flat image (zero gradient everywhere)");

  BlindResult out;
  auto deblur = [&](double sphere) {
    SeidelCoeffs c;
    c.sphere = sphere;
    return seidel_deconvolve(img, c, cfg, s, opt.inner);
  };
  double best_w = opt.lower;
  double best_f = std::numeric_limits<double>::infinity();
  auto loss = [&](double sphere) {
    const double score = sharpness(deblur(sphere).image, opt.crop, opt.score);
    if (!std::isfinite(score)) {
      std::vector<double> trace;
      for (const auto& e : out.evaluations) trace.push_back(-e.second);
      throw DivergenceError("blind sharpness became non-finite at sphere = " +
                                std::to_string(sphere),
                            trace);
    }
    out.evaluations.emplace_back(sphere, score);
    if (-score < best_f) {
      best_f = -score;
      best_w = sphere;
    }
    return -score;
  };

  const double h = (opt.upper - opt.lower) / (opt.scan_points - 1);
  for (int k = 0; k < opt.scan_points; ++k) loss(opt.lower + k * h);

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::max(opt.lower, best_w - h);
  double b = std::min(opt.upper, best_w + h);
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = loss(c);
  double fd = loss(d);
  for (int it = 0; it < opt.golden_iters; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = loss(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = loss(d);
    }
  }

  double move = std::max(b - a, 10.0 * opt.fd_step);
  for (int it = 0; it < opt.refine_iters; ++it) {
    const double w = best_w;
    const double lo = std::max(opt.lower, w - opt.fd_step);
    const double hi = std::min(opt.upper, w + opt.fd_step);
    const double slope = loss(hi) - loss(lo);
    if (best_w != w) continue;  // a probe already improved on w
    if (slope == 0.0) break;
    bool improved = false;
    for (double alpha = move; alpha > 0.1 * opt.fd_step; alpha *= 0.5) {
      const double before = best_f;
      loss(std::clamp(w - (slope > 0 ? alpha : -alpha), opt.lower, opt.upper));
      if (best_f < before) {
        move = alpha;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }

  out.sphere = best_w;
  out.result = deblur(best_w);
  out.result.method = Method::kBlind;
  out.result.loss_trace.clear();
  for (const auto& e : out.evaluations) out.result.loss_trace.push_back(-e.second);
  out.result.iterations_run = static_cast<int>(out.evaluations.size());
  out.result.converged = true;
  return out;
}

}  // namespace rdm
