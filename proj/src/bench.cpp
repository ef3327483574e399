#include "rdm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "rdm/error.hpp"
#include "rdm/forward.hpp"

namespace rdm {

const char* to_string(BenchMethod m) {
  switch (m) {
    case BenchMethod::kTrueBlur: return "true_blur";
    case BenchMethod::kLsiConv: return "lsi_conv";
    case BenchMethod::kRingConv: return "ring_conv";
  }
  return "unknown";
}

SeidelCoeffs bench_coeffs(double level) {
  const double each = level / 2.0;  // |(e, e, e, e)| = 2e
  return {0.25, each, each, each, each};
}

OpticalConfig bench_optics(int n, double fov_pixels) {
  return OpticalConfig::nyquist(n, fov_pixels, n);
}

Image bench_scene(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(n, n);
  const int blobs = std::max(8, n * n / 128);
  for (int b = 0; b < blobs; ++b) {
    const double cx = u(rng) * (n - 1);
    const double cy = u(rng) * (n - 1);
    const double s = 0.8 + 2.0 * u(rng);
    const double a = 0.2 + 0.8 * u(rng);
    const int r = static_cast<int>(std::ceil(4 * s));
    for (int y = std::max(0, static_cast<int>(cy) - r); y <= std::min(n - 1, static_cast<int>(cy) + r); ++y) {
      for (int x = std::max(0, static_cast<int>(cx) - r); x <= std::min(n - 1, static_cast<int>(cx) + r); ++x) {
        img(y, x) += a * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * s * s));
      }
    }
  }
  return img;
}

namespace {

template <class F>
double median_time(int trials, F&& f) {
  std::vector<double> t;
  for (int k = 0; k < trials; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  const std::size_t m = t.size() / 2;
  return t.size() % 2 ? t[m] : 0.5 * (t[m - 1] + t[m]);
}

}  // namespace

std::vector<BenchRecord> run_bench(const BenchOptions& opt) {
  require(opt.trials > 0 && !opt.sizes.empty() && !opt.levels.empty(),
          ErrorKind::kInvalidArgument, "bench needs sizes, levels and trials > 0");
  std::vector<BenchRecord> out;
  for (int n : opt.sizes) {
    require(n >= 8, ErrorKind::kInvalidArgument, "bench sizes must be >= 8");
    const PolarGrid grid = opt.grid.make(n);
    const OpticalConfig cfg = bench_optics(n, grid.max_radius());
    const Image obj = bench_scene(n, opt.seed);
    for (double level : opt.levels) {
      const SeidelCoeffs c = bench_coeffs(level);
      const bool with_oracle = n <= opt.oracle_limit;

      Image oracle, lsi, ring;
      if (with_oracle) {
        const Point center{(n - 1) / 2.0, (n - 1) / 2.0};
        const RadialPsfTable table = RadialPsfTable::build(c, cfg, grid.max_radius(), 0.5);
        SuperposeOptions so;
        so.center = center;
        so.allow_large = true;
        const double t = median_time(opt.trials, [&] { oracle = superpose_blur(obj, table, so); });
        out.push_back({BenchMethod::kTrueBlur, n, level, t, 0.0});
      }
      const Psf center_psf = synth_psf(c, 0.0, cfg);
      const double t_lsi = median_time(opt.trials, [&] { lsi = lsi_convolve(obj, center_psf); });
      const RingSpectrumStack spectra =
          precompute_ring_spectra(synth_radial_psfs(c, grid, cfg), grid);
      const double t_ring =
          median_time(opt.trials, [&] { ring = ring_convolve(obj, spectra, grid); });
      const double nan = std::numeric_limits<double>::quiet_NaN();
      out.push_back({BenchMethod::kLsiConv, n, level, t_lsi, with_oracle ? mse(lsi, oracle) : nan});
      out.push_back({BenchMethod::kRingConv, n, level, t_ring, with_oracle ? mse(ring, oracle) : nan});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const BenchRecord& a, const BenchRecord& b) {
    if (a.method != b.method) return a.method < b.method;
    if (a.n != b.n) return a.n < b.n;
    return a.level < b.level;
  });
  return out;
}

void write_bench_csv(const std::string& path, const std::vector<BenchRecord>& records) {
  std::ofstream f(path, std::ios::trunc);
  require(static_cast<bool>(f), ErrorKind::kIo, "cannot write '" + path + "'");
  f << "method,n,off_axis_norm,wall_time_s,mse_vs_oracle\n";
  f.precision(9);
  for (const auto& r : records) {
    f << to_string(r.method) << ',' << r.n << ',' << r.level << ',' << r.wall_time << ',';
    if (!std::isnan(r.mse_vs_oracle)) f << r.mse_vs_oracle;
    f << '\n';
  }
  require(static_cast<bool>(f), ErrorKind::kIo, "write failed for '" + path + "'");
}

}  // namespace rdm
