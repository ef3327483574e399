// Parallel kernels vs the serial reference implementations. Reports the
// median wall time of each and the max abs difference between them.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include "rdm/forward.hpp"
#include "rdm/parallel.hpp"
#include "rdm/polar.hpp"
#include "rdm/reference.hpp"

using namespace rdm;

namespace {

double median_time(int trials, const std::function<void()>& fn) {
  std::vector<double> t;
  for (int k = 0; k < trials; ++k) {
    const auto a = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - a).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

template <class A>
double max_diff(const A& a, const A& b) {
  double d = 0.0;
  auto va = a.values();
  auto vb = b.values();
  for (std::size_t k = 0; k < va.size(); ++k) d = std::max(d, std::abs(va[k] - vb[k]));
  return d;
}

void report(const char* name, int n, double fast, double ref, double diff) {
  std::printf("%-20s n=%-4d threads=%d  fast=%9.5fs  serial=%9.5fs  speedup=%6.1fx  maxdiff=%.2e\n",
              name, n, thread_count(), fast, ref, ref / fast, diff);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel benchmark: parallel vs serial reference"};
  std::vector<int> sizes{64, 128};
  int trials = 3;
  int superpose_limit = 64;
  app.add_option("--sizes", sizes)->capture_default_str();
  app.add_option("--trials", trials)->capture_default_str();
  app.add_option("--superpose-limit", superpose_limit,
                 "Largest size for the O(N^4) superposition kernels")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const SeidelCoeffs c{0.3, 0.4, 0.3, 0.5, 0.1};
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  for (int n : sizes) {
    Image obj = Image::square(n);
    for (double& v : obj.values()) v = u(rng);
    const PolarGrid grid = PolarGrid::for_image(n);
    const OpticalConfig optics = OpticalConfig::nyquist(std::min(n, 64), grid.max_radius() + 1.0, 128);

    PolarImage fp(grid), rp(grid);
    const double tf = median_time(trials, [&] { fp = to_polar(obj, grid); });
    const double tr = median_time(trials, [&] { rp = reference::to_polar(obj, grid); });
    report("to_polar", n, tf, tr, max_diff(fp, rp));

    Image fi, ri;
    const double tf2 = median_time(trials, [&] { fi = from_polar(fp, n); });
    const double tr2 = median_time(trials, [&] { ri = reference::from_polar(fp, n); });
    report("from_polar", n, tf2, tr2, max_diff(fi, ri));

    const PsfRadialStack stack = synth_radial_psfs(c, grid, optics);
    const RingSpectrumStack spectra = precompute_ring_spectra(stack, grid);
    std::vector<PolarImage> psfs;
    for (int j = 0; j < grid.num_radii(); ++j) {
      psfs.push_back(polar_psf(stack.psfs[j].intensity, grid.radius(j), grid));
    }
    const PolarImage g = polar_splat(obj, grid);
    PolarImage fr(grid), rr(grid);
    const double tf3 = median_time(trials, [&] { fr = ring_convolve_polar(g, spectra); });
    const double tr3 = median_time(1, [&] { rr = reference::ring_convolve_polar(g, psfs); });
    report("ring_convolve_polar", n, tf3, tr3, max_diff(fr, rr));

    if (n <= superpose_limit) {
      const RadialPsfTable table = RadialPsfTable::build(c, optics, grid.max_radius() + 1.0);
      SuperposeOptions so;
      so.center = grid.center();
      Image fs, rs;
      const double tf4 = median_time(1, [&] { fs = superpose_blur(obj, table, so); });
      const double tr4 =
          median_time(1, [&] { rs = reference::superpose_blur(obj, table, grid.center()); });
      report("superpose_blur", n, tf4, tr4, max_diff(fs, rs));
    }
  }
  return 0;
}
