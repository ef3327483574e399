#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdm/config.hpp"
#include "rdm/image.hpp"
#include "rdm/seidel.hpp"

namespace rdm {

enum class BenchMethod { kTrueBlur, kLsiConv, kRingConv };
const char* to_string(BenchMethod m);

struct BenchRecord {
  BenchMethod method = BenchMethod::kTrueBlur;
  int n = 0;
  double level = 0.0;     // off-axis norm, waves
  double wall_time = 0.0;  // seconds, median over trials
  // NaN when the oracle was skipped for this size.
  double mse_vs_oracle = 0.0;
};

struct BenchOptions {
  std::vector<int> sizes{64};
  std::vector<double> levels{0.0, 0.3, 0.6, 0.9, 1.2, 1.5};
  int trials = 3;
  std::uint64_t seed = 0;
  // Sizes above this skip the O(N^4) oracle.
  int oracle_limit = 256;
  GridConfig grid;
};

// Off-axis norm `level` spread evenly over coma, astigmatism, field
// curvature and distortion; sphere fixed at 0.25 waves.
SeidelCoeffs bench_coeffs(double level);
// Nyquist optics whose PSF patch covers the whole n x n frame, with the
// grid's farthest corner at r = 1.
OpticalConfig bench_optics(int n, double fov_pixels);
// Gaussian blobs on a dark background, deterministic in (n, seed).
Image bench_scene(int n, std::uint64_t seed);

// Wall times cover only the forward application: the PSF table, LSI PSF
// and ring spectra are built outside the timed region. Records are sorted
// by (method, n, level).
std::vector<BenchRecord> run_bench(const BenchOptions& opt);
void write_bench_csv(const std::string& path, const std::vector<BenchRecord>& records);

}  // namespace rdm
