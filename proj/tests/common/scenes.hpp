#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <algorithm>
#include <random>
#include <span>

#include "rdm/image.hpp"
#include "rdm/polar.hpp"

namespace testutil {

inline rdm::Image random_image(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  rdm::Image img(rows, cols);
  for (double& v : img.values()) v = u(rng);
  return img;
}

// Sum of a few low-frequency sinusoids, band-limited well below Nyquist.
inline double smooth_fn(double x, double y, int n) {
  const double s = 2.0 * std::numbers::pi / n;
  return 1.0 + 0.5 * std::sin(1.3 * s * x + 0.4) * std::cos(0.9 * s * y) +
         0.3 * std::cos(2.1 * s * (x + y) + 1.0) + 0.2 * std::sin(2.7 * s * y - 0.3);
}

inline rdm::Image smooth_image(int n) {
  rdm::Image img(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) img(y, x) = smooth_fn(x, y, n);
  }
  return img;
}

// Gaussian blobs with random centers, widths and amplitudes.
inline rdm::Image blobs(int n, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  rdm::Image img(n, n);
  for (int b = 0; b < count; ++b) {
    const double cx = u(rng) * (n - 1), cy = u(rng) * (n - 1);
    const double s = 1.0 + 2.0 * u(rng), a = 0.2 + 0.8 * u(rng);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        img(y, x) += a * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * s * s));
      }
    }
  }
  return img;
}

// Twelve overlapping ellipses (max-combined), amplitudes in [0.3, 1],
// kept 8 px away from the border.
inline rdm::Image phantom(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  rdm::Image img(n, n);
  for (int b = 0; b < 12; ++b) {
    const double cx = 8 + u(rng) * (n - 16), cy = 8 + u(rng) * (n - 16);
    const double rx = 2 + 6 * u(rng), ry = 2 + 6 * u(rng), a = 0.3 + 0.7 * u(rng);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        if ((x - cx) * (x - cx) / (rx * rx) + (y - cy) * (y - cy) / (ry * ry) <= 1) {
          img(y, x) = std::max(img(y, x), a);
        }
      }
    }
  }
  return img;
}

inline rdm::Image phantom(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return phantom(n, rng);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

inline double rel_l2(std::span<const double> a, std::span<const double> b) {
  double n = 0.0, d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    n += (a[k] - b[k]) * (a[k] - b[k]);
    d += b[k] * b[k];
  }
  return std::sqrt(n / d);
}

}  // namespace testutil
