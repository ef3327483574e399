#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rdm {

// Row-major real image. Pixel (x, y) is column x, row y; the pixel center
// sits at integer coordinates.
class Image {
 public:
  Image() = default;
  Image(int rows, int cols, double fill = 0.0);
  Image(int rows, int cols, std::vector<double> data);

  static Image square(int n, double fill = 0.0) { return Image(n, n, fill); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool is_square() const { return rows_ == cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int y, int x) { return data_[index(y, x)]; }
  double operator()(int y, int x) const { return data_[index(y, x)]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  bool all_finite() const;
  double sum() const;
  double max() const;
  double min() const;

  Image& operator+=(const Image& other);
  Image& operator-=(const Image& other);
  Image& operator*=(double s);

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(x);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

Image operator+(Image a, const Image& b);
Image operator-(Image a, const Image& b);
Image operator*(Image a, double s);

double dot(const Image& a, const Image& b);
double l2_norm(const Image& a);

// ||a - ref|| / ||ref||.
double relative_l2(const Image& a, const Image& ref);
double mse(const Image& a, const Image& ref);
// Peak signal-to-noise ratio in dB with peak = max(ref).
double psnr(const Image& a, const Image& ref);

Image crop_border(const Image& img, int border);

// Bilinear sample with hard footprint: positions outside
// [0, cols-1] x [0, rows-1] read as zero.
double sample_bilinear(const Image& img, double x, double y);

// Rotate about (cx, cy) by angle (radians, counter-clockwise in the
// x-right / y-down pixel frame, i.e. +x toward +y).
Image rotate(const Image& img, double angle, double cx, double cy);

}  // namespace rdm
