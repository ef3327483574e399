#include "rdm/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rdm/error.hpp"

namespace rdm {

Image::Image(int rows, int cols, double fill) : rows_(rows), cols_(cols) {
  require(rows >= 0 && cols >= 0, ErrorKind::kInvalidArgument,
          "image dimensions must be nonnegative");
  data_.assign(static_cast<std::size_t>(rows) * cols, fill);
}

Image::Image(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(rows >= 0 && cols >= 0 &&
              data_.size() == static_cast<std::size_t>(rows) * cols,
          ErrorKind::kInvalidArgument, "image data size does not match shape");
}

bool Image::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Image::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Image::max() const {
  return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

double Image::min() const {
  return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

Image& Image::operator+=(const Image& other) {
  require(rows_ == other.rows_ && cols_ == other.cols_,
          ErrorKind::kInvalidArgument, "image shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Image& Image::operator-=(const Image& other) {
  require(rows_ == other.rows_ && cols_ == other.cols_,
          ErrorKind::kInvalidArgument, "image shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Image& Image::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Image operator+(Image a, const Image& b) { return a += b; }
Image operator-(Image a, const Image& b) { return a -= b; }
Image operator*(Image a, double s) { return a *= s; }

double dot(const Image& a, const Image& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          ErrorKind::kInvalidArgument, "image shape mismatch");
  double s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < av.size(); ++k) s += av[k] * bv[k];
  return s;
}

double l2_norm(const Image& a) { return std::sqrt(dot(a, a)); }

double relative_l2(const Image& a, const Image& ref) {
  const double denom = l2_norm(ref);
  return denom > 0.0 ? l2_norm(a - ref) / denom
                     : std::numeric_limits<double>::infinity();
}

double mse(const Image& a, const Image& ref) {
  const Image d = a - ref;
  return ref.size() ? dot(d, d) / static_cast<double>(ref.size()) : 0.0;
}

double psnr(const Image& a, const Image& ref) {
  const double err = mse(a, ref);
  const double peak = ref.max();
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / err);
}

Image crop_border(const Image& img, int border) {
  require(border >= 0 && 2 * border < img.rows() && 2 * border < img.cols(),
          ErrorKind::kInvalidArgument, "crop border larger than image");
  Image out(img.rows() - 2 * border, img.cols() - 2 * border);
  for (int y = 0; y < out.rows(); ++y) {
    for (int x = 0; x < out.cols(); ++x) out(y, x) = img(y + border, x + border);
  }
  return out;
}

double sample_bilinear(const Image& img, double x, double y) {
  if (!(x >= 0.0 && y >= 0.0 && x <= img.cols() - 1 && y <= img.rows() - 1)) {
    return 0.0;
  }
  int x0 = static_cast<int>(x);
  int y0 = static_cast<int>(y);
  if (x0 == img.cols() - 1) --x0;
  if (y0 == img.rows() - 1) --y0;
  const double fx = x - x0;
  const double fy = y - y0;
  if (img.cols() == 1 || img.rows() == 1) {
    // Degenerate 1-pixel axis: fall back to nearest along that axis.
    const int xi = std::clamp(static_cast<int>(std::lround(x)), 0, img.cols() - 1);
    const int yi = std::clamp(static_cast<int>(std::lround(y)), 0, img.rows() - 1);
    return img(yi, xi);
  }
  return (1 - fy) * ((1 - fx) * img(y0, x0) + fx * img(y0, x0 + 1)) +
         fy * ((1 - fx) * img(y0 + 1, x0) + fx * img(y0 + 1, x0 + 1));
}

Image rotate(const Image& img, double angle, double cx, double cy) {
  Image out(img.rows(), img.cols());
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (int y = 0; y < img.rows(); ++y) {
    for (int x = 0; x < img.cols(); ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      // Pull from the source position rotated back by -angle.
      out(y, x) = sample_bilinear(img, cx + c * dx + s * dy, cy - s * dx + c * dy);
    }
  }
  return out;
}

}  // namespace rdm
