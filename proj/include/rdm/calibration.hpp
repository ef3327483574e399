#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "rdm/error.hpp"
#include "rdm/image.hpp"
#include "rdm/polar.hpp"
#include "rdm/seidel.hpp"

namespace rdm {

struct DetectionConfig {
  // Local maxima must exceed background + threshold * (peak - background),
  // measured on the smoothed image.
  double threshold = 0.2;
  // Detections closer than this (pixels) are merged into the brighter one.
  double min_separation = 5.0;
  int patch_size = 65;  // odd
  int centroid_radius = 3;
  double smoothing_sigma = 1.0;
  std::optional<Point> center;  // optical axis; default image center
  // Pixels per unit normalized field radius; 0 uses the distance from the
  // center to the farthest corner.
  double fov_pixels = 0.0;
  void validate() const;
};

struct SourcePatch {
  Image patch;   // normalize_patch(signal)
  Image signal;  // background-subtracted, unclamped; what the fit compares
  // Sub-pixel source position in image coordinates. The patch is centered on
  // the nearest pixel; the fit treats this point as the ideal image point.
  Point center;
  double field_radius = 0.0;  // normalized
  double field_angle = 0.0;   // radians, atan2(dy, dx) about the axis
};

struct Detection {
  std::vector<SourcePatch> patches;
  int dropped_overlaps = 0;
  int dropped_outside_field = 0;
};

// Throws kEmptyCalibration when nothing rises above the threshold.
Detection detect_sources(const Image& calib, const DetectionConfig& cfg);

// Cuts a patch_size patch around `source`, subtracting `background`.
SourcePatch extract_patch(const Image& calib, Point source, Point axis,
                          double fov_pixels, int patch_size, double background);

// Median-subtracted, clamped at zero, unit sum. With threshold_sigmas > 0,
// pixels at or below that many noise sigmas (robust spread of the pixels
// under the median) are zeroed too; only sensible when the patch has a
// background margin. Throws kDegeneratePatch when nothing is left.
Image normalize_patch(const Image& patch, double threshold_sigmas = 0.0);

struct FitSettings {
  int iterations = 300;
  double step = 0.05;
  // Learning rate decays geometrically to step * final_step_fraction.
  double final_step_fraction = 0.1;
  double stop_tol = 1e-7;
  int restarts = 3;
  double init_low = 0.0;
  double init_high = 2.0;
  // Coarse-to-fine: the gradient is taken on Gaussian-blurred signal and
  // model, with the blur width (pixels) falling linearly to zero over the
  // first smoothing_fraction of the iterations. The recorded loss is always
  // the unblurred one.
  double smoothing_sigma = 5.0;
  double smoothing_fraction = 0.5;
  std::uint64_t seed = 0;
  void validate() const;
};

struct FitReport {
  SeidelCoeffs coeffs;
  std::vector<double> per_iteration_loss;  // of the winning restart
  std::vector<double> per_patch_residual;
  bool converged = false;
  // False for terms the patches cannot constrain (all sources on axis).
  std::array<bool, SeidelCoeffs::kCount> constrained{true, true, true, true, true};
  int restart = 0;
  std::vector<double> restart_losses;
};

// Sum over patches of 1 - cos^2(angle between signal and model), where the
// model is the canonical PSF at the patch radius rotated by its field angle
// and shifted to its sub-pixel center. Optionally returns the analytic
// gradient and the per-patch terms.
double fit_loss(const std::vector<SourcePatch>& patches, const SeidelCoeffs& c,
                const OpticalConfig& cfg,
                std::array<double, SeidelCoeffs::kCount>* grad = nullptr,
                std::vector<double>* per_patch = nullptr);

// Model image for one patch (unit sum before rotation).
Image render_patch_model(const SourcePatch& patch, const SeidelCoeffs& c,
                         const OpticalConfig& cfg);

// (sphere, coma, astig, field, dist) and (-sphere, coma, -astig, -field,
// dist) give identical intensity PSFs; returns the member of the pair with
// sphere + astigmatism + field_curvature >= 0.
SeidelCoeffs canonical_twin(const SeidelCoeffs& c);

// Throws NonConvergenceError on a non-finite loss.
FitReport fit_seidel(const std::vector<SourcePatch>& patches, const OpticalConfig& cfg,
                     const FitSettings& opt = {});

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, FitReport report)
      : Error(ErrorKind::kNonConvergence, what), report_(std::move(report)) {}
  const FitReport& report() const { return report_; }

 private:
  FitReport report_;
};

}  // namespace rdm
