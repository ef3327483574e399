#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rdm/error.hpp"
#include "rdm/forward.hpp"
#include "rdm/image.hpp"
#include "rdm/polar.hpp"
#include "rdm/seidel.hpp"

namespace rdm {

enum class Optimizer {
  kAdam,             // bias-corrected moment estimates
  kGradientDescent,  // fixed step / Lipschitz estimate
  kAccelerated,      // Nesterov momentum, step / Lipschitz estimate
};

struct SolverSettings {
  int max_iters = 200;
  // Adam: learning rate. Gradient descent / accelerated: fraction of
  // 1 / L where L is a power-iteration estimate of the gradient's
  // Lipschitz constant.
  double step = 0.05;
  double tv_weight = 0.0;
  double stop_tol = 1e-6;
  bool nonneg = true;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::kAdam;
  // Adam learning-rate decay: the rate falls geometrically to
  // step * final_step_fraction by the last iteration.
  double final_step_fraction = 1.0;
  double wiener_kappa = 1e-2;

  void validate() const;
};

enum class Method { kRing, kWiener, kRichardsonLucy, kIterativeLs, kSeidel, kBlind };

const char* to_string(Method m);
Method method_from_string(const std::string& s);

struct DeblurResult {
  Image image;
  std::vector<double> loss_trace;
  int iterations_run = 0;
  Method method = Method::kRing;
  bool converged = false;
};

// Raised when an iteration produces a non-finite loss; carries the trace.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<double> trace)
      : Error(ErrorKind::kDivergence, what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

struct LinearOperator {
  std::function<Image(const Image&)> apply;
  std::function<Image(const Image&)> adjoint;
};

LinearOperator ring_operator(const RingSpectrumStack& spectra, const PolarGrid& grid);
LinearOperator lsi_operator(const Psf& psf);

// Sum of absolute forward differences (anisotropic).
double total_variation(const Image& g);
// Subgradient of total_variation, sign(0) = 0.
Image tv_subgradient(const Image& g);

// ||f - A g||^2 + tv_weight * TV(g) and its (sub)gradient.
double objective(const LinearOperator& a, const Image& f, const Image& g,
                 double tv_weight);
Image objective_gradient(const LinearOperator& a, const Image& f, const Image& g,
                         double tv_weight);

// Largest eigenvalue of A^T A by power iteration.
double operator_norm_sq(const LinearOperator& a, int rows, int cols,
                        int iterations = 30, std::uint64_t seed = 0);

// Transpose of ring_convolve.
Image ring_convolve_adjoint(const Image& img, const RingSpectrumStack& spectra,
                            const PolarGrid& grid);

// Generic first-order minimization of the objective above, started at f.
// Returns the best-loss iterate.
DeblurResult solve_least_squares(const LinearOperator& a, const Image& f,
                                 const SolverSettings& s, Method tag);

DeblurResult ring_deconvolve(const Image& img, const RingSpectrumStack& spectra,
                             const PolarGrid& grid, const SolverSettings& s);

DeblurResult deconvolve(const Image& img, const Psf& psf, Method method,
                        const SolverSettings& s);

DeblurResult seidel_deconvolve(const Image& img, const SeidelCoeffs& coeffs,
                               const OpticalConfig& cfg, const SolverSettings& s,
                               Method method = Method::kWiener);

// kGradientSum is the total gradient magnitude, which keeps rising past the
// true coefficient as deconvolution starts to ring. kNormalizedGradient
// divides the gradient L2 norm by its L1 norm; blur and ringing both lower it.
enum class SharpnessScore { kGradientSum, kNormalizedGradient };

struct BlindOptions {
  double lower = 0.0;
  double upper = 3.0;
  SharpnessScore score = SharpnessScore::kNormalizedGradient;
  // Coarse grid over [lower, upper] that brackets the golden-section search.
  int scan_points = 25;
  int golden_iters = 16;
  int refine_iters = 10;
  double fd_step = 1e-3;
  Method inner = Method::kWiener;
  int crop = 10;
};

struct BlindResult {
  double sphere = 0.0;
  DeblurResult result;
  // (sphere, sharpness) for every evaluation, in order.
  std::vector<std::pair<double, double>> evaluations;
};

// Sum of gradient magnitudes of the interior (border cropped).
double sharpness(const Image& img, int crop);
// ||grad||_2 / ||grad||_1 of the interior; 0 for a flat image.
double normalized_sharpness(const Image& img, int crop);
double sharpness(const Image& img, int crop, SharpnessScore score);

BlindResult blind_deconvolve(const Image& img, const OpticalConfig& cfg,
                             const SolverSettings& s, const BlindOptions& opt = {});

}  // namespace rdm
