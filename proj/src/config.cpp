#include "rdm/config.hpp"

#include <fstream>
#include <set>

#include "rdm/error.hpp"

namespace rdm {

PolarGrid GridConfig::make(int n) const {
  return center ? PolarGrid::for_image(n, *center, coverage, oversample)
                : PolarGrid::for_image(n, coverage, oversample);
}

OpticalConfig RunConfig::optical_for(const PolarGrid& grid) const {
  OpticalConfig cfg = optical;
  if (fov_from_image) cfg.fov_radius = grid.max_radius() * cfg.pixel_pitch;
  cfg.validate();
  return cfg;
}

namespace {

const char* method_name(Method m) { return to_string(m); }

const char* optimizer_name(Optimizer o) {
  switch (o) {
    case Optimizer::kAdam: return "adam";
    case Optimizer::kGradientDescent: return "gradient_descent";
    case Optimizer::kAccelerated: return "accelerated";
  }
  return "adam";
}

Optimizer optimizer_from(const std::string& s) {
  if (s == "adam") return Optimizer::kAdam;
  if (s == "gradient_descent") return Optimizer::kGradientDescent;
  if (s == "accelerated") return Optimizer::kAccelerated;
  fail(ErrorKind::kInvalidArgument, "unknown optimizer '" + s + "'");
}

const char* score_name(SharpnessScore s) {
  return s == SharpnessScore::kGradientSum ? "gradient_sum" : "normalized_gradient";
}

SharpnessScore score_from(const std::string& s) {
  if (s == "gradient_sum") return SharpnessScore::kGradientSum;
  if (s == "normalized_gradient") return SharpnessScore::kNormalizedGradient;
  fail(ErrorKind::kInvalidArgument, "unknown sharpness score '" + s + "'");
}

Json point_json(const Point& p) { return Json::array({p.x, p.y}); }

// Reads the keys of one JSON object into fields, rejecting unknown keys.
class Fields {
 public:
  Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j.is_object(), ErrorKind::kInvalidArgument, where_ + " must be a JSON object");
  }
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      require(seen_.count(k) > 0, ErrorKind::kInvalidArgument,
              "unknown key '" + where_ + "." + k + "'");
    }
  }
  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::kInvalidArgument, "bad value for '" + where_ + "." + key + "'");
    }
  }
  const Json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Point point_from(const Json& j, const std::string& where) {
  require(j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number(),
          ErrorKind::kInvalidArgument, where + " must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

Json to_json(const SeidelCoeffs& c) {
  return {{"sphere", c.sphere},
          {"coma", c.coma},
          {"astigmatism", c.astigmatism},
          {"field_curvature", c.field_curvature},
          {"distortion", c.distortion}};
}

Json to_json(const OpticalConfig& c) {
  return {{"wavelength", c.wavelength},
          {"pupil_radius", c.pupil_radius},
          {"pupil_to_image_distance", c.pupil_to_image_distance},
          {"pupil_samples", c.pupil_samples},
          {"psf_side", c.psf_side},
          {"pixel_pitch", c.pixel_pitch},
          {"fov_radius", c.fov_radius}};
}

Json to_json(const SolverSettings& s) {
  return {{"max_iters", s.max_iters},
          {"step", s.step},
          {"tv_weight", s.tv_weight},
          {"stop_tol", s.stop_tol},
          {"nonneg", s.nonneg},
          {"seed", s.seed},
          {"optimizer", optimizer_name(s.optimizer)},
          {"final_step_fraction", s.final_step_fraction},
          {"wiener_kappa", s.wiener_kappa}};
}

Json to_json(const DetectionConfig& d) {
  Json j = {{"threshold", d.threshold},
            {"min_separation", d.min_separation},
            {"patch_size", d.patch_size},
            {"centroid_radius", d.centroid_radius},
            {"smoothing_sigma", d.smoothing_sigma},
            {"fov_pixels", d.fov_pixels}};
  j["center"] = d.center ? point_json(*d.center) : Json();
  return j;
}

Json to_json(const FitSettings& f) {
  return {{"iterations", f.iterations},   {"step", f.step},
          {"final_step_fraction", f.final_step_fraction},
          {"stop_tol", f.stop_tol},       {"restarts", f.restarts},
          {"init_low", f.init_low},       {"init_high", f.init_high},
          {"smoothing_sigma", f.smoothing_sigma},
          {"smoothing_fraction", f.smoothing_fraction},
          {"seed", f.seed}};
}

Json to_json(const BlindOptions& b) {
  return {{"lower", b.lower},
          {"upper", b.upper},
          {"score", score_name(b.score)},
          {"scan_points", b.scan_points},
          {"golden_iters", b.golden_iters},
          {"refine_iters", b.refine_iters},
          {"fd_step", b.fd_step},
          {"inner", method_name(b.inner)},
          {"crop", b.crop}};
}

Json to_json(const GridConfig& g) {
  Json j = {{"coverage", g.coverage == Coverage::kCorners ? "corners" : "inscribed"},
            {"oversample", g.oversample}};
  j["center"] = g.center ? point_json(*g.center) : Json();
  return j;
}

Json to_json(const RunConfig& r) {
  Json j;
  j["optical"] = to_json(r.optical);
  j["fov_from_image"] = r.fov_from_image;
  j["grid"] = to_json(r.grid);
  j["solver"] = to_json(r.solver);
  j["detection"] = to_json(r.detection);
  j["fit"] = to_json(r.fit);
  j["blind"] = to_json(r.blind);
  j["seed"] = r.seed;
  j["noise_snr_db"] = r.noise_snr_db ? Json(*r.noise_snr_db) : Json();
  return j;
}

Json to_json(const FitReport& r) {
  Json j;
  j["coeffs"] = to_json(r.coeffs);
  const char* names[] = {"sphere", "coma", "astigmatism", "field_curvature", "distortion"};
  Json unconstrained = Json::array();
  for (int k = 0; k < SeidelCoeffs::kCount; ++k) {
    if (!r.constrained[k]) unconstrained.push_back(names[k]);
  }
  j["unconstrained"] = unconstrained;
  j["converged"] = r.converged;
  j["restart"] = r.restart;
  j["restart_losses"] = r.restart_losses;
  j["per_patch_residual"] = r.per_patch_residual;
  j["per_iteration_loss"] = r.per_iteration_loss;
  return j;
}

SeidelCoeffs coeffs_from_json(const Json& j) {
  SeidelCoeffs c;
  {
    Fields f(j, "coeffs");
    f.get("sphere", c.sphere);
    f.get("coma", c.coma);
    f.get("astigmatism", c.astigmatism);
    f.get("field_curvature", c.field_curvature);
    f.get("distortion", c.distortion);
    f.finish();
  }
  require(c.all_finite(), ErrorKind::kInvalidArgument, "coefficients must be finite");
  return c;
}

OpticalConfig optical_from_json(const Json& j, OpticalConfig base) {
  {
    Fields f(j, "optical");
    f.get("wavelength", base.wavelength);
    f.get("pupil_radius", base.pupil_radius);
    f.get("pupil_to_image_distance", base.pupil_to_image_distance);
    f.get("pupil_samples", base.pupil_samples);
    f.get("psf_side", base.psf_side);
    f.get("pixel_pitch", base.pixel_pitch);
    f.get("fov_radius", base.fov_radius);
    f.finish();
  }
  base.validate();
  return base;
}

RunConfig run_config_from_json(const Json& j, RunConfig r) {
  Fields top(j, "config");
  if (const Json* o = top.sub("optical")) r.optical = optical_from_json(*o, r.optical);
  top.get("fov_from_image", r.fov_from_image);
  top.get("seed", r.seed);
  if (const Json* n = top.sub("noise_snr_db")) {
    if (n->is_null()) {
      r.noise_snr_db.reset();
    } else {
      require(n->is_number(), ErrorKind::kInvalidArgument, "bad value for 'config.noise_snr_db'");
      r.noise_snr_db = n->get<double>();
    }
  }
  if (const Json* g = top.sub("grid")) {
    Fields f(*g, "grid");
    std::string coverage = r.grid.coverage == Coverage::kCorners ? "corners" : "inscribed";
    f.get("coverage", coverage);
    require(coverage == "corners" || coverage == "inscribed", ErrorKind::kInvalidArgument,
            "grid.coverage must be 'corners' or 'inscribed'");
    r.grid.coverage = coverage == "corners" ? Coverage::kCorners : Coverage::kInscribed;
    f.get("oversample", r.grid.oversample);
    require(r.grid.oversample >= 1, ErrorKind::kInvalidArgument, "grid.oversample must be >= 1");
    if (const Json* c = f.sub("center")) {
      if (c->is_null()) r.grid.center.reset();
      else r.grid.center = point_from(*c, "grid.center");
    }
    f.finish();
  }
  if (const Json* s = top.sub("solver")) {
    Fields f(*s, "solver");
    SolverSettings& v = r.solver;
    f.get("max_iters", v.max_iters);
    f.get("step", v.step);
    f.get("tv_weight", v.tv_weight);
    f.get("stop_tol", v.stop_tol);
    f.get("nonneg", v.nonneg);
    f.get("seed", v.seed);
    std::string opt = optimizer_name(v.optimizer);
    f.get("optimizer", opt);
    v.optimizer = optimizer_from(opt);
    f.get("final_step_fraction", v.final_step_fraction);
    f.get("wiener_kappa", v.wiener_kappa);
    f.finish();
  }
  if (const Json* d = top.sub("detection")) {
    Fields f(*d, "detection");
    DetectionConfig& v = r.detection;
    f.get("threshold", v.threshold);
    f.get("min_separation", v.min_separation);
    f.get("patch_size", v.patch_size);
    f.get("centroid_radius", v.centroid_radius);
    f.get("smoothing_sigma", v.smoothing_sigma);
    f.get("fov_pixels", v.fov_pixels);
    if (const Json* c = f.sub("center")) {
      if (c->is_null()) v.center.reset();
      else v.center = point_from(*c, "detection.center");
    }
    f.finish();
  }
  if (const Json* fj = top.sub("fit")) {
    Fields f(*fj, "fit");
    FitSettings& v = r.fit;
    f.get("iterations", v.iterations);
    f.get("step", v.step);
    f.get("final_step_fraction", v.final_step_fraction);
    f.get("stop_tol", v.stop_tol);
    f.get("restarts", v.restarts);
    f.get("init_low", v.init_low);
    f.get("init_high", v.init_high);
    f.get("smoothing_sigma", v.smoothing_sigma);
    f.get("smoothing_fraction", v.smoothing_fraction);
    f.get("seed", v.seed);
    f.finish();
  }
  if (const Json* b = top.sub("blind")) {
    Fields f(*b, "blind");
    BlindOptions& v = r.blind;
    f.get("lower", v.lower);
    f.get("upper", v.upper);
    std::string score = score_name(v.score);
    f.get("score", score);
    v.score = score_from(score);
    f.get("scan_points", v.scan_points);
    f.get("golden_iters", v.golden_iters);
    f.get("refine_iters", v.refine_iters);
    f.get("fd_step", v.fd_step);
    std::string inner = method_name(v.inner);
    f.get("inner", inner);
    v.inner = method_from_string(inner);
    f.get("crop", v.crop);
    f.finish();
  }
  top.finish();
  r.solver.validate();
  r.detection.validate();
  r.fit.validate();
  return r;
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kFormat, path + ": invalid JSON (" + e.what() + ")");
  }
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorKind::kIo, "write failed for '" + path + "'");
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(read_json(path));
}

SeidelCoeffs load_coeffs(const std::string& path) {
  const Json j = read_json(path);
  require(j.is_object(), ErrorKind::kFormat, path + ": expected a JSON object");
  return coeffs_from_json(j.contains("coeffs") ? j.at("coeffs") : j);
}

}  // namespace rdm
