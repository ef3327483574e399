#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "rdm/calibration.hpp"
#include "rdm/polar.hpp"
#include "rdm/seidel.hpp"
#include "rdm/solvers.hpp"

namespace rdm {

using Json = nlohmann::ordered_json;

struct GridConfig {
  Coverage coverage = Coverage::kCorners;
  int oversample = 1;
  std::optional<Point> center;
  PolarGrid make(int n) const;
};

// Everything a command needs; missing JSON keys keep these defaults.
struct RunConfig {
  OpticalConfig optical;
  // Picks the field of view from the image instead of optical.fov_radius:
  // the farthest corner of the polar grid maps to r = 1.
  bool fov_from_image = true;
  GridConfig grid;
  SolverSettings solver;
  DetectionConfig detection;
  FitSettings fit;
  BlindOptions blind;
  std::uint64_t seed = 0;
  std::optional<double> noise_snr_db;
  // Optical config used on an n x n image under this run.
  OpticalConfig optical_for(const PolarGrid& grid) const;
};

Json to_json(const SeidelCoeffs& c);
Json to_json(const OpticalConfig& c);
Json to_json(const SolverSettings& s);
Json to_json(const DetectionConfig& d);
Json to_json(const FitSettings& f);
Json to_json(const BlindOptions& b);
Json to_json(const GridConfig& g);
Json to_json(const RunConfig& r);
Json to_json(const FitReport& r);

// Unknown keys and wrong types raise kInvalidArgument naming the key.
SeidelCoeffs coeffs_from_json(const Json& j);
OpticalConfig optical_from_json(const Json& j, OpticalConfig base = {});
RunConfig run_config_from_json(const Json& j, RunConfig base = {});

// kIo with the path when the file is missing, kFormat when it is not JSON.
Json read_json(const std::string& path);
void write_json(const std::string& path, const Json& j);
RunConfig load_run_config(const std::string& path);

// Accepts either a bare coefficient object or one with a "coeffs" member
// (a calibration report).
SeidelCoeffs load_coeffs(const std::string& path);

}  // namespace rdm
