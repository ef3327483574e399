#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "rdm/config.hpp"

namespace rdm {

struct DatasetOptions {
  int count = 2;  // coefficient sets
  std::uint64_t seed = 0;
  std::optional<double> snr_db;
  // Makes set 0 all-zero (diffraction-limited) so the pipeline can be
  // checked against plain LSI blur.
  bool include_zero = false;
};

// Coefficients for set `index`: even indices draw each coefficient
// uniformly from [0, 3] waves, odd ones pick a node of the grid
// {0, 0.75, ..., 3} and perturb it with N(0, 0.15), clamped to [0, 3].
SeidelCoeffs sample_dataset_coeffs(int index, std::mt19937_64& rng);

// Adds white Gaussian noise with power mean(img^2) / 10^(snr_db / 10).
void add_noise_snr(Image& img, double snr_db, std::mt19937_64& rng);

// Blurs every TIFF in clean_dir (sorted by name) with ring convolution under
// `count` coefficient sets. Writes out_dir/clean/<name>.tif,
// out_dir/blurred/set###_<name>.tif and out_dir/manifest.json, which is
// returned.
Json gen_dataset(const std::string& clean_dir, const std::string& out_dir,
                 const RunConfig& cfg, const DatasetOptions& opt);

std::string sha256_file(const std::string& path);
// Throws kFormat naming the first file that is missing or whose hash
// differs from the manifest.
void verify_manifest(const std::string& out_dir);

}  // namespace rdm
