#include "rdm/dataset.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

#include "rdm/error.hpp"
#include "rdm/forward.hpp"
#include "rdm/tiff.hpp"

namespace fs = std::filesystem;

namespace rdm {

SeidelCoeffs sample_dataset_coeffs(int index, std::mt19937_64& rng) {
  std::array<double, SeidelCoeffs::kCount> a{};
  if (index % 2 == 0) {
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (double& v : a) v = u(rng);
  } else {
    std::uniform_int_distribution<int> node(0, 4);
    std::normal_distribution<double> jitter(0.0, 0.15);
    for (double& v : a) v = std::clamp(0.75 * node(rng) + jitter(rng), 0.0, 3.0);
  }
  return SeidelCoeffs::from_array(a);
}

void add_noise_snr(Image& img, double snr_db, std::mt19937_64& rng) {
  const double power = dot(img, img) / static_cast<double>(img.size());
  const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : img.values()) v += noise(rng);
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open '" + path + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              EVP_MD_CTX_free);
  require(ctx && EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) == 1, ErrorKind::kIo,
          "SHA-256 initialization failed");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

namespace {

std::vector<fs::path> clean_images(const std::string& dir) {
  require(fs::is_directory(dir), ErrorKind::kIo, "clean directory '" + dir + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".tif" || ext == ".tiff") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorKind::kInvalidArgument,
          "clean directory '" + dir + "' contains no TIFF images");
  return files;
}

}  // namespace

Json gen_dataset(const std::string& clean_dir, const std::string& out_dir,
                 const RunConfig& cfg, const DatasetOptions& opt) {
  require(opt.count > 0, ErrorKind::kInvalidArgument, "dataset count must be positive");
  const auto files = clean_images(clean_dir);
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "clean", ec);
  fs::create_directories(fs::path(out_dir) / "blurred", ec);
  require(!ec, ErrorKind::kIo, "cannot create output directory '" + out_dir + "'");

  struct Clean {
    std::string stem;
    std::vector<Image> channels;
    std::string rel;
  };
  std::vector<Clean> clean;
  for (const auto& f : files) {
    Clean c{f.stem().string(), load_channels(f.string()), {}};
    const Image& first = c.channels.front();
    require(first.is_square(), ErrorKind::kInvalidArgument,
            f.string() + ": ring convolution needs square images");
    c.rel = "clean/" + c.stem + ".tif";
    write_tiff((fs::path(out_dir) / c.rel).string(), c.channels);
    clean.push_back(std::move(c));
  }

  Json manifest;
  manifest["config"] = to_json(cfg);
  manifest["seed"] = opt.seed;
  manifest["count"] = opt.count;
  manifest["snr_db"] = opt.snr_db ? Json(*opt.snr_db) : Json();
  manifest["sets"] = Json::array();

  std::mt19937_64 coeff_rng(opt.seed);
  for (int k = 0; k < opt.count; ++k) {
    SeidelCoeffs c = sample_dataset_coeffs(k, coeff_rng);
    const bool forced_zero = opt.include_zero && k == 0;
    if (forced_zero) c = SeidelCoeffs{};
    Json set;
    set["index"] = k;
    set["kind"] = forced_zero ? "zero" : (k % 2 == 0 ? "uniform" : "grid");
    set["coeffs"] = to_json(c);
    set["pairs"] = Json::array();

    std::map<int, std::pair<PolarGrid, RingSpectrumStack>> cache;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const int n = clean[i].channels.front().rows();
      auto it = cache.find(n);
      if (it == cache.end()) {
        const PolarGrid grid = cfg.grid.make(n);
        const OpticalConfig optics = cfg.optical_for(grid);
        it = cache.emplace(n, std::make_pair(grid, precompute_ring_spectra(
                                                       synth_radial_psfs(c, grid, optics), grid)))
                 .first;
      }
      const auto& [grid, spectra] = it->second;
      // Noise stream depends only on (seed, set, image) so sets can be
      // regenerated independently.
      std::seed_seq seq{opt.seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(i)};
      std::mt19937_64 noise_rng(seq);
      std::vector<Image> blurred;
      for (const Image& ch : clean[i].channels) {
        Image b = ring_convolve(ch, spectra, grid);
        if (opt.snr_db) add_noise_snr(b, *opt.snr_db, noise_rng);
        blurred.push_back(std::move(b));
      }
      char prefix[32];
      std::snprintf(prefix, sizeof prefix, "set%03d_", k);
      const std::string rel = "blurred/" + std::string(prefix) + clean[i].stem + ".tif";
      write_tiff((fs::path(out_dir) / rel).string(), blurred, to_json(c).dump());
      set["pairs"].push_back(
          {{"clean", clean[i].rel},
           {"blurred", rel},
           {"sha256_clean", sha256_file((fs::path(out_dir) / clean[i].rel).string())},
           {"sha256_blurred", sha256_file((fs::path(out_dir) / rel).string())}});
    }
    manifest["sets"].push_back(std::move(set));
  }
  write_json((fs::path(out_dir) / "manifest.json").string(), manifest);
  return manifest;
}

void verify_manifest(const std::string& out_dir) {
  const Json m = read_json((fs::path(out_dir) / "manifest.json").string());
  require(m.contains("sets") && m.at("sets").is_array(), ErrorKind::kFormat,
          "manifest has no 'sets' array");
  for (const auto& set : m.at("sets")) {
    for (const auto& pair : set.at("pairs")) {
      for (const char* role : {"clean", "blurred"}) {
        const std::string rel = pair.at(role).get<std::string>();
        const fs::path file = fs::path(out_dir) / rel;
        require(fs::exists(file), ErrorKind::kFormat, "manifest file missing: " + rel);
        const std::string want = pair.at(std::string("sha256_") + role).get<std::string>();
        require(sha256_file(file.string()) == want, ErrorKind::kFormat,
                "checksum mismatch for " + rel);
      }
    }
  }
}

}  // namespace rdm
