// Command-line front end. Exit codes: 0 success, 1 user error, 2 numerical
// failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rdm/bench.hpp"
#include "rdm/calibration.hpp"
#include "rdm/config.hpp"
#include "rdm/dataset.hpp"
#include "rdm/error.hpp"
#include "rdm/forward.hpp"
#include "rdm/roft.hpp"
#include "rdm/solvers.hpp"
#include "rdm/tiff.hpp"

namespace fs = std::filesystem;
using namespace rdm;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, const std::string& default_out) {
  cmd->add_option("--config", c.config_path, "RunConfig JSON file");
  cmd->add_option("--seed", c.seed, "Seed for every random choice in the run");
  c.out = default_out;
  cmd->add_option("--out", c.out, "Output path")->capture_default_str();
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.solver.seed = *c.seed;
    cfg.fit.seed = *c.seed;
  }
  return cfg;
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

Json provenance(const std::string& command, const RunConfig& cfg) {
  return {{"command", command}, {"config", to_json(cfg)}};
}

void write_csv_sidecar(const std::string& csv, const Json& meta) {
  write_json(csv + ".config.json", meta);
}

// Replaces pixels that exceed their 3x3 median by more than k robust
// standard deviations (global MAD). Not part of the optical model.
Image clamp_hot_pixels(const Image& img, double k) {
  std::vector<double> v(img.storage());
  auto median = [](std::vector<double> x) {
    std::nth_element(x.begin(), x.begin() + x.size() / 2, x.end());
    return x[x.size() / 2];
  };
  const double med = median(v);
  for (double& x : v) x = std::abs(x - med);
  const double sigma = 1.4826 * median(v);
  Image out = img;
  for (int y = 0; y < img.rows(); ++y) {
    for (int x = 0; x < img.cols(); ++x) {
      std::vector<double> nb;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if ((dx || dy) && yy >= 0 && yy < img.rows() && xx >= 0 && xx < img.cols()) {
            nb.push_back(img(yy, xx));
          }
        }
      }
      const double m = median(nb);
      if (img(y, x) > m + k * sigma) out(y, x) = m;
    }
  }
  return out;
}

struct ImageInput {
  std::string path;
  double hot_pixel_k = 0.0;
  std::vector<Image> load() const {
    std::vector<Image> ch = load_channels(path);
    if (hot_pixel_k > 0.0) {
      for (Image& c : ch) c = clamp_hot_pixels(c, hot_pixel_k);
    }
    return ch;
  }
};

void add_image_input(CLI::App* cmd, ImageInput& in) {
  cmd->add_option("--image", in.path, "Input TIFF")->required();
  cmd->add_option("--hot-pixel-clamp", in.hot_pixel_k,
                  "Replace pixels above their 3x3 median by more than K robust sigmas");
}

// Percentile contrast stretch for viewing; stored float outputs are never
// stretched.
void write_display(const std::string& out, const std::vector<Image>& channels) {
  for (std::size_t c = 0; c < channels.size(); ++c) {
    std::vector<double> v(channels[c].storage());
    std::sort(v.begin(), v.end());
    const double lo = v[static_cast<std::size_t>(0.005 * (v.size() - 1))];
    const double hi = v[static_cast<std::size_t>(0.995 * (v.size() - 1))];
    Image s = channels[c];
    for (double& x : s.values()) x = hi > lo ? (x - lo) / (hi - lo) : 0.0;
    const std::string suffix =
        channels.size() == 1 ? ".display.tif" : ".display" + std::to_string(c) + ".tif";
    write_tiff_u8(with_suffix(out, suffix), s);
  }
}

void write_trace(const std::string& path, const std::vector<double>& trace) {
  std::ofstream f(path, std::ios::trunc);
  require(static_cast<bool>(f), ErrorKind::kIo, "cannot write '" + path + "'");
  f.precision(12);
  f << "iteration,loss\n";
  for (std::size_t k = 0; k < trace.size(); ++k) f << k << ',' << trace[k] << '\n';
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      require(used == item.size(), ErrorKind::kInvalidArgument, "bad number '" + item + "'");
    } catch (const std::logic_error&) {
      fail(ErrorKind::kInvalidArgument, "bad number '" + item + "' in list '" + s + "'");
    }
  }
  require(!out.empty(), ErrorKind::kInvalidArgument, "empty list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ring deconvolution microscopy: LRI forward models, Seidel calibration and deblurring"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // calibrate
  Common cal_c;
  ImageInput cal_in;
  auto* cal = app.add_subcommand("calibrate", "Fit Seidel coefficients to a bead image");
  add_common(cal, cal_c, "calibration.json");
  add_image_input(cal, cal_in);

  // psf
  Common psf_c;
  std::string psf_coeffs;
  double psf_radius = 0.0;
  int psf_side = 0;
  auto* psf = app.add_subcommand("psf", "Render the canonical PSF at a field radius");
  add_common(psf, psf_c, "psf.tif");
  psf->add_option("--coeffs", psf_coeffs, "Coefficient or calibration JSON")->required();
  psf->add_option("--radius", psf_radius, "Normalized field radius in [0, 1]")->capture_default_str();
  psf->add_option("--side", psf_side, "PSF side in pixels (default from config)");

  // blur
  Common blur_c;
  ImageInput blur_in;
  std::string blur_coeffs, blur_model = "ring";
  bool blur_display = false;
  auto* blur = app.add_subcommand("blur", "Apply an LRI forward model");
  add_common(blur, blur_c, "blurred.tif");
  add_image_input(blur, blur_in);
  blur->add_option("--coeffs", blur_coeffs, "Coefficient or calibration JSON")->required();
  blur->add_option("--model", blur_model, "ring | lsi | true")
      ->check(CLI::IsMember({"ring", "lsi", "true"}))
      ->capture_default_str();
  blur->add_flag("--display-stretch", blur_display, "Also write a stretched 8-bit preview");

  // deblur
  Common deb_c;
  ImageInput deb_in;
  std::string deb_coeffs, deb_psf, deb_method = "ring";
  bool deb_display = false;
  auto* deb = app.add_subcommand("deblur", "Deconvolve an image");
  add_common(deb, deb_c, "deblurred.tif");
  add_image_input(deb, deb_in);
  deb->add_option("--method", deb_method,
                  "ring | wiener | richardson_lucy (rl) | iterative_ls (ls) | seidel")
      ->capture_default_str();
  deb->add_option("--coeffs", deb_coeffs, "Coefficient or calibration JSON");
  deb->add_option("--psf", deb_psf, "Measured PSF TIFF for wiener / rl / ls");
  double deb_psf_threshold = 0.0;
  deb->add_option("--psf-threshold", deb_psf_threshold,
                  "Zero measured-PSF pixels below this many noise sigmas")
      ->check(CLI::NonNegativeNumber);
  deb->add_flag("--display-stretch", deb_display, "Also write a stretched 8-bit preview");

  // blind
  Common bl_c;
  ImageInput bl_in;
  bool bl_display = false;
  auto* bl = app.add_subcommand("blind", "Estimate the sphere coefficient and deblur");
  add_common(bl, bl_c, "blind.tif");
  add_image_input(bl, bl_in);
  bl->add_flag("--display-stretch", bl_display, "Also write a stretched 8-bit preview");

  // roft
  Common ro_c;
  std::string ro_coeffs, ro_image, ro_spectrum;
  int ro_size = 64;
  auto* ro = app.add_subcommand("roft", "PSF bandwidth / mix-width metrics and image RoFT");
  add_common(ro, ro_c, "metrics.csv");
  ro->add_option("--coeffs", ro_coeffs, "Coefficient or calibration JSON")->required();
  ro->add_option("--size", ro_size, "Image side defining the polar grid")->capture_default_str();
  ro->add_option("--image", ro_image, "Also transform this image");
  ro->add_option("--spectrum-out", ro_spectrum, "Where to write |RoFT| (radius x frequency)");

  // bench
  Common be_c;
  std::string be_sizes = "64", be_levels = "0,0.3,0.6,0.9,1.2,1.5";
  int be_trials = 3, be_oracle = 256;
  auto* be = app.add_subcommand("bench", "Forward-model accuracy and runtime table");
  add_common(be, be_c, "bench.csv");
  be->add_option("--sizes", be_sizes, "Comma-separated image sizes")->capture_default_str();
  be->add_option("--levels", be_levels, "Comma-separated off-axis norms (waves)")->capture_default_str();
  be->add_option("--trials", be_trials, "Timing trials per cell")->capture_default_str();
  be->add_option("--oracle-limit", be_oracle, "Largest size that runs the O(N^4) oracle")
      ->capture_default_str();

  // gen-dataset
  Common ds_c;
  std::string ds_clean;
  int ds_count = 2;
  std::optional<double> ds_snr;
  bool ds_zero = false, ds_verify = false;
  auto* ds = app.add_subcommand("gen-dataset", "Synthesize blurred/clean training pairs");
  add_common(ds, ds_c, "dataset");
  ds->add_option("--clean-dir", ds_clean, "Directory of clean TIFFs")->required();
  ds->add_option("--count", ds_count, "Number of coefficient sets")->capture_default_str();
  ds->add_option("--snr", ds_snr, "Add Gaussian noise at this SNR (dB)");
  ds->add_flag("--include-zero", ds_zero, "Force set 0 to zero coefficients");
  ds->add_flag("--verify", ds_verify, "Re-hash every file against the manifest afterwards");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0 && app.get_subcommands().empty()) std::cerr << app.help();
    return code == 0 ? 0 : 1;
  }

  try {
    if (*cal) {
      RunConfig cfg = resolve(cal_c);
      const std::vector<Image> ch = cal_in.load();
      require(ch.size() == 1, ErrorKind::kInvalidArgument,
              "calibration expects a single-channel bead image");
      const Image& img = ch.front();
      const Point axis = cfg.detection.center.value_or(
          Point{(img.cols() - 1) / 2.0, (img.rows() - 1) / 2.0});
      if (cfg.fov_from_image) {
        double fov = 0.0;
        for (double x : {0.0, img.cols() - 1.0}) {
          for (double y : {0.0, img.rows() - 1.0}) {
            fov = std::max(fov, std::hypot(x - axis.x, y - axis.y));
          }
        }
        cfg.optical.fov_radius = fov * cfg.optical.pixel_pitch;
      }
      cfg.detection.fov_pixels = cfg.optical.fov_pixels();
      cfg.detection.center = axis;
      const Detection det = detect_sources(img, cfg.detection);
      if (det.dropped_overlaps > 0) {
        std::cerr << "warning: dropped " << det.dropped_overlaps
                  << " overlapping detection(s)\n";
      }
      const FitReport rep = fit_seidel(det.patches, cfg.optical, cfg.fit);
      Json out = to_json(rep);
      Json sources = Json::array();
      for (const auto& p : det.patches) {
        sources.push_back({{"x", p.center.x},
                           {"y", p.center.y},
                           {"field_radius", p.field_radius},
                           {"field_angle", p.field_angle}});
      }
      out["detection"] = {{"sources", sources},
                          {"dropped_overlaps", det.dropped_overlaps},
                          {"dropped_outside_field", det.dropped_outside_field}};
      out["provenance"] = provenance("calibrate", cfg);
      out["provenance"]["image"] = cal_in.path;
      write_json(cal_c.out, out);
      std::cout << to_json(rep.coeffs).dump() << '\n';
    } else if (*psf) {
      RunConfig cfg = resolve(psf_c);
      if (psf_side > 0) {
        cfg.optical.psf_side = psf_side;
        cfg.optical.pupil_samples = std::max(cfg.optical.pupil_samples, psf_side + psf_side % 2);
      }
      require(psf_radius >= 0.0 && psf_radius <= 1.0, ErrorKind::kInvalidArgument,
              "--radius must lie in [0, 1]");
      const SeidelCoeffs c = load_coeffs(psf_coeffs);
      const Psf p = synth_psf(c, psf_radius, cfg.optical);
      Json meta = provenance("psf", cfg);
      meta["coeffs"] = to_json(c);
      meta["radius"] = psf_radius;
      save_image(p.intensity, psf_c.out, meta.dump());
    } else if (*blur) {
      const RunConfig cfg = resolve(blur_c);
      const SeidelCoeffs c = load_coeffs(blur_coeffs);
      const std::vector<Image> ch = blur_in.load();
      const int n = ch.front().rows();
      require(ch.front().is_square(), ErrorKind::kInvalidArgument, "blur needs a square image");
      const PolarGrid grid = cfg.grid.make(n);
      const OpticalConfig optics = cfg.optical_for(grid);
      std::vector<Image> out;
      if (blur_model == "ring") {
        const auto spectra = precompute_ring_spectra(synth_radial_psfs(c, grid, optics), grid);
        for (const Image& img : ch) out.push_back(ring_convolve(img, spectra, grid));
      } else if (blur_model == "lsi") {
        const Psf p = synth_psf(c, 0.0, optics);
        for (const Image& img : ch) out.push_back(lsi_convolve(img, p));
      } else {
        SuperposeOptions so;
        so.center = grid.center();
        for (const Image& img : ch) out.push_back(superpose_blur(img, c, optics, so));
      }
      Json meta = provenance("blur", cfg);
      meta["coeffs"] = to_json(c);
      meta["model"] = blur_model;
      write_tiff(blur_c.out, out, meta.dump());
      if (blur_display) write_display(blur_c.out, out);
    } else if (*deb) {
      const RunConfig cfg = resolve(deb_c);
      const Method method = method_from_string(deb_method);
      require(method != Method::kBlind, ErrorKind::kInvalidArgument,
              "use the 'blind' command for blind deblurring");
      const std::vector<Image> ch = deb_in.load();
      std::optional<SeidelCoeffs> coeffs;
      if (!deb_coeffs.empty()) coeffs = load_coeffs(deb_coeffs);
      std::vector<Image> out;
      std::vector<double> trace;
      const int n = ch.front().rows();
      if (method == Method::kRing || method == Method::kSeidel) {
        require(coeffs.has_value(), ErrorKind::kInvalidArgument,
                std::string("--coeffs is required for --method ") + to_string(method));
      }
      if (method == Method::kRing) {
        require(ch.front().is_square(), ErrorKind::kInvalidArgument,
                "ring deconvolution needs a square image");
        const PolarGrid grid = cfg.grid.make(n);
        const OpticalConfig optics = cfg.optical_for(grid);
        const auto spectra =
            precompute_ring_spectra(synth_radial_psfs(*coeffs, grid, optics), grid);
        for (const Image& img : ch) {
          DeblurResult r = ring_deconvolve(img, spectra, grid, cfg.solver);
          out.push_back(std::move(r.image));
          trace = r.loss_trace;
        }
      } else if (method == Method::kSeidel) {
        OpticalConfig optics = cfg.optical;
        optics.validate();
        for (const Image& img : ch) {
          DeblurResult r = seidel_deconvolve(img, *coeffs, optics, cfg.solver);
          out.push_back(std::move(r.image));
          trace = r.loss_trace;
        }
      } else {
        Psf p;
        if (!deb_psf.empty()) {
          p.intensity = normalize_patch(load_image(deb_psf), deb_psf_threshold);
        } else {
          require(coeffs.has_value(), ErrorKind::kInvalidArgument,
                  "--psf or --coeffs is required for --method " + deb_method);
          p = synth_psf(*coeffs, 0.0, cfg.optical);
        }
        for (const Image& img : ch) {
          DeblurResult r = deconvolve(img, p, method, cfg.solver);
          out.push_back(std::move(r.image));
          trace = r.loss_trace;
        }
      }
      Json meta = provenance("deblur", cfg);
      meta["method"] = to_string(method);
      if (coeffs) meta["coeffs"] = to_json(*coeffs);
      write_tiff(deb_c.out, out, meta.dump());
      const std::string trace_path = with_suffix(deb_c.out, ".trace.csv");
      write_trace(trace_path, trace);
      write_csv_sidecar(trace_path, meta);
      if (deb_display) write_display(deb_c.out, out);
    } else if (*bl) {
      const RunConfig cfg = resolve(bl_c);
      const std::vector<Image> ch = bl_in.load();
      OpticalConfig optics = cfg.optical;
      optics.validate();
      std::vector<Image> out;
      Json results = Json::array();
      for (const Image& img : ch) {
        BlindResult r = blind_deconvolve(img, optics, cfg.solver, cfg.blind);
        Json ev = Json::array();
        for (const auto& [w, s] : r.evaluations) ev.push_back({w, s});
        results.push_back({{"sphere", r.sphere}, {"evaluations", ev}});
        out.push_back(std::move(r.result.image));
        std::cout << "sphere " << r.sphere << '\n';
      }
      Json meta = provenance("blind", cfg);
      meta["channels"] = results;
      write_tiff(bl_c.out, out, Json{{"command", "blind"}, {"sphere", results[0]["sphere"]}}.dump());
      write_json(with_suffix(bl_c.out, ".json"), meta);
      if (bl_display) write_display(bl_c.out, out);
    } else if (*ro) {
      const RunConfig cfg = resolve(ro_c);
      const SeidelCoeffs c = load_coeffs(ro_coeffs);
      const PolarGrid grid = cfg.grid.make(ro_size);
      const OpticalConfig optics = cfg.optical_for(grid);
      const auto metrics = psf_metrics(synth_radial_psfs(c, grid, optics), grid);
      std::ofstream f(ro_c.out, std::ios::trunc);
      require(static_cast<bool>(f), ErrorKind::kIo, "cannot write '" + ro_c.out + "'");
      f << "radius,bandwidth,mix_width\n";
      for (const auto& m : metrics) {
        f << m.source_radius << ',' << m.bandwidth << ',' << m.mix_width << '\n';
      }
      Json meta = provenance("roft", cfg);
      meta["coeffs"] = to_json(c);
      meta["size"] = ro_size;
      write_csv_sidecar(ro_c.out, meta);
      if (!ro_image.empty()) {
        const Image img = load_image(ro_image);
        require(img.rows() == ro_size && img.cols() == ro_size, ErrorKind::kInvalidArgument,
                "--image must be --size x --size");
        const RoftImage spec = roft(img, grid);
        Image mag(spec.num_radii(), spec.num_freqs());
        for (int j = 0; j < spec.num_radii(); ++j) {
          for (int xi = 0; xi < spec.num_freqs(); ++xi) mag(j, xi) = std::abs(spec(j, xi));
        }
        save_image(mag, ro_spectrum.empty() ? with_suffix(ro_c.out, ".roft.tif") : ro_spectrum,
                   meta.dump());
      }
    } else if (*be) {
      const RunConfig cfg = resolve(be_c);
      BenchOptions opt;
      opt.sizes.clear();
      for (double v : parse_list(be_sizes)) opt.sizes.push_back(static_cast<int>(v));
      opt.levels = parse_list(be_levels);
      opt.trials = be_trials;
      opt.seed = cfg.seed;
      opt.oracle_limit = be_oracle;
      opt.grid = cfg.grid;
      const auto records = run_bench(opt);
      write_bench_csv(be_c.out, records);
      write_csv_sidecar(be_c.out, provenance("bench", cfg));
      for (const auto& r : records) {
        std::printf("%-9s n=%-4d level=%.2f time=%.4fs mse=%.3g\n", to_string(r.method), r.n,
                    r.level, r.wall_time, r.mse_vs_oracle);
      }
    } else if (*ds) {
      const RunConfig cfg = resolve(ds_c);
      DatasetOptions opt;
      opt.count = ds_count;
      opt.seed = cfg.seed;
      opt.snr_db = ds_snr ? ds_snr : cfg.noise_snr_db;
      opt.include_zero = ds_zero;
      const Json m = gen_dataset(ds_clean, ds_c.out, cfg, opt);
      if (ds_verify) verify_manifest(ds_c.out);
      std::cout << "wrote " << m["sets"].size() << " coefficient sets to " << ds_c.out << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return is_numerical(e.kind()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
