#pragma once

// Common-corruption generator: 14 kinds x 5 severities in the four families
// noise, blur, weather and digital. Gaussian blur is deliberately absent
// (it is the training-time operator), and frost is not implemented because
// it needs external texture photographs.
//
// Every corruption is a pure function of (pixels, kind, severity, seed,
// image index): the per-image RNG stream is derived from exactly those values,
// so suites can be generated in any order or in parallel.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vac/data.hpp"
#include "vac/imaging.hpp"
#include "vac/random.hpp"

namespace vac {

enum class CorruptionKind {
  kGaussianNoise,
  kShotNoise,
  kImpulseNoise,
  kDefocusBlur,
  kGlassBlur,
  kMotionBlur,
  kZoomBlur,
  kSnow,
  kFog,
  kBrightness,
  kContrast,
  kElasticTransform,
  kPixelate,
  kJpegApprox,
};

inline constexpr std::array<CorruptionKind, 14> kAllCorruptions = {
    CorruptionKind::kGaussianNoise, CorruptionKind::kShotNoise,  CorruptionKind::kImpulseNoise,
    CorruptionKind::kDefocusBlur,   CorruptionKind::kGlassBlur,  CorruptionKind::kMotionBlur,
    CorruptionKind::kZoomBlur,      CorruptionKind::kSnow,       CorruptionKind::kFog,
    CorruptionKind::kBrightness,    CorruptionKind::kContrast,   CorruptionKind::kElasticTransform,
    CorruptionKind::kPixelate,      CorruptionKind::kJpegApprox,
};

enum class CorruptionFamily { kNoise, kBlur, kWeather, kDigital };

std::string_view to_string(CorruptionKind kind);
std::string_view to_string(CorruptionFamily family);
/// Throws ConfigError for unknown names (including "gaussian_blur").
CorruptionKind parse_corruption_kind(std::string_view name);
CorruptionFamily family_of(CorruptionKind kind);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::kGaussianNoise;
  int severity = 1;  // 1..5
  std::uint64_t seed = 0;
};

struct ParamInfo {
  std::string name;
  int direction;  // +1: larger is stronger, -1: smaller is stronger
};

/// Per-kind parameter tuples for severities 1..5. Parameter meaning per kind:
///   gaussian_noise    std
///   shot_noise        photons per unit intensity
///   impulse_noise     fraction of pixels replaced
///   defocus_blur      disk radius (px)
///   glass_blur        max swap distance (px), iterations
///   motion_blur       line half-length (px)
///   zoom_blur         max zoom factor (zooms 1, 1.01, ... averaged)
///   snow              speckle mean, speckle std, threshold, streak half-length, lift
///   fog               haze amount, fractal roughness decay
///   brightness        additive shift
///   contrast          factor about the image mean
///   elastic_transform displacement rms (px), field smoothing sigma (px)
///   pixelate          downscale factor
///   jpeg_approx       quality (1..100) for the quantization table
class SeverityTable {
 public:
  /// Artifact-owned defaults for 32x32 inputs.
  static SeverityTable defaults();

  const std::vector<double>& params(CorruptionKind kind, int severity) const;
  void set(CorruptionKind kind, int severity, std::vector<double> params);
  static const std::vector<ParamInfo>& param_info(CorruptionKind kind);

  /// Throws ConfigError unless every parameter moves monotonically in its
  /// distortion direction and each step changes at least one parameter.
  void validate() const;
  std::string describe(CorruptionKind kind, int severity) const;

 private:
  std::map<CorruptionKind, std::array<std::vector<double>, 5>> rows_;
};

/// Throws ConfigError for severities outside 1..5.
Image apply_corruption(const Image& image, const CorruptionSpec& spec, std::uint64_t image_index,
                       const SeverityTable& table = SeverityTable::defaults());

// Kernels, exposed for inspection.
Kernel2d disk_kernel(double radius);
Kernel2d line_kernel(double half_length, double angle_radians);
/// Diamond-square fractal on a size x size torus (size a power of two),
/// normalized to [0, 1].
std::vector<double> plasma_fractal(int size, double decay, Rng& rng);

// ---------------------------------------------------------------------------
// Persisted suites: <root>/<kind>/<severity>/data.bin (+ .meta sidecar) and
// <root>/manifest.txt.

struct SuiteManifest {
  std::uint64_t seed = 0;
  std::size_t records = 0;
  std::uint32_t source_checksum = 0;
  std::uint32_t label_checksum = 0;
  std::vector<CorruptionKind> kinds;
  std::vector<int> severities;
  std::map<std::pair<CorruptionKind, int>, std::uint32_t> set_checksums;
  std::map<std::pair<CorruptionKind, int>, std::string> parameters;
  std::uint32_t suite_checksum = 0;
};

std::filesystem::path suite_set_path(const std::filesystem::path& root, CorruptionKind kind, int severity);

struct GenerateOptions {
  bool overwrite = false;
  unsigned threads = 0;  // 0: hardware concurrency
  SeverityTable table = SeverityTable::defaults();
};

/// Throws IoError if <root>/manifest.txt exists and overwrite is off.
SuiteManifest generate_corrupted_dataset(const Dataset& dataset, const std::vector<CorruptionKind>& kinds,
                                         const std::vector<int>& severities, std::uint64_t seed,
                                         const std::filesystem::path& root, const GenerateOptions& options = {});

SuiteManifest read_manifest(const std::filesystem::path& root);
void write_manifest(const std::filesystem::path& root, const SuiteManifest& manifest);

// ---------------------------------------------------------------------------

struct CalibrationReport {
  std::vector<CorruptionKind> kinds;
  std::map<CorruptionKind, std::array<double, 5>> mean_psnr;
};

/// Mean PSNR per (kind, severity) over the sample images.
CalibrationReport measure_severity_psnr(const std::vector<CorruptionKind>& kinds, std::span<const Image> samples,
                                        const SeverityTable& table = SeverityTable::defaults(),
                                        std::uint64_t seed = 0, unsigned threads = 0);

/// Throws CalibrationError naming the first kind whose mean PSNR does not
/// strictly decrease from severity 1 to 5.
void check_calibration(const CalibrationReport& report);

/// measure + check. Needs at least 100 samples (ConfigError otherwise).
CalibrationReport severity_calibration_report(const std::vector<CorruptionKind>& kinds,
                                              std::span<const Image> samples,
                                              const SeverityTable& table = SeverityTable::defaults(),
                                              std::uint64_t seed = 0, unsigned threads = 0);

}  // namespace vac
