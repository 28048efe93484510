#pragma once

// Run configuration. On disk it is an INI-style file:
//
//   [dataset]     source, train, test, suite, train_size, test_size
//   [curriculum]  variant, epochs, sigma_max, deficit, blur_probability, blur_sigma
//   [optimizer]   lr, lr_schedule, milestones, gamma, momentum, weight_decay,
//                 batch_size, epochs, augment, pad, flip_probability
//   [model]       conv1, conv2, hidden
//   [seeds]       init, data, blur, subset        (all four required)
//   [output]      dir, threads, label
//
// Unknown keys, repeated keys and malformed values are ConfigErrors. See
// README.md for the meaning of every key.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vac/curriculum.hpp"
#include "vac/data.hpp"
#include "vac/nn.hpp"

namespace vac {

enum class DatasetSource {
  kCifar,      // train/test are directories holding the official batch files
  kRecords,    // train/test are record files with .meta sidecars
  kSynthetic,  // generated in memory from seeds.subset
};

struct DatasetSection {
  DatasetSource source = DatasetSource::kCifar;
  std::filesystem::path train;
  std::filesystem::path test;
  std::filesystem::path suite;  // corrupted suite root; empty skips corruption eval
  std::size_t train_size = 0;   // stratified subset size, 0 keeps everything
  std::size_t test_size = 0;
  // Synthetic geometry.
  int height = 32;
  int width = 32;
  int channels = 3;
  int classes = 10;

  friend bool operator==(const DatasetSection&, const DatasetSection&) = default;
};

struct CurriculumSection {
  VariantKind variant = VariantKind::kVac;
  int epochs = 50;
  int sigma_max = 2;
  DeficitFraction deficit{};
  double blur_probability = 1.0;
  double blur_sigma = 2.0;

  friend bool operator==(const CurriculumSection&, const CurriculumSection&) = default;
};

struct OptimizerSection {
  double lr = 0.05;
  nn::LrScheduleKind lr_schedule = nn::LrScheduleKind::kCosine;
  std::vector<int> milestones;
  double gamma = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 128;
  int epochs = 50;
  bool augment = true;
  int pad = 4;
  double flip_probability = 0.5;

  friend bool operator==(const OptimizerSection&, const OptimizerSection&) = default;
};

struct ModelSection {
  int conv1 = 32;
  int conv2 = 64;
  int hidden = 128;

  friend bool operator==(const ModelSection&, const ModelSection&) = default;
};

struct SeedSection {
  std::uint64_t init = 0;
  std::uint64_t data = 0;
  std::uint64_t blur = 0;
  std::uint64_t subset = 0;

  friend bool operator==(const SeedSection&, const SeedSection&) = default;
};

struct OutputSection {
  std::filesystem::path dir = "runs/default";
  unsigned threads = 1;
  std::string label;  // defaults to the variant name

  friend bool operator==(const OutputSection&, const OutputSection&) = default;
};

struct RunConfig {
  DatasetSection dataset;
  CurriculumSection curriculum;
  OptimizerSection optimizer;
  ModelSection model;
  SeedSection seeds;
  OutputSection output;

  /// Throws ConfigError (including curriculum/optimizer epoch mismatch).
  void validate() const;

  VariantParams variant_params() const;
  Curriculum make_curriculum() const;
  nn::LrSchedule lr_schedule() const;
  nn::Architecture architecture() const;
  std::string label() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string_view to_string(DatasetSource source);
DatasetSource parse_dataset_source(std::string_view name);
std::string_view to_string(nn::LrScheduleKind kind);
nn::LrScheduleKind parse_lr_schedule(std::string_view name);

/// Parses and validates. Every [seeds] key must be present.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical form: every key, fixed order; parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& config);

/// CRC-64 of the canonical form without the [output] section, so the same
/// experiment written to a different directory keeps its digest.
std::uint64_t config_digest(const RunConfig& config);

/// Name of the environment variable that overrides output.dir.
inline constexpr const char* kOutputRootEnv = "VAC_OUTPUT_ROOT";

/// If VAC_OUTPUT_ROOT is set, output.dir is re-rooted beneath it (relative
/// dirs are appended, absolute ones keep only their final component).
void apply_output_override(RunConfig& config);

}  // namespace vac
