#pragma once

// Datasets in the CIFAR-10 binary record layout: one label byte followed by
// H*W*C pixel bytes, planar R, G, B, row-major. Official CIFAR-10 batch files
// load unmodified; corrupted suites and synthetic fixtures use the same
// layout plus a plain-text "<file>.meta" sidecar.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vac/curriculum.hpp"
#include "vac/imaging.hpp"

namespace vac {

struct DatasetMeta {
  int height = 32;
  int width = 32;
  int channels = 3;
  int classes = 10;
  std::string split = "train";
  std::uint32_t checksum = 0;  // CRC-32 of the encoded records

  std::size_t record_length() const noexcept {
    return 1 + static_cast<std::size_t>(height) * width * channels;
  }
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Image> images;
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  /// Throws ConfigError when labels or image shapes break the metadata.
  void validate() const;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

std::uint8_t quantize(float v) noexcept;

std::vector<std::uint8_t> encode_records(const Dataset& dataset);
/// Throws IoError on truncated input and ConfigError on out-of-range labels.
Dataset decode_records(std::span<const std::uint8_t> bytes, DatasetMeta meta);

Dataset load_records(const std::filesystem::path& path, const DatasetMeta& meta);
/// Concatenates several record files (e.g. the five CIFAR-10 train batches).
Dataset load_records(const std::vector<std::filesystem::path>& paths, const DatasetMeta& meta);

/// Writes the records and a "<path>.meta" sidecar. Returns the checksum.
std::uint32_t save_records(const std::filesystem::path& path, const Dataset& dataset);

std::filesystem::path sidecar_path(const std::filesystem::path& records);
void write_metadata(const std::filesystem::path& path, const DatasetMeta& meta);
DatasetMeta read_metadata(const std::filesystem::path& path);

/// Loads records using the sidecar when present, otherwise `fallback`.
Dataset load_dataset(const std::filesystem::path& path, const DatasetMeta& fallback = {});

std::vector<std::size_t> label_histogram(const Dataset& dataset);

/// Class-stratified subset of n records (equal quota per class, remainder to
/// the lowest class ids), ascending index order. Falls back to a uniform
/// sample with a warning on stderr when a class cannot fill its quota.
Dataset subset(const Dataset& dataset, std::size_t n, std::uint64_t seed);

/// Procedural labelled images: each class is a distinct oriented grating and
/// blob layout with per-image jitter and texture. Used for fixtures and smoke
/// runs when no real dataset is at hand.
Dataset make_synthetic_dataset(std::size_t n, int classes, int height, int width, int channels,
                               std::uint64_t seed, const std::string& split = "synthetic");

// ---------------------------------------------------------------------------
// Epoch iteration

struct AugmentOptions {
  bool enabled = true;
  int pad = 4;
  double flip_probability = 0.5;
};

/// Pad-with-zeros random crop then horizontal flip.
Image augment(const Image& image, const AugmentOptions& options, Rng& rng);

struct BatchPlan {
  std::uint64_t epoch_seed = 0;
  std::vector<std::size_t> permutation;
  int batch_size = 128;
  AugmentOptions augment;
};

/// Shuffle determined by (data_seed, epoch) only.
BatchPlan make_batch_plan(std::size_t dataset_size, std::uint64_t data_seed, int epoch, int batch_size,
                          const AugmentOptions& augment);

struct Batch {
  std::vector<Image> images;
  std::vector<std::uint8_t> labels;
  std::vector<double> sigmas;
  std::vector<std::size_t> indices;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Per image: draw sigma from the policy (own RNG stream keyed by blur seed,
/// epoch and record index), blur, then augment (stream keyed by the epoch
/// seed and record index). Toggling augmentation never changes blur draws.
class EpochIterator {
 public:
  EpochIterator(const Dataset& dataset, BatchPlan plan, const BlurPolicy& policy, int epoch,
                std::uint64_t blur_seed);

  std::optional<Batch> next();
  std::size_t batches() const noexcept;

 private:
  const Dataset& dataset_;
  BatchPlan plan_;
  const BlurPolicy& policy_;
  int epoch_;
  std::uint64_t blur_seed_;
  std::size_t cursor_ = 0;
};

}  // namespace vac
