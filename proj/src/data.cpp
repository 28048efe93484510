#include "vac/data.hpp"

#include <algorithm>
#include <boost/crc.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "vac/errors.hpp"

namespace vac {

void Dataset::validate() const {
  if (labels.empty()) throw ConfigError("dataset '" + meta.split + "' is empty");
  if (images.size() != labels.size()) throw ConfigError("dataset image/label count mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= meta.classes)
      throw ConfigError("record " + std::to_string(i) + " has label " + std::to_string(labels[i]) + " >= " +
                        std::to_string(meta.classes) + " classes");
    const Image& im = images[i];
    if (im.height() != meta.height || im.width() != meta.width || im.channels() != meta.channels)
      throw ConfigError("record " + std::to_string(i) + " has the wrong image shape");
  }
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::uint8_t quantize(float v) noexcept {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

std::vector<std::uint8_t> encode_records(const Dataset& dataset) {
  const std::size_t rec = dataset.meta.record_length();
  std::vector<std::uint8_t> out(rec * dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    std::uint8_t* dst = out.data() + i * rec;
    dst[0] = dataset.labels[i];
    const auto px = dataset.images[i].data();
    std::transform(px.begin(), px.end(), dst + 1, quantize);
  }
  return out;
}

Dataset decode_records(std::span<const std::uint8_t> bytes, DatasetMeta meta) {
  const std::size_t rec = meta.record_length();
  if (bytes.empty() || bytes.size() % rec != 0) {
    throw IoError("record data of " + std::to_string(bytes.size()) + " bytes is not a whole number of " +
                  std::to_string(rec) + "-byte records");
  }
  const std::size_t n = bytes.size() / rec;
  Dataset ds;
  ds.meta = meta;
  ds.meta.checksum = crc32(bytes);
  ds.images.reserve(n);
  ds.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* src = bytes.data() + i * rec;
    if (src[0] >= meta.classes)
      throw ConfigError("record " + std::to_string(i) + " has label " + std::to_string(src[0]) + " >= " +
                        std::to_string(meta.classes) + " classes");
    ds.labels.push_back(src[0]);
    Image im(meta.height, meta.width, meta.channels);
    auto px = im.data();
    for (std::size_t j = 0; j < px.size(); ++j) px[j] = static_cast<float>(src[1 + j]) / 255.0f;
    ds.images.push_back(std::move(im));
  }
  return ds;
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto len = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(len);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(len));
  if (!in) throw IoError("short read on " + path.string());
  return bytes;
}

}  // namespace

Dataset load_records(const std::filesystem::path& path, const DatasetMeta& meta) {
  const auto bytes = read_file(path);
  try {
    return decode_records(bytes, meta);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

Dataset load_records(const std::vector<std::filesystem::path>& paths, const DatasetMeta& meta) {
  if (paths.empty()) throw ConfigError("no record files given");
  std::vector<std::uint8_t> all;
  for (const auto& p : paths) {
    const auto bytes = read_file(p);
    if (bytes.size() % meta.record_length() != 0)
      throw IoError(p.string() + ": truncated record file (" + std::to_string(bytes.size()) + " bytes)");
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  return decode_records(all, meta);
}

std::filesystem::path sidecar_path(const std::filesystem::path& records) {
  auto p = records;
  p += ".meta";
  return p;
}

void write_metadata(const std::filesystem::path& path, const DatasetMeta& meta) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "height = " << meta.height << "\n"
      << "width = " << meta.width << "\n"
      << "channels = " << meta.channels << "\n"
      << "classes = " << meta.classes << "\n"
      << "split = " << meta.split << "\n"
      << "checksum = " << meta.checksum << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

DatasetMeta read_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  DatasetMeta meta;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path.string() + ": malformed line '" + line + "'");
    auto strip = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    try {
      if (key == "height") meta.height = std::stoi(value);
      else if (key == "width") meta.width = std::stoi(value);
      else if (key == "channels") meta.channels = std::stoi(value);
      else if (key == "classes") meta.classes = std::stoi(value);
      else if (key == "split") meta.split = value;
      else if (key == "checksum") meta.checksum = static_cast<std::uint32_t>(std::stoul(value));
      else throw ConfigError(path.string() + ": unknown key '" + key + "'");
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ConfigError*>(&e)) throw;
      throw ConfigError(path.string() + ": bad value for '" + key + "'");
    }
  }
  return meta;
}

std::uint32_t save_records(const std::filesystem::path& path, const Dataset& dataset) {
  const auto bytes = encode_records(dataset);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
  DatasetMeta meta = dataset.meta;
  meta.checksum = crc32(bytes);
  write_metadata(sidecar_path(path), meta);
  return meta.checksum;
}

Dataset load_dataset(const std::filesystem::path& path, const DatasetMeta& fallback) {
  const auto side = sidecar_path(path);
  DatasetMeta meta = std::filesystem::exists(side) ? read_metadata(side) : fallback;
  const std::uint32_t expected = meta.checksum;
  Dataset ds = load_records(path, meta);
  if (std::filesystem::exists(side) && expected != 0 && expected != ds.meta.checksum)
    throw IoError(path.string() + ": checksum mismatch against sidecar");
  return ds;
}

std::vector<std::size_t> label_histogram(const Dataset& dataset) {
  std::vector<std::size_t> hist(static_cast<std::size_t>(dataset.meta.classes), 0);
  for (auto l : dataset.labels) ++hist.at(l);
  return hist;
}

Dataset subset(const Dataset& dataset, std::size_t n, std::uint64_t seed) {
  if (n > dataset.size())
    throw ConfigError("subset of " + std::to_string(n) + " from " + std::to_string(dataset.size()) + " records");
  Rng rng = make_rng({seed, static_cast<std::uint64_t>(Stream::kSubset)});

  const auto classes = static_cast<std::size_t>(dataset.meta.classes);
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.labels[i]].push_back(i);

  auto partial_shuffle = [&rng](std::vector<std::size_t>& v, std::size_t k) {
    for (std::size_t i = 0; i < k; ++i) std::swap(v[i], v[i + uniform_index(rng, v.size() - i)]);
  };

  std::vector<std::size_t> chosen;
  bool stratified = true;
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t quota = n / classes + (c < n % classes ? 1 : 0);
    if (quota > by_class[c].size()) stratified = false;
  }
  if (stratified) {
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t quota = n / classes + (c < n % classes ? 1 : 0);
      partial_shuffle(by_class[c], quota);
      chosen.insert(chosen.end(), by_class[c].begin(), by_class[c].begin() + static_cast<std::ptrdiff_t>(quota));
    }
  } else {
    std::clog << "warning: subset of " << n << " cannot be class-stratified; sampling uniformly\n";
    std::vector<std::size_t> all(dataset.size());
    std::iota(all.begin(), all.end(), 0);
    partial_shuffle(all, n);
    chosen.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
  }
  std::sort(chosen.begin(), chosen.end());

  Dataset out;
  out.meta = dataset.meta;
  out.meta.checksum = 0;
  for (std::size_t i : chosen) {
    out.images.push_back(dataset.images[i]);
    out.labels.push_back(dataset.labels[i]);
  }
  return out;
}

Dataset make_synthetic_dataset(std::size_t n, int classes, int height, int width, int channels,
                               std::uint64_t seed, const std::string& split) {
  if (n == 0 || classes < 2) throw ConfigError("synthetic dataset needs n > 0 and >= 2 classes");
  Dataset ds;
  ds.meta = {height, width, channels, classes, split, 0};
  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(classes));
    Rng rng = make_rng({seed, static_cast<std::uint64_t>(Stream::kSynthetic), i});
    // Class identity: grating orientation + frequency and the blob quadrant.
    const double theta = pi * label / classes + 0.15 * (uniform01(rng) - 0.5);
    const double freq = (2.0 + (label % 3)) / height * 2.0 * pi;
    const double phase = 2.0 * pi * uniform01(rng);
    const double by = height * (0.3 + 0.4 * ((label / 2) % 2)) + 2.0 * standard_normal(rng);
    const double bx = width * (0.3 + 0.4 * (label % 2)) + 2.0 * standard_normal(rng);
    const double radius = 0.18 * std::min(height, width) * (0.8 + 0.4 * uniform01(rng));
    const double contrast = 0.25 + 0.15 * uniform01(rng);
    const double base = 0.35 + 0.3 * uniform01(rng);
    Image im(height, width, channels);
    for (int c = 0; c < channels; ++c) {
      const double tint = 0.8 + 0.4 * std::sin(2.0 * pi * (label + 1) * (c + 1) / (classes + 1.0));
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const double u = std::cos(theta) * x + std::sin(theta) * y;
          const double grating = contrast * std::sin(freq * u + phase);
          const double d2 = (y - by) * (y - by) + (x - bx) * (x - bx);
          const double blob = 0.3 * std::exp(-d2 / (2.0 * radius * radius));
          const double texture = 0.06 * standard_normal(rng);
          im.at(c, y, x) = static_cast<float>(std::clamp(tint * (base + grating) * 0.8 + blob + texture, 0.0, 1.0));
        }
      }
    }
    // Round through bytes so the in-memory set equals its persisted form.
    for (float& v : im.data()) v = static_cast<float>(quantize(v)) / 255.0f;
    ds.images.push_back(std::move(im));
    ds.labels.push_back(static_cast<std::uint8_t>(label));
  }
  return ds;
}

// ---------------------------------------------------------------------------

Image augment(const Image& image, const AugmentOptions& options, Rng& rng) {
  if (!options.enabled) return image;
  const int h = image.height(), w = image.width(), pad = options.pad;
  const int oy = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(2 * pad + 1))) - pad;
  const int ox = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(2 * pad + 1))) - pad;
  const bool flip = bernoulli(rng, options.flip_probability);
  Image out(h, w, image.channels(), 0.0f);
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      const int sy = y + oy;
      if (sy < 0 || sy >= h) continue;
      for (int x = 0; x < w; ++x) {
        const int sx = (flip ? w - 1 - x : x) + ox;
        if (sx < 0 || sx >= w) continue;
        out.at(c, y, x) = image.at(c, sy, sx);
      }
    }
  }
  return out;
}

BatchPlan make_batch_plan(std::size_t dataset_size, std::uint64_t data_seed, int epoch, int batch_size,
                          const AugmentOptions& augment) {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  BatchPlan plan;
  plan.epoch_seed = derive_seed({data_seed, static_cast<std::uint64_t>(epoch)});
  plan.batch_size = batch_size;
  plan.augment = augment;
  plan.permutation.resize(dataset_size);
  std::iota(plan.permutation.begin(), plan.permutation.end(), 0);
  Rng rng = make_rng({plan.epoch_seed, static_cast<std::uint64_t>(Stream::kShuffle)});
  for (std::size_t i = dataset_size; i > 1; --i) std::swap(plan.permutation[i - 1], plan.permutation[uniform_index(rng, i)]);
  return plan;
}

EpochIterator::EpochIterator(const Dataset& dataset, BatchPlan plan, const BlurPolicy& policy, int epoch,
                             std::uint64_t blur_seed)
    : dataset_(dataset), plan_(std::move(plan)), policy_(policy), epoch_(epoch), blur_seed_(blur_seed) {
  if (plan_.permutation.size() != dataset.size()) throw ConfigError("batch plan does not match dataset size");
}

std::size_t EpochIterator::batches() const noexcept {
  const auto b = static_cast<std::size_t>(plan_.batch_size);
  return (plan_.permutation.size() + b - 1) / b;
}

std::optional<Batch> EpochIterator::next() {
  if (cursor_ >= plan_.permutation.size()) return std::nullopt;
  const std::size_t end = std::min(plan_.permutation.size(), cursor_ + static_cast<std::size_t>(plan_.batch_size));
  Batch batch;
  for (; cursor_ < end; ++cursor_) {
    const std::size_t idx = plan_.permutation[cursor_];
    Rng blur_rng = make_rng({blur_seed_, static_cast<std::uint64_t>(Stream::kBlur), static_cast<std::uint64_t>(epoch_), idx});
    const double sigma = policy_.sample(epoch_, blur_rng);
    Image x = gaussian_blur(dataset_.images[idx], sigma);
    if (plan_.augment.enabled) {
      Rng aug_rng = make_rng({plan_.epoch_seed, static_cast<std::uint64_t>(Stream::kAugment), idx});
      x = augment(x, plan_.augment, aug_rng);
    }
    batch.images.push_back(std::move(x));
    batch.labels.push_back(dataset_.labels[idx]);
    batch.sigmas.push_back(sigma);
    batch.indices.push_back(idx);
  }
  return batch;
}

}  // namespace vac
