#include "vac/config.hpp"

#include <boost/crc.hpp>
#include <boost/program_options.hpp>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "vac/errors.hpp"
#include "vac/text.hpp"

namespace vac {

namespace po = boost::program_options;

namespace {

// Every accepted key, in canonical order.
const std::vector<std::string>& all_keys() {
  static const std::vector<std::string> keys = {
      "dataset.source",        "dataset.train",        "dataset.test",         "dataset.suite",
      "dataset.train_size",    "dataset.test_size",    "dataset.height",       "dataset.width",
      "dataset.channels",      "dataset.classes",      "curriculum.variant",   "curriculum.epochs",
      "curriculum.sigma_max",  "curriculum.deficit",   "curriculum.blur_probability",
      "curriculum.blur_sigma", "optimizer.lr",         "optimizer.lr_schedule", "optimizer.milestones",
      "optimizer.gamma",       "optimizer.momentum",   "optimizer.weight_decay", "optimizer.batch_size",
      "optimizer.epochs",      "optimizer.augment",    "optimizer.pad",        "optimizer.flip_probability",
      "model.conv1",           "model.conv2",          "model.hidden",         "seeds.init",
      "seeds.data",            "seeds.blur",           "seeds.subset",         "output.dir",
      "output.threads",        "output.label",
  };
  return keys;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ConfigError("invalid value '" + value + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "yes" || value == "on" || value == "1") return true;
  if (value == "false" || value == "no" || value == "off" || value == "0") return false;
  throw ConfigError("invalid boolean '" + value + "' for " + key);
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  if (text::trim(value).empty()) return out;
  for (const auto& part : text::split(value, ',')) out.push_back(parse_number<int>(key, part));
  return out;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

std::uint64_t crc64(const std::string& s) {
  boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true> crc;
  crc.process_bytes(s.data(), s.size());
  return crc.checksum();
}

void dump_sections(std::ostream& out, const RunConfig& c, bool with_output) {
  using text::format_double;
  out << "[dataset]\n"
      << "source = " << to_string(c.dataset.source) << "\n"
      << "train = " << c.dataset.train.string() << "\n"
      << "test = " << c.dataset.test.string() << "\n"
      << "suite = " << c.dataset.suite.string() << "\n"
      << "train_size = " << c.dataset.train_size << "\n"
      << "test_size = " << c.dataset.test_size << "\n"
      << "height = " << c.dataset.height << "\n"
      << "width = " << c.dataset.width << "\n"
      << "channels = " << c.dataset.channels << "\n"
      << "classes = " << c.dataset.classes << "\n\n";
  out << "[curriculum]\n"
      << "variant = " << to_string(c.curriculum.variant) << "\n"
      << "epochs = " << c.curriculum.epochs << "\n"
      << "sigma_max = " << c.curriculum.sigma_max << "\n"
      << "deficit = " << to_string(c.curriculum.deficit) << "\n"
      << "blur_probability = " << format_double(c.curriculum.blur_probability) << "\n"
      << "blur_sigma = " << format_double(c.curriculum.blur_sigma) << "\n\n";
  out << "[optimizer]\n"
      << "lr = " << format_double(c.optimizer.lr) << "\n"
      << "lr_schedule = " << to_string(c.optimizer.lr_schedule) << "\n"
      << "milestones = ";
  for (std::size_t i = 0; i < c.optimizer.milestones.size(); ++i) out << (i ? "," : "") << c.optimizer.milestones[i];
  out << "\n"
      << "gamma = " << format_double(c.optimizer.gamma) << "\n"
      << "momentum = " << format_double(c.optimizer.momentum) << "\n"
      << "weight_decay = " << format_double(c.optimizer.weight_decay) << "\n"
      << "batch_size = " << c.optimizer.batch_size << "\n"
      << "epochs = " << c.optimizer.epochs << "\n"
      << "augment = " << (c.optimizer.augment ? "true" : "false") << "\n"
      << "pad = " << c.optimizer.pad << "\n"
      << "flip_probability = " << format_double(c.optimizer.flip_probability) << "\n\n";
  out << "[model]\n"
      << "conv1 = " << c.model.conv1 << "\n"
      << "conv2 = " << c.model.conv2 << "\n"
      << "hidden = " << c.model.hidden << "\n\n";
  out << "[seeds]\n"
      << "init = " << c.seeds.init << "\n"
      << "data = " << c.seeds.data << "\n"
      << "blur = " << c.seeds.blur << "\n"
      << "subset = " << c.seeds.subset << "\n";
  if (with_output)
    out << "\n[output]\n"
        << "dir = " << c.output.dir.string() << "\n"
        << "threads = " << c.output.threads << "\n"
        << "label = " << c.output.label << "\n";
}

}  // namespace

std::string_view to_string(DatasetSource source) {
  switch (source) {
    case DatasetSource::kCifar: return "cifar";
    case DatasetSource::kRecords: return "records";
    case DatasetSource::kSynthetic: return "synthetic";
  }
  return "?";
}

DatasetSource parse_dataset_source(std::string_view name) {
  if (name == "cifar") return DatasetSource::kCifar;
  if (name == "records") return DatasetSource::kRecords;
  if (name == "synthetic") return DatasetSource::kSynthetic;
  throw ConfigError("unknown dataset source '" + std::string(name) + "' (cifar, records, synthetic)");
}

std::string_view to_string(nn::LrScheduleKind kind) {
  switch (kind) {
    case nn::LrScheduleKind::kConstant: return "constant";
    case nn::LrScheduleKind::kCosine: return "cosine";
    case nn::LrScheduleKind::kStep: return "step";
  }
  return "?";
}

nn::LrScheduleKind parse_lr_schedule(std::string_view name) {
  if (name == "constant") return nn::LrScheduleKind::kConstant;
  if (name == "cosine") return nn::LrScheduleKind::kCosine;
  if (name == "step") return nn::LrScheduleKind::kStep;
  throw ConfigError("unknown lr_schedule '" + std::string(name) + "' (constant, cosine, step)");
}

void RunConfig::validate() const {
  const auto& d = dataset;
  if (d.source != DatasetSource::kSynthetic) {
    require(!d.train.empty(), "dataset.train is required for source " + std::string(to_string(d.source)));
    require(!d.test.empty(), "dataset.test is required for source " + std::string(to_string(d.source)));
  } else {
    require(d.train_size > 0 && d.test_size > 0, "synthetic datasets need train_size and test_size");
    require(d.height > 0 && d.width > 0, "dataset.height and dataset.width must be positive");
    require(d.channels == 1 || d.channels == 3, "dataset.channels must be 1 or 3");
    require(d.classes >= 2 && d.classes <= 256, "dataset.classes must be in 2..256");
  }

  const auto& c = curriculum;
  require(c.epochs >= 1, "curriculum.epochs must be >= 1");
  require(c.blur_probability >= 0 && c.blur_probability <= 1, "curriculum.blur_probability must be in [0, 1]");
  require(c.blur_sigma >= 0, "curriculum.blur_sigma must be >= 0");
  make_curriculum();

  const auto& o = optimizer;
  require(o.epochs == c.epochs, "optimizer.epochs (" + std::to_string(o.epochs) +
                                    ") must equal curriculum.epochs (" + std::to_string(c.epochs) + ")");
  require(o.lr > 0, "optimizer.lr must be positive");
  require(o.momentum >= 0 && o.momentum < 1, "optimizer.momentum must be in [0, 1)");
  require(o.weight_decay >= 0, "optimizer.weight_decay must be >= 0");
  require(o.batch_size >= 1, "optimizer.batch_size must be >= 1");
  require(o.pad >= 0, "optimizer.pad must be >= 0");
  require(o.flip_probability >= 0 && o.flip_probability <= 1, "optimizer.flip_probability must be in [0, 1]");
  require(o.gamma > 0, "optimizer.gamma must be positive");
  for (std::size_t i = 0; i < o.milestones.size(); ++i) {
    require(o.milestones[i] > 0 && o.milestones[i] < o.epochs, "optimizer.milestones must lie inside (0, epochs)");
    require(i == 0 || o.milestones[i] > o.milestones[i - 1], "optimizer.milestones must increase");
  }
  require(o.lr_schedule != nn::LrScheduleKind::kStep || !o.milestones.empty(),
          "lr_schedule = step needs optimizer.milestones");

  require(model.conv1 > 0 && model.conv2 > 0 && model.hidden > 0, "model widths must be positive");
}

VariantParams RunConfig::variant_params() const {
  VariantParams p;
  p.sigma_max = curriculum.sigma_max;
  p.deficit = curriculum.deficit;
  p.blur_probability = curriculum.blur_probability;
  p.blur_sigma = curriculum.blur_sigma;
  return p;
}

Curriculum RunConfig::make_curriculum() const {
  return make_variant(curriculum.variant, curriculum.epochs, variant_params());
}

nn::LrSchedule RunConfig::lr_schedule() const {
  nn::LrSchedule s;
  s.kind = optimizer.lr_schedule;
  s.base = optimizer.lr;
  s.total_epochs = optimizer.epochs;
  s.milestones = optimizer.milestones;
  s.gamma = optimizer.gamma;
  return s;
}

nn::Architecture RunConfig::architecture() const {
  nn::Architecture a;
  a.conv1 = model.conv1;
  a.conv2 = model.conv2;
  a.hidden = model.hidden;
  if (dataset.source == DatasetSource::kSynthetic) {
    a.in_channels = dataset.channels;
    a.height = dataset.height;
    a.width = dataset.width;
    a.classes = dataset.classes;
  }
  return a;
}

std::string RunConfig::label() const {
  return output.label.empty() ? std::string(to_string(curriculum.variant)) : output.label;
}

RunConfig parse_config(const std::string& text) {
  po::options_description desc;
  for (const auto& key : all_keys()) desc.add_options()(key.c_str(), po::value<std::string>());

  po::variables_map vm;
  try {
    std::istringstream in(text);
    po::store(po::parse_config_file(in, desc, false), vm);
  } catch (const po::error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  std::map<std::string, std::string> kv;
  for (const auto& [key, value] : vm) kv[key] = std::string(text::trim(value.as<std::string>()));
  auto has = [&](const char* key) { return kv.count(key) != 0; };
  auto str = [&](const char* key) -> const std::string& { return kv.at(key); };

  RunConfig c;
  auto& d = c.dataset;
  if (has("dataset.source")) d.source = parse_dataset_source(str("dataset.source"));
  if (has("dataset.train")) d.train = str("dataset.train");
  if (has("dataset.test")) d.test = str("dataset.test");
  if (has("dataset.suite")) d.suite = str("dataset.suite");
  if (has("dataset.train_size")) d.train_size = parse_number<std::size_t>("dataset.train_size", str("dataset.train_size"));
  if (has("dataset.test_size")) d.test_size = parse_number<std::size_t>("dataset.test_size", str("dataset.test_size"));
  if (has("dataset.height")) d.height = parse_number<int>("dataset.height", str("dataset.height"));
  if (has("dataset.width")) d.width = parse_number<int>("dataset.width", str("dataset.width"));
  if (has("dataset.channels")) d.channels = parse_number<int>("dataset.channels", str("dataset.channels"));
  if (has("dataset.classes")) d.classes = parse_number<int>("dataset.classes", str("dataset.classes"));

  auto& cu = c.curriculum;
  if (has("curriculum.variant")) cu.variant = parse_variant_kind(str("curriculum.variant"));
  if (has("curriculum.epochs")) cu.epochs = parse_number<int>("curriculum.epochs", str("curriculum.epochs"));
  if (has("curriculum.sigma_max")) cu.sigma_max = parse_number<int>("curriculum.sigma_max", str("curriculum.sigma_max"));
  if (has("curriculum.deficit")) cu.deficit = parse_fraction(str("curriculum.deficit"));
  if (has("curriculum.blur_probability"))
    cu.blur_probability = parse_number<double>("curriculum.blur_probability", str("curriculum.blur_probability"));
  if (has("curriculum.blur_sigma"))
    cu.blur_sigma = parse_number<double>("curriculum.blur_sigma", str("curriculum.blur_sigma"));

  auto& o = c.optimizer;
  if (has("optimizer.lr")) o.lr = parse_number<double>("optimizer.lr", str("optimizer.lr"));
  if (has("optimizer.lr_schedule")) o.lr_schedule = parse_lr_schedule(str("optimizer.lr_schedule"));
  if (has("optimizer.milestones")) o.milestones = parse_int_list("optimizer.milestones", str("optimizer.milestones"));
  if (has("optimizer.gamma")) o.gamma = parse_number<double>("optimizer.gamma", str("optimizer.gamma"));
  if (has("optimizer.momentum")) o.momentum = parse_number<double>("optimizer.momentum", str("optimizer.momentum"));
  if (has("optimizer.weight_decay"))
    o.weight_decay = parse_number<double>("optimizer.weight_decay", str("optimizer.weight_decay"));
  if (has("optimizer.batch_size")) o.batch_size = parse_number<int>("optimizer.batch_size", str("optimizer.batch_size"));
  if (has("optimizer.epochs")) o.epochs = parse_number<int>("optimizer.epochs", str("optimizer.epochs"));
  if (has("optimizer.augment")) o.augment = parse_bool("optimizer.augment", str("optimizer.augment"));
  if (has("optimizer.pad")) o.pad = parse_number<int>("optimizer.pad", str("optimizer.pad"));
  if (has("optimizer.flip_probability"))
    o.flip_probability = parse_number<double>("optimizer.flip_probability", str("optimizer.flip_probability"));

  if (has("model.conv1")) c.model.conv1 = parse_number<int>("model.conv1", str("model.conv1"));
  if (has("model.conv2")) c.model.conv2 = parse_number<int>("model.conv2", str("model.conv2"));
  if (has("model.hidden")) c.model.hidden = parse_number<int>("model.hidden", str("model.hidden"));

  for (const char* key : {"seeds.init", "seeds.data", "seeds.blur", "seeds.subset"})
    require(has(key), std::string(key) + " is required: every seed must be explicit");
  c.seeds.init = parse_number<std::uint64_t>("seeds.init", str("seeds.init"));
  c.seeds.data = parse_number<std::uint64_t>("seeds.data", str("seeds.data"));
  c.seeds.blur = parse_number<std::uint64_t>("seeds.blur", str("seeds.blur"));
  c.seeds.subset = parse_number<std::uint64_t>("seeds.subset", str("seeds.subset"));

  if (has("output.dir")) c.output.dir = str("output.dir");
  if (has("output.threads")) c.output.threads = parse_number<unsigned>("output.threads", str("output.threads"));
  if (has("output.label")) c.output.label = str("output.label");

  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string dump_config(const RunConfig& config) {
  std::ostringstream out;
  dump_sections(out, config, true);
  return out.str();
}

std::uint64_t config_digest(const RunConfig& config) {
  std::ostringstream out;
  dump_sections(out, config, false);
  return crc64(out.str());
}

void apply_output_override(RunConfig& config) {
  const char* root = std::getenv(kOutputRootEnv);
  if (root == nullptr || *root == '\0') return;
  const auto& dir = config.output.dir;
  config.output.dir = std::filesystem::path(root) / (dir.is_absolute() ? dir.filename() : dir);
}

}  // namespace vac
