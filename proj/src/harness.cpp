#include "vac/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "vac/parallel.hpp"
#include "vac/text.hpp"

namespace vac {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string hex(std::uint64_t v, int width) {
  std::ostringstream s;
  s << std::hex << std::setw(width) << std::setfill('0') << v;
  return s.str();
}

std::uint64_t parse_hex(const std::string& s, const std::string& where) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw IoError(where + ": bad hex value '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw IoError(where + ": bad number '" + s + "'");
  return v;
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

std::string cell_name(const CellKey& k) { return std::string(to_string(k.first)) + "/" + std::to_string(k.second); }

}  // namespace

// ---------------------------------------------------------------------------

Dataset load_cifar(const std::filesystem::path& dir, bool train) {
  DatasetMeta meta;
  meta.split = train ? "train" : "test";
  if (std::filesystem::is_regular_file(dir)) return load_records(dir, meta);
  std::vector<std::filesystem::path> files;
  if (train) {
    for (int i = 1; i <= 5; ++i) files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  } else {
    files.push_back(dir / "test_batch.bin");
  }
  for (const auto& f : files)
    if (!std::filesystem::exists(f)) throw IoError("missing CIFAR-10 file " + f.string());
  return load_records(files, meta);
}

DataBundle load_data(const RunConfig& config) {
  const auto& d = config.dataset;
  DataBundle b;
  switch (d.source) {
    case DatasetSource::kCifar:
      b.train = load_cifar(d.train, true);
      b.test = load_cifar(d.test, false);
      break;
    case DatasetSource::kRecords:
      b.train = load_dataset(d.train);
      b.test = load_dataset(d.test);
      break;
    case DatasetSource::kSynthetic: {
      const auto stream = static_cast<std::uint64_t>(Stream::kSynthetic);
      b.train = make_synthetic_dataset(d.train_size, d.classes, d.height, d.width, d.channels,
                                       derive_seed({config.seeds.subset, stream, 0}), "train");
      b.test = make_synthetic_dataset(d.test_size, d.classes, d.height, d.width, d.channels,
                                      derive_seed({config.seeds.subset, stream, 1}), "test");
      return b;
    }
  }
  if (d.train_size > 0 && d.train_size < b.train.size()) b.train = subset(b.train, d.train_size, config.seeds.subset);
  if (d.test_size > 0 && d.test_size < b.test.size())
    b.test = subset(b.test, d.test_size, derive_seed({config.seeds.subset, 1}));
  return b;
}

nn::Architecture architecture_for(const RunConfig& config, const DatasetMeta& meta) {
  nn::Architecture a = config.architecture();
  a.in_channels = meta.channels;
  a.height = meta.height;
  a.width = meta.width;
  a.classes = meta.classes;
  return a;
}

// ---------------------------------------------------------------------------

std::string format_histogram(const std::vector<std::pair<double, std::size_t>>& counts) {
  std::string out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i) out += ';';
    out += text::format_double(counts[i].first) + ":" + std::to_string(counts[i].second);
  }
  return out;
}

TrainResult train(const RunConfig& config, const Dataset& data, const BlurPolicy& policy,
                  const EpochCallback& on_epoch) {
  config.validate();
  data.validate();
  if (policy.total_epochs() != config.optimizer.epochs)
    throw ConfigError("blur policy spans " + std::to_string(policy.total_epochs()) + " epochs, optimizer " +
                      std::to_string(config.optimizer.epochs));

  TrainResult result{nn::SmallConvNet(architecture_for(config, data.meta), config.seeds.init), {}, 0.0, 0.0};
  auto& model = result.model;
  nn::Sgd sgd(model, {config.optimizer.momentum, config.optimizer.weight_decay});
  const auto lr_schedule = config.lr_schedule();
  const AugmentOptions augment{config.optimizer.augment, config.optimizer.pad, config.optimizer.flip_probability};

  const auto t_start = Clock::now();
  for (int epoch = 0; epoch < config.optimizer.epochs; ++epoch) {
    const double lr = lr_schedule.at(epoch);
    EpochIterator batches(data, make_batch_plan(data.size(), config.seeds.data, epoch, config.optimizer.batch_size, augment),
                          policy, epoch, config.seeds.blur);
    std::map<double, std::size_t, std::greater<>> sigma_counts;
    double loss_sum = 0.0;
    std::size_t wrong = 0, seen = 0, batch_index = 0;
    for (;;) {
      const auto t_data = Clock::now();
      auto batch = batches.next();
      result.data_seconds += seconds_since(t_data);
      if (!batch) break;

      const std::vector<int> labels(batch->labels.begin(), batch->labels.end());
      nn::Tape tape;
      nn::Var logits, loss;
      try {
        logits = model.forward(tape, nn::images_to_tensor(batch->images));
        loss = nn::cross_entropy(tape, logits, labels);
      } catch (const NumericalError& e) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index) + " (lr " + text::format_double(lr) + "): " + e.what());
      }
      const auto predictions = nn::argmax_rows(tape.value(logits));
      for (std::size_t i = 0; i < labels.size(); ++i) wrong += predictions[i] != labels[i];
      loss_sum += tape.value(loss).values[0] * static_cast<double>(labels.size());
      seen += labels.size();
      tape.backward(loss);
      sgd.step(lr);

      for (double s : batch->sigmas) ++sigma_counts[s];
      ++batch_index;
    }

    EpochLog row;
    row.epoch = epoch;
    row.segment = policy.segment_index(epoch);
    row.sigma_counts.assign(sigma_counts.begin(), sigma_counts.end());
    row.train_loss = loss_sum / static_cast<double>(seen);
    row.train_error = static_cast<double>(wrong) / static_cast<double>(seen);
    row.lr = lr;
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  result.seconds = seconds_since(t_start);
  return result;
}

void write_log_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch,segment,sigma_histogram,train_loss,train_error,lr\n";
  for (const auto& r : log)
    out << r.epoch << ',' << r.segment << ',' << format_histogram(r.sigma_counts) << ','
        << text::format_double(r.train_loss) << ',' << text::format_double(r.train_error) << ','
        << text::format_double(r.lr) << '\n';
  write_text(path, out.str());
}

RunArtifacts train_run(const RunConfig& config, const Dataset& data, const EpochCallback& on_epoch) {
  config.validate();
  const Curriculum curriculum = config.make_curriculum();

  const auto dir = config.output.dir;
  std::filesystem::create_directories(dir);
  write_text(dir / "config.ini", dump_config(config));
  write_text(dir / "schedule.txt", format_schedule(curriculum.schedule));

  RunArtifacts a{dir, dir / "model.ckpt", dir / "log.csv", train(config, data, *curriculum.policy, on_epoch)};
  write_log_csv(a.log, a.result.log);
  nn::save_checkpoint(a.checkpoint, a.result.model, config_digest(config));
  write_text(a.dir / "timing.txt", "train_seconds = " + text::format_double(a.result.seconds) +
                                       "\ndata_seconds = " + text::format_double(a.result.data_seconds) + "\n");
  return a;
}

RunArtifacts train_run(const RunConfig& config, const EpochCallback& on_epoch) {
  const DataBundle data = load_data(config);
  return train_run(config, data.train, on_epoch);
}

// ---------------------------------------------------------------------------

double mean_corruption_error(const std::map<CellKey, double>& errors) {
  if (errors.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const auto& [key, e] : errors) sum += e;
  return sum / static_cast<double>(errors.size());
}

double MetricsTable::kind_error(CorruptionKind kind) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& [key, e] : errors)
    if (key.first == kind) {
      sum += e;
      ++n;
    }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

bool MetricsTable::same_results(const MetricsTable& o) const {
  if (label != o.label || seed != o.seed || config_digest != o.config_digest || suite_checksum != o.suite_checksum)
    return false;
  if (!same_bits(clean_error, o.clean_error) || !same_bits(mce, o.mce) || errors.size() != o.errors.size())
    return false;
  for (const auto& [key, e] : errors) {
    const auto it = o.errors.find(key);
    if (it == o.errors.end() || !same_bits(e, it->second)) return false;
  }
  return true;
}

MetricsTable evaluate(const nn::Classifier& classifier, const Dataset& clean,
                      const std::map<CellKey, Dataset>& suite) {
  MetricsTable m;
  m.clean_error = nn::top1_error(classifier, clean.images, clean.labels);
  for (const auto& [key, ds] : suite) {
    if (ds.labels != clean.labels) throw ConfigError("labels of " + cell_name(key) + " differ from the clean set");
    m.errors[key] = nn::top1_error(classifier, ds.images, ds.labels);
  }
  m.mce = mean_corruption_error(m.errors);
  return m;
}

MetricsTable evaluate(const nn::Classifier& classifier, const Dataset& clean, const std::filesystem::path& suite_root,
                      const EvalOptions& options) {
  if (suite_root.empty()) return evaluate(classifier, clean, std::map<CellKey, Dataset>{});

  const SuiteManifest manifest = read_manifest(suite_root);
  if (manifest.records != clean.size() || manifest.label_checksum != crc32(clean.labels))
    throw ConfigError("suite at " + suite_root.string() + " was not generated from this clean test set");

  std::vector<CellKey> cells;
  std::string missing;
  for (CorruptionKind kind : options.kinds)
    for (int severity : options.severities) {
      const CellKey key{kind, severity};
      if (!manifest.set_checksums.count(key) || !std::filesystem::exists(suite_set_path(suite_root, kind, severity)))
        missing += (missing.empty() ? "" : ", ") + cell_name(key);
      else
        cells.push_back(key);
    }
  if (!missing.empty()) throw PartialSuiteError("incomplete corruption suite at " + suite_root.string() + "; missing: " + missing);

  MetricsTable m;
  m.clean_error = nn::top1_error(classifier, clean.images, clean.labels);
  m.suite_checksum = manifest.suite_checksum;
  std::vector<double> errors(cells.size());
  parallel_for(cells.size(), options.threads, [&](std::size_t i) {
    const auto [kind, severity] = cells[i];
    const Dataset ds = load_dataset(suite_set_path(suite_root, kind, severity), clean.meta);
    if (ds.meta.checksum != manifest.set_checksums.at(cells[i]))
      throw IoError(cell_name(cells[i]) + ": checksum differs from the suite manifest");
    if (ds.labels != clean.labels) throw ConfigError("labels of " + cell_name(cells[i]) + " differ from the clean set");
    errors[i] = nn::top1_error(classifier, ds.images, ds.labels);
  });
  for (std::size_t i = 0; i < cells.size(); ++i) m.errors[cells[i]] = errors[i];
  m.mce = mean_corruption_error(m.errors);
  return m;
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsTable& m) {
  using text::format_double;
  std::ostringstream out;
  out << "metric,kind,severity,value\n"
      << "label,,," << m.label << "\n"
      << "seed,,," << m.seed << "\n"
      << "config_digest,,," << hex(m.config_digest, 16) << "\n"
      << "suite_checksum,,," << hex(m.suite_checksum, 8) << "\n"
      << "runtime_seconds,,," << format_double(m.runtime_seconds) << "\n"
      << "clean_error,,," << format_double(m.clean_error) << "\n"
      << "mce,,," << format_double(m.mce) << "\n";
  for (const auto& [key, e] : m.errors)
    out << "corruption_error," << to_string(key.first) << ',' << key.second << ',' << format_double(e) << "\n";
  write_text(path, out.str());
}

MetricsTable read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string where = path.string();
  MetricsTable m;
  std::string line;
  std::getline(in, line);
  if (text::trim(line) != "metric,kind,severity,value") throw IoError(where + ": not a metrics table");
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 4) throw IoError(where + ": malformed row '" + line + "'");
    const auto& metric = f[0];
    if (metric == "label") m.label = f[3];
    else if (metric == "seed") m.seed = std::stoull(f[3]);
    else if (metric == "config_digest") m.config_digest = parse_hex(f[3], where);
    else if (metric == "suite_checksum") m.suite_checksum = static_cast<std::uint32_t>(parse_hex(f[3], where));
    else if (metric == "runtime_seconds") m.runtime_seconds = parse_double(f[3], where);
    else if (metric == "clean_error") m.clean_error = parse_double(f[3], where);
    else if (metric == "mce") m.mce = parse_double(f[3], where);
    else if (metric == "corruption_error")
      m.errors[{parse_corruption_kind(f[1]), std::stoi(f[2])}] = parse_double(f[3], where);
    else throw IoError(where + ": unknown metric '" + metric + "'");
  }
  return m;
}

// ---------------------------------------------------------------------------

Stat summarize(const std::vector<double>& values) {
  Stat s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

const GroupSummary& Comparison::group(const std::string& label) const {
  for (const auto& g : groups)
    if (g.label == label) return g;
  throw std::out_of_range("no group '" + label + "'");
}

std::string Comparison::to_csv() const {
  using text::format_double;
  std::ostringstream out;
  out << "group,runs,metric,mean,std,delta\n";
  for (const auto& g : groups) {
    auto row = [&](const std::string& metric, const Stat& s, double delta) {
      out << g.label << ',' << g.runs << ',' << metric << ',' << format_double(s.mean) << ','
          << format_double(s.stddev) << ',' << format_double(delta) << '\n';
    };
    row("clean_error", g.clean, g.clean_delta);
    row("mce", g.mce, g.mce_delta);
    for (const auto& [kind, s] : g.per_kind) row(std::string(to_string(kind)), s, g.kind_delta.at(kind));
  }
  return out.str();
}

std::string Comparison::summary() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "baseline: " << baseline << "\n";
  for (const auto& g : groups) {
    out << g.label << " (" << g.runs << " run" << (g.runs == 1 ? "" : "s") << "): clean " << 100 * g.clean.mean
        << "% +- " << 100 * g.clean.stddev << ", mCE " << 100 * g.mce.mean << "% +- " << 100 * g.mce.stddev;
    if (g.label != baseline)
      out << "  [delta clean " << std::showpos << 100 * g.clean_delta << ", mCE " << 100 * g.mce_delta
          << std::noshowpos << " points]";
    out << "\n";
  }
  return out.str();
}

Comparison compare_runs(const std::vector<MetricsTable>& tables, const std::string& baseline) {
  if (tables.size() < 2) throw ConfigError("comparison needs at least two metrics tables");
  std::set<CellKey> cells;
  for (const auto& [key, e] : tables.front().errors) cells.insert(key);
  for (const auto& t : tables) {
    std::set<CellKey> other;
    for (const auto& [key, e] : t.errors) other.insert(key);
    if (t.suite_checksum != tables.front().suite_checksum || other != cells)
      throw ConfigError("mismatched suites: '" + t.label + "' was evaluated on a different corruption suite");
  }
  std::set<CorruptionKind> kinds;
  for (const auto& key : cells) kinds.insert(key.first);

  std::vector<std::string> order;
  std::map<std::string, std::vector<const MetricsTable*>> by_label;
  for (const auto& t : tables) {
    if (!by_label.count(t.label)) order.push_back(t.label);
    by_label[t.label].push_back(&t);
  }

  Comparison c;
  c.baseline = baseline;
  if (c.baseline.empty()) c.baseline = by_label.count("vanilla") ? "vanilla" : order.front();
  if (!by_label.count(c.baseline)) throw ConfigError("baseline '" + c.baseline + "' not among the tables");

  for (const auto& label : order) {
    const auto& runs = by_label[label];
    GroupSummary g;
    g.label = label;
    g.runs = runs.size();
    std::vector<double> clean, mce;
    for (const auto* t : runs) {
      clean.push_back(t->clean_error);
      mce.push_back(t->mce);
    }
    g.clean = summarize(clean);
    g.mce = summarize(mce);
    for (CorruptionKind kind : kinds) {
      std::vector<double> v;
      for (const auto* t : runs) v.push_back(t->kind_error(kind));
      g.per_kind[kind] = summarize(v);
    }
    c.groups.push_back(std::move(g));
  }
  const GroupSummary base = c.group(c.baseline);
  for (auto& g : c.groups) {
    g.clean_delta = g.clean.mean - base.clean.mean;
    g.mce_delta = g.mce.mean - base.mce.mean;
    for (CorruptionKind kind : kinds) g.kind_delta[kind] = g.per_kind[kind].mean - base.per_kind.at(kind).mean;
  }
  return c;
}

// ---------------------------------------------------------------------------

std::vector<AblationVariant> ablation_variants(const RunConfig& base, int replicates) {
  if (replicates < 1) throw ConfigError("ablation needs at least one replicate");
  struct Spec {
    const char* name;
    VariantKind kind;
    double probability;
  };
  const Spec specs[] = {
      {"vac", VariantKind::kVac, 1.0},          {"linear", VariantKind::kLinear, 1.0},
      {"inverse", VariantKind::kInverse, 1.0},  {"continuous", VariantKind::kContinuous, 1.0},
      {"steep", VariantKind::kSteep, 1.0},      {"constant_100", VariantKind::kConstant, 1.0},
      {"constant_20", VariantKind::kConstant, 0.2}, {"vanilla", VariantKind::kVanilla, 1.0},
  };
  std::vector<AblationVariant> out;
  for (const auto& s : specs)
    for (int j = 0; j < replicates; ++j) {
      RunConfig c = base;
      c.curriculum.variant = s.kind;
      c.curriculum.blur_probability = s.probability;
      c.curriculum.blur_sigma = base.curriculum.sigma_max;
      c.seeds.init = base.seeds.init + static_cast<std::uint64_t>(j);
      c.seeds.data = base.seeds.data + static_cast<std::uint64_t>(j);
      c.seeds.blur = base.seeds.blur + static_cast<std::uint64_t>(j);
      c.output.label = s.name;
      c.output.dir = base.output.dir / s.name / ("seed" + std::to_string(j));
      c.validate();
      out.push_back({s.name, std::move(c)});
    }
  return out;
}

std::string AblationResult::table() const {
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> acc;
  for (const auto& r : runs) {
    if (!acc.count(r.label)) order.push_back(r.label);
    acc[r.label].first.push_back(r.clean_error);
    acc[r.label].second.push_back(r.mce);
  }
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::left << std::setw(14) << "Method" << std::right << std::setw(11) << "Clean Err" << std::setw(9) << "mCE"
      << std::setw(6) << "runs" << "\n";
  for (const auto& label : order) {
    const auto& [clean, mce] = acc[label];
    out << std::left << std::setw(14) << label << std::right << std::setw(11) << 100 * summarize(clean).mean
        << std::setw(9) << 100 * summarize(mce).mean << std::setw(6) << clean.size() << "\n";
  }
  return out.str();
}

AblationResult run_ablation(const RunConfig& base, int replicates, const RunCallback& on_run) {
  const auto variants = ablation_variants(base, replicates);
  const DataBundle data = load_data(base);
  AblationResult result;
  EvalOptions eval;
  eval.threads = base.output.threads;
  for (const auto& v : variants) {
    const RunArtifacts run = train_run(v.config, data.train);
    nn::ModelClassifier classifier(run.result.model);
    MetricsTable m = evaluate(classifier, data.test, v.config.dataset.suite, eval);
    m.label = v.name;
    m.seed = v.config.seeds.init;
    m.runtime_seconds = run.result.seconds;
    m.config_digest = config_digest(v.config);
    write_metrics_csv(run.dir / "metrics.csv", m);
    if (on_run) on_run(v, m);
    result.runs.push_back(std::move(m));
  }
  std::filesystem::create_directories(base.output.dir);
  write_text(base.output.dir / "ablation.txt", result.table());
  return result;
}

}  // namespace vac
