#pragma once

// End-to-end orchestration: the curriculum training loop, clean and
// corruption evaluation, run comparison and the ablation matrix.
//
// The training loop is a plain SGD loop. The curriculum only enters through
// the BlurPolicy handed to the EpochIterator: per image, draw sigma, blur,
// then augment. Vanilla training is the same loop with a policy that always
// returns 0.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vac/config.hpp"
#include "vac/corruptions.hpp"
#include "vac/curriculum.hpp"
#include "vac/data.hpp"
#include "vac/errors.hpp"
#include "vac/nn.hpp"

namespace vac {

/// Some (kind, severity) record-sets of a suite are missing.
class PartialSuiteError : public IoError {
 public:
  using IoError::IoError;
};

// ---------------------------------------------------------------------------
// Data

struct DataBundle {
  Dataset train;
  Dataset test;
};

/// Loads (or synthesizes) train and test sets and applies the configured
/// stratified subsets.
DataBundle load_data(const RunConfig& config);

/// Official CIFAR-10 batch files under `dir`; `train` picks data_batch_1..5,
/// otherwise test_batch. A regular file is loaded as-is.
Dataset load_cifar(const std::filesystem::path& dir, bool train);

nn::Architecture architecture_for(const RunConfig& config, const DatasetMeta& meta);

// ---------------------------------------------------------------------------
// Training

struct EpochLog {
  int epoch = 0;
  std::size_t segment = 0;
  std::vector<std::pair<double, std::size_t>> sigma_counts;  // sigma descending
  double train_loss = 0.0;
  double train_error = 0.0;
  double lr = 0.0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

/// "2:130;1:270;0:1600"
std::string format_histogram(const std::vector<std::pair<double, std::size_t>>& counts);

struct TrainResult {
  nn::SmallConvNet model;
  std::vector<EpochLog> log;
  double seconds = 0.0;       // whole loop
  double data_seconds = 0.0;  // batch assembly incl. blur and augmentation
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Runs config.curriculum.epochs epochs of SGD on `train` under `policy`.
/// Throws NumericalError (with epoch and batch) on a non-finite loss.
TrainResult train(const RunConfig& config, const Dataset& train, const BlurPolicy& policy,
                  const EpochCallback& on_epoch = {});

struct RunArtifacts {
  std::filesystem::path dir;
  std::filesystem::path checkpoint;  // model.ckpt
  std::filesystem::path log;         // log.csv
  TrainResult result;
};

/// Trains and writes <dir>/config.ini, schedule.txt, log.csv, model.ckpt and
/// timing.txt. Wall-clock goes only to timing.txt so that everything else is
/// reproducible byte for byte.
RunArtifacts train_run(const RunConfig& config, const Dataset& train, const EpochCallback& on_epoch = {});
RunArtifacts train_run(const RunConfig& config, const EpochCallback& on_epoch = {});

void write_log_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log);

// ---------------------------------------------------------------------------
// Evaluation

using CellKey = std::pair<CorruptionKind, int>;

struct MetricsTable {
  std::string label;
  std::uint64_t seed = 0;
  double clean_error = 0.0;
  std::map<CellKey, double> errors;
  double mce = 0.0;  // NaN when no corruption suite was evaluated
  double runtime_seconds = 0.0;
  std::uint64_t config_digest = 0;
  std::uint32_t suite_checksum = 0;

  /// Mean over the severities present for `kind`.
  double kind_error(CorruptionKind kind) const;
  /// Bitwise equality of every field except runtime_seconds.
  bool same_results(const MetricsTable& other) const;
};

/// Plain arithmetic mean of the matrix entries; NaN if empty.
double mean_corruption_error(const std::map<CellKey, double>& errors);

struct EvalOptions {
  std::vector<CorruptionKind> kinds{kAllCorruptions.begin(), kAllCorruptions.end()};
  std::vector<int> severities{1, 2, 3, 4, 5};
  unsigned threads = 1;
};

/// In-memory suite.
MetricsTable evaluate(const nn::Classifier& classifier, const Dataset& clean,
                      const std::map<CellKey, Dataset>& suite);

/// Persisted suite. Throws ConfigError if the suite's labels do not match
/// `clean`, PartialSuiteError listing every missing (kind, severity).
/// An empty suite_root evaluates clean error only.
MetricsTable evaluate(const nn::Classifier& classifier, const Dataset& clean, const std::filesystem::path& suite_root,
                      const EvalOptions& options = {});

void write_metrics_csv(const std::filesystem::path& path, const MetricsTable& metrics);
MetricsTable read_metrics_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Comparison

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one run
};

Stat summarize(const std::vector<double>& values);

struct GroupSummary {
  std::string label;
  std::size_t runs = 0;
  Stat clean;
  Stat mce;
  std::map<CorruptionKind, Stat> per_kind;
  // Differences of means against the baseline group.
  double clean_delta = 0.0;
  double mce_delta = 0.0;
  std::map<CorruptionKind, double> kind_delta;
};

struct Comparison {
  std::string baseline;
  std::vector<GroupSummary> groups;  // order of first appearance

  const GroupSummary& group(const std::string& label) const;
  /// Long format: group,runs,metric,mean,std,delta
  std::string to_csv() const;
  std::string summary() const;
};

/// Groups tables by label (one entry per seed). Baseline defaults to
/// "vanilla" when present, else the first label. Throws ConfigError for
/// fewer than two tables or mismatched suites.
Comparison compare_runs(const std::vector<MetricsTable>& tables, const std::string& baseline = "");

// ---------------------------------------------------------------------------
// Ablation

struct AblationVariant {
  std::string name;
  RunConfig config;
};

/// vac, linear, inverse, continuous, steep, constant_100, constant_20,
/// vanilla; replicate j shifts the init, data and blur seeds by j and writes
/// to <dir>/<name>/seed<j>.
std::vector<AblationVariant> ablation_variants(const RunConfig& base, int replicates);

struct AblationResult {
  std::vector<MetricsTable> runs;

  /// Method, clean error and mCE (means over replicates), one row per variant.
  std::string table() const;
};

using RunCallback = std::function<void(const AblationVariant&, const MetricsTable&)>;

AblationResult run_ablation(const RunConfig& base, int replicates, const RunCallback& on_run = {});

// ---------------------------------------------------------------------------
// Reports

/// Grouped bar chart of per-corruption error, one bar per group.
std::string bar_chart_svg(const Comparison& comparison, const std::string& title);

}  // namespace vac
