// vac: command-line front end.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure
// (I/O, numerical divergence, calibration).

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "vac/config.hpp"
#include "vac/corruptions.hpp"
#include "vac/curriculum.hpp"
#include "vac/harness.hpp"
#include "vac/text.hpp"

namespace {

using namespace vac;

std::vector<CorruptionKind> parse_kinds(const std::string& list) {
  if (list == "all") return {kAllCorruptions.begin(), kAllCorruptions.end()};
  std::vector<CorruptionKind> out;
  for (const auto& name : text::split(list, ',')) out.push_back(parse_corruption_kind(name));
  return out;
}

std::vector<int> parse_severities(const std::string& list) {
  std::vector<int> out;
  for (const auto& s : text::split(list, ',')) {
    try {
      out.push_back(std::stoi(s));
    } catch (const std::logic_error&) {
      throw ConfigError("bad severity '" + s + "'");
    }
  }
  return out;
}

RunConfig load_run_config(const std::string& path) {
  RunConfig c = load_config(path);
  apply_output_override(c);
  return c;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << content)) throw IoError("cannot write " + path.string());
}

double read_train_seconds(const std::filesystem::path& timing) {
  std::ifstream in(timing);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos && text::trim(std::string_view(line).substr(0, eq)) == "train_seconds")
      return std::stod(line.substr(eq + 1));
  }
  return 0.0;
}

// Test images to corrupt or calibrate on: a records file or the config's test set.
Dataset source_images(const std::string& config_path, const std::string& input) {
  if (!input.empty()) return load_dataset(input);
  if (config_path.empty()) throw ConfigError("give --config or --input");
  return load_data(load_run_config(config_path)).test;
}

int run(int argc, char** argv) {
  CLI::App app{"Visual acuity curriculum lab: blur curricula, corruption suites, training and evaluation"};
  app.require_subcommand(1);

  // schedule
  auto* sched = app.add_subcommand("schedule", "Print or validate a blur curriculum");
  std::string variant = "vac", deficit = "1/5", validate_path;
  int epochs = 200, sigma_max = 2;
  bool show_replay = false;
  sched->add_option("--variant", variant, "vac, linear, inverse, continuous, steep, constant, vanilla");
  sched->add_option("--epochs", epochs, "Total epochs N");
  sched->add_option("--sigma-max", sigma_max, "Largest blur sigma (power of two)");
  sched->add_option("--deficit", deficit, "Deficit fraction, e.g. 1/5 or 0.2");
  sched->add_flag("--replay", show_replay, "Also print each segment's replay distribution");
  sched->add_option("--validate", validate_path, "Parse a schedule file and check it against the options");

  // corrupt
  auto* corrupt = app.add_subcommand("corrupt", "Generate a corruption suite");
  std::string config_path, input, out_dir, kinds = "all", severities = "1,2,3,4,5";
  std::uint64_t seed = 0;
  bool overwrite = false;
  unsigned threads = 0;
  corrupt->add_option("--config", config_path, "Run config whose test set is corrupted");
  corrupt->add_option("--input", input, "Records file to corrupt instead");
  corrupt->add_option("--out", out_dir, "Suite root")->required();
  corrupt->add_option("--seed", seed, "Corruption seed")->required();
  corrupt->add_option("--kinds", kinds, "Comma list or 'all'");
  corrupt->add_option("--severities", severities, "Comma list");
  corrupt->add_flag("--overwrite", overwrite, "Replace an existing suite");
  corrupt->add_option("--threads", threads, "Worker threads (0: all cores)");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Mean PSNR per corruption and severity");
  std::size_t samples = 100;
  calibrate->add_option("--config", config_path, "Run config whose test set is sampled");
  calibrate->add_option("--input", input, "Records file to sample instead");
  calibrate->add_option("--samples", samples, "Images used (>= 100)");
  calibrate->add_option("--seed", seed, "Corruption seed");
  calibrate->add_option("--kinds", kinds, "Comma list or 'all'");
  calibrate->add_option("--threads", threads, "Worker threads (0: all cores)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one run from a config file");
  bool quiet = false;
  train_cmd->add_option("--config", config_path, "Run config")->required();
  train_cmd->add_flag("--quiet", quiet, "No per-epoch output");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the clean and corrupted test sets");
  std::string checkpoint, suite, metrics_out;
  eval_cmd->add_option("--config", config_path, "Run config (test set, suite, output dir)")->required();
  eval_cmd->add_option("--checkpoint", checkpoint, "Defaults to <output.dir>/model.ckpt");
  eval_cmd->add_option("--suite", suite, "Overrides dataset.suite");
  eval_cmd->add_option("--out", metrics_out, "Defaults to <output.dir>/metrics.csv");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate every ablation variant");
  int replicates = 1;
  ablate->add_option("--config", config_path, "Base run config")->required();
  ablate->add_option("--replicates", replicates, "Seeds per variant");

  // report
  auto* report = app.add_subcommand("report", "Compare metrics tables");
  std::vector<std::string> metric_files;
  std::string baseline, csv_out, svg_out, title = "Top-1 error per corruption";
  report->add_option("metrics", metric_files, "metrics.csv files")->required();
  report->add_option("--baseline", baseline, "Baseline label (default vanilla)");
  report->add_option("--csv", csv_out, "Write the comparison CSV here");
  report->add_option("--svg", svg_out, "Write an SVG bar chart here");
  report->add_option("--title", title, "Chart title");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic records file");
  std::size_t count = 1000;
  int classes = 10, size = 32, channels = 3;
  std::string split = "synthetic";
  synth->add_option("--out", out_dir, "Records file")->required();
  synth->add_option("--count", count, "Images");
  synth->add_option("--classes", classes, "Classes");
  synth->add_option("--size", size, "Height and width");
  synth->add_option("--channels", channels, "1 or 3");
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("--split", split, "Split name stored in the sidecar");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*sched) {
    VariantParams p;
    p.sigma_max = sigma_max;
    p.deficit = parse_fraction(deficit);
    p.blur_sigma = sigma_max;
    const Curriculum c = make_variant(parse_variant_kind(variant), epochs, p);
    if (!validate_path.empty()) {
      std::ifstream in(validate_path);
      if (!in) throw IoError("cannot open " + validate_path);
      std::ostringstream ss;
      ss << in.rdbuf();
      const Schedule parsed = parse_schedule(ss.str());
      if (!(parsed == c.schedule)) {
        std::cerr << "schedule in " << validate_path << " differs from " << variant << " (N=" << epochs
                  << ", sigma_max=" << sigma_max << ")\n";
        return 1;
      }
      std::cout << validate_path << ": ok\n";
      return 0;
    }
    std::cout << format_schedule(c.schedule);
    if (show_replay)
      for (std::size_t i = 0; i < c.schedule.size(); ++i) {
        std::cout << "# segment " << i << ":";
        for (const auto& w : c.policy->distribution(c.schedule.cumulative_epochs(i) - c.schedule[i].epochs))
          std::cout << " sigma " << w.sigma << " p " << w.probability << ";";
        std::cout << "\n";
      }
    return 0;
  }

  if (*corrupt) {
    const Dataset ds = source_images(config_path, input);
    GenerateOptions opts;
    opts.overwrite = overwrite;
    opts.threads = threads;
    const auto m =
        generate_corrupted_dataset(ds, parse_kinds(kinds), parse_severities(severities), seed, out_dir, opts);
    std::cout << "wrote " << m.set_checksums.size() << " record-sets of " << m.records << " images to " << out_dir
              << "\n";
    return 0;
  }

  if (*calibrate) {
    const Dataset ds = source_images(config_path, input);
    if (samples > ds.size()) throw ConfigError("only " + std::to_string(ds.size()) + " images available");
    const std::span<const Image> imgs(ds.images.data(), samples);
    const auto report_table = measure_severity_psnr(parse_kinds(kinds), imgs, SeverityTable::defaults(), seed, threads);
    std::cout << std::left << std::setw(20) << "kind" << std::right;
    for (int s = 1; s <= 5; ++s) std::cout << std::setw(9) << ("s" + std::to_string(s));
    std::cout << "\n" << std::fixed << std::setprecision(2);
    for (CorruptionKind k : report_table.kinds) {
      std::cout << std::left << std::setw(20) << to_string(k) << std::right;
      for (double v : report_table.mean_psnr.at(k)) std::cout << std::setw(9) << v;
      std::cout << "\n";
    }
    if (samples < 100) throw ConfigError("calibration needs at least 100 images");
    check_calibration(report_table);
    std::cout << "calibration ok\n";
    return 0;
  }

  if (*train_cmd) {
    const RunConfig c = load_run_config(config_path);
    const auto run_result = train_run(c, [&](const EpochLog& r) {
      if (quiet) return;
      std::cout << "epoch " << r.epoch << " segment " << r.segment << " sigma " << format_histogram(r.sigma_counts)
                << " loss " << r.train_loss << " error " << r.train_error << " lr " << r.lr << std::endl;
    });
    std::cout << "checkpoint " << run_result.checkpoint.string() << " (" << run_result.result.seconds << " s)\n";
    return 0;
  }

  if (*eval_cmd) {
    RunConfig c = load_run_config(config_path);
    if (!suite.empty()) c.dataset.suite = suite;
    const auto ckpt_path = checkpoint.empty() ? c.output.dir / "model.ckpt" : std::filesystem::path(checkpoint);
    const auto ckpt = nn::read_checkpoint(ckpt_path);
    const auto model = nn::load_model(ckpt);
    const DataBundle data = load_data(c);
    EvalOptions opts;
    opts.threads = c.output.threads;
    MetricsTable m = evaluate(nn::ModelClassifier(model), data.test, c.dataset.suite, opts);
    m.label = c.label();
    m.seed = c.seeds.init;
    m.config_digest = ckpt.config_digest;
    m.runtime_seconds = read_train_seconds(ckpt_path.parent_path() / "timing.txt");
    const auto out = metrics_out.empty() ? c.output.dir / "metrics.csv" : std::filesystem::path(metrics_out);
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    write_metrics_csv(out, m);
    std::cout << std::fixed << std::setprecision(2) << "clean error " << 100 * m.clean_error << "%, mCE "
              << 100 * m.mce << "% -> " << out.string() << "\n";
    return 0;
  }

  if (*ablate) {
    const RunConfig c = load_run_config(config_path);
    const auto result = run_ablation(c, replicates, [](const AblationVariant& v, const MetricsTable& m) {
      std::cout << std::fixed << std::setprecision(2) << v.name << " seed " << v.config.seeds.init << ": clean "
                << 100 * m.clean_error << "%, mCE " << 100 * m.mce << "%" << std::endl;
    });
    std::cout << result.table();
    return 0;
  }

  if (*report) {
    std::vector<MetricsTable> tables;
    for (const auto& f : metric_files) tables.push_back(read_metrics_csv(f));
    const Comparison cmp = compare_runs(tables, baseline);
    std::cout << cmp.summary();
    if (!csv_out.empty()) write_file(csv_out, cmp.to_csv());
    if (!svg_out.empty()) write_file(svg_out, bar_chart_svg(cmp, title));
    return 0;
  }

  if (*synth) {
    const Dataset ds = make_synthetic_dataset(count, classes, size, size, channels, seed, split);
    const auto crc = save_records(out_dir, ds);
    std::cout << "wrote " << ds.size() << " records to " << out_dir << " (crc32 " << std::hex << crc << ")\n";
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const vac::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
}
