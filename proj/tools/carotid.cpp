// carotid: command-line front end for the segmentation lab.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "carotid/config.hpp"
#include "carotid/errors.hpp"
#include "carotid/infer.hpp"
#include "carotid/metrics.hpp"
#include "carotid/net.hpp"
#include "carotid/phantom.hpp"
#include "carotid/plot.hpp"
#include "carotid/report.hpp"
#include "carotid/stats.hpp"
#include "carotid/trainer.hpp"

namespace fs = std::filesystem;
using namespace carotid;

namespace {

constexpr const char* kResultsEnv = "CAROTID_RESULTS_ROOT";

// Raised for anything the operator got wrong on the command line or in the
// config file; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig load_config(const std::string& path) {
  try {
    RunConfig c = path.empty() ? RunConfig{} : load_run_config(path);
    if (const char* env = std::getenv(kResultsEnv); env && *env) c.paths.results_root = env;
    return c;
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
}

std::string checkpoint_id(const fs::path& dir) {
  std::error_code ec;
  return fs::weakly_canonical(dir, ec).string();
}

int cmd_phantom(const std::string& config_path, const std::string& out, int n, int seed) {
  RunConfig c = load_config(config_path);
  const fs::path root = out.empty() ? fs::path(c.paths.data_root) : fs::path(out);
  const int count = n > 0 ? n : c.cohort.n_volumes;
  const std::uint64_t s = seed >= 0 ? static_cast<std::uint64_t>(seed) : c.cohort.seed;
  const auto entries = generate_cohort(count, c.phantom, s, root);
  std::cout << "wrote " << entries.size() << " volumes to " << root.string() << '\n';
  return 0;
}

struct TrainArgs {
  std::string cohort, out, mode, artery;
  int epochs = 0;
  int seed = -1;
  bool no_reslice = false;
};

int cmd_train(const std::string& config_path, const TrainArgs& a) {
  RunConfig c = load_config(config_path);
  try {
    if (!a.mode.empty()) c.train.mode = loss_mode_from_string(a.mode);
    if (!a.artery.empty()) c.train.artery = artery_from_string(a.artery);
    if (a.epochs > 0) c.train.epochs = a.epochs;
    if (a.seed >= 0) c.train.seed = static_cast<std::uint64_t>(a.seed);
    if (a.no_reslice) c.train.use_reslice_augment = false;
    validate_train_config(c.train);
    validate_net_config(c.net);
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  const fs::path cohort = a.cohort.empty() ? fs::path(c.paths.data_root) : fs::path(a.cohort);
  const fs::path out = a.out.empty() ? fs::path(c.paths.results_root) / to_string(c.train.mode) /
                                           to_string(c.train.artery)
                                     : fs::path(a.out);
  const auto split = cohort_split(cohort, c.cohort.seed);
  const auto r = train_on_disk(c, cohort, split, out);
  std::cout << "best epoch " << r.best_epoch << ", validation DSC " << r.best_val_dsc
            << ", checkpoint " << (out / "checkpoint").string() << '\n';
  return 0;
}

int cmd_matrix(const std::string& config_path, const std::string& cohort_arg,
               const std::string& results_arg) {
  RunConfig c = load_config(config_path);
  const fs::path cohort = cohort_arg.empty() ? fs::path(c.paths.data_root) : fs::path(cohort_arg);
  const fs::path results =
      results_arg.empty() ? fs::path(c.paths.results_root) : fs::path(results_arg);
  const auto report = run_matrix(c, cohort, results);
  for (const auto& [artery, outcomes] : report.outcomes) {
    std::cout << to_string(artery) << ": " << outcomes.size() << " settings, summary in "
              << (results / "summary").string() << '\n';
  }
  return 0;
}

struct SegmentArgs {
  std::string checkpoint, volume, out, artery = "cca";
  bool tta = false;
};

int cmd_segment(const std::string& config_path, const SegmentArgs& a) {
  RunConfig c = load_config(config_path);
  Artery artery;
  try {
    artery = artery_from_string(a.artery);
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  nlohmann::json manifest;
  auto model = load_checkpoint(a.checkpoint, &manifest);
  const NetConfig net = net_config_from_json(manifest.at("net"));
  const Volume volume = load_volume(a.volume);

  SegmentOptions opts = c.segment;
  opts.tta = a.tta;
  opts.input_rows = net.input_rows;
  opts.input_cols = net.input_cols;
  auto result = segment_volume(make_predictor(model, opts.batch_size), volume, artery, opts);
  result.config_hash = manifest.value("config_hash", std::string());
  result.checkpoint_id = checkpoint_id(a.checkpoint);
  save_result(a.out, result);
  std::cout << "segmented " << result.slices.size() << " slices into " << a.out << '\n';
  return 0;
}

Spacing2 parse_spacing(const std::vector<double>& v) {
  if (v.size() != 2 || v[0] <= 0 || v[1] <= 0) {
    throw UsageError("--spacing expects two positive values (x y, mm)");
  }
  return {v[0], v[1]};
}

int cmd_evaluate(const std::string& pred, const std::string& labels, const std::string& out,
                 const std::string& volume_id, const std::vector<double>& spacing) {
  const auto result = load_result(pred);
  Spacing2 sp = result.in_plane_spacing;
  if (!spacing.empty()) {
    sp = parse_spacing(spacing);
  } else if (!fs::exists(fs::path(pred) / "result.json")) {
    throw UsageError("no result.json in the prediction directory; pass --spacing");
  }
  const auto truth = load_labels(labels);
  const std::string id = volume_id.empty() ? fs::path(labels).lexically_normal().parent_path().filename().string()
                                           : volume_id;
  const auto records = evaluate_slices(result.slices, truth, sp, id);
  write_eval_csv(out, records);
  for (Boundary b : {Boundary::MAB, Boundary::LIB}) {
    const auto s = summarize_records(records, b);
    std::cout << to_string(b) << ": DSC " << s.dsc.mean << " MAD " << s.mad.mean << " MAXD "
              << s.maxd.mean << " (" << s.dsc.n << " slices)\n";
  }
  return 0;
}

struct StatsArgs {
  std::string csv, col_a, col_b, units = "mm^3", out, boundary = "mab";
  std::vector<std::string> groups;
};

int cmd_stats(const StatsArgs& a) {
  std::string md;
  if (!a.csv.empty()) {
    if (a.col_a.empty() || a.col_b.empty()) throw UsageError("--csv needs --a and --b");
    const auto cols = read_paired_csv(a.csv, a.col_a, a.col_b);
    md += "## Agreement: " + a.col_a + " vs " + a.col_b + "\n\n";
    md += agreement_markdown(stats::pearson(cols.a, cols.b), stats::bland_altman(cols.a, cols.b),
                             a.units);
  }
  if (!a.groups.empty()) {
    Boundary boundary;
    try {
      boundary = boundary_from_string(a.boundary);
    } catch (const ArgumentError& e) {
      throw UsageError(e.what());
    }
    std::map<std::string, std::vector<double>> groups;
    std::vector<std::pair<std::string, std::vector<EvalRecord>>> table;
    for (const auto& g : a.groups) {
      const auto eq = g.find('=');
      if (eq == std::string::npos || eq == 0) throw UsageError("--group expects NAME=metrics.csv");
      const std::string name = g.substr(0, eq);
      const auto records = read_eval_csv(g.substr(eq + 1));
      for (const auto& [vol, d] : per_volume_dsc(records, boundary)) groups[name].push_back(d);
      table.emplace_back(name, records);
    }
    md += "\n## Metrics\n\n" + metrics_table_markdown(table);
    if (groups.size() >= 2) {
      const auto tk = stats::tukey_hsd(groups);
      md += "\n## Tukey HSD on per-volume mean " + std::string(to_string(boundary)) + " DSC\n\n";
      md += "| A | B | mean diff | q | p |\n|---|---|---|---|---|\n";
      for (const auto& p : tk.pairs) {
        md += "| " + p.group_a + " | " + p.group_b + " | " + std::to_string(p.mean_diff) + " | " +
              std::to_string(p.q) + " | " + std::to_string(p.p) + " |\n";
      }
    }
  }
  if (md.empty()) throw UsageError("nothing to do: pass --csv or --group");
  if (a.out.empty()) {
    std::cout << md;
  } else {
    write_text(a.out, md);
  }
  return 0;
}

struct PlotArgs {
  std::string kind, csv, col_a, col_b, out, units = "mm^3";
};

int cmd_plot(const PlotArgs& a) {
  plot::Figure fig;
  if (a.kind == "loss") {
    fig = plot::loss_curve_figure(a.csv);
  } else if (a.kind == "correlation" || a.kind == "bland-altman") {
    if (a.col_a.empty() || a.col_b.empty()) throw UsageError("--kind " + a.kind + " needs --a and --b");
    const auto cols = read_paired_csv(a.csv, a.col_a, a.col_b);
    fig = a.kind == "correlation" ? plot::correlation_figure(cols.a, cols.b, a.col_a, a.col_b)
                                  : plot::bland_altman_figure(cols.a, cols.b, a.units);
  } else {
    throw UsageError("unknown plot kind '" + a.kind + "'");
  }
  plot::save_svg(a.out, fig);
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

int cmd_config_dump(const std::string& config_path, const std::string& out) {
  const auto j = to_json(load_config(config_path));
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_text(out, j.dump(2) + "\n");
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Carotid wall segmentation lab: phantoms, training, inference, evaluation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Run configuration (JSON); defaults when omitted")
        ->check(CLI::ExistingFile);
  };

  std::string out;
  int n = 0, seed = -1;
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic phantom cohort");
  add_config(phantom);
  phantom->add_option("-o,--out", out, "Cohort root (default: paths.data_root)");
  phantom->add_option("-n,--volumes", n, "Number of volumes (default: cohort.n_volumes)");
  phantom->add_option("--seed", seed, "Cohort seed (default: cohort.seed)");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train one model on a cohort");
  add_config(train);
  train->add_option("--cohort", ta.cohort, "Cohort root (default: paths.data_root)");
  train->add_option("-o,--out", ta.out,
                    "Output directory (default: <results_root>/<mode>/<artery>)");
  train->add_option("--mode", ta.mode, "Loss mode: SDL, DDL, TDL or ATDL");
  train->add_option("--artery", ta.artery, "cca or ica");
  train->add_option("--epochs", ta.epochs, "Override train.epochs");
  train->add_option("--seed", ta.seed, "Override train.seed");
  train->add_flag("--no-reslice", ta.no_reslice, "Disable reslice augmentation");

  std::string cohort, results;
  auto* matrix = app.add_subcommand("matrix", "Train and evaluate the nine-setting matrix");
  add_config(matrix);
  matrix->add_option("--cohort", cohort, "Cohort root (default: paths.data_root)");
  matrix->add_option("--results", results,
                     std::string("Results root (default: paths.results_root or $") + kResultsEnv +
                         ")");

  SegmentArgs sa;
  auto* segment = app.add_subcommand("segment", "Segment one volume with a trained checkpoint");
  add_config(segment);
  segment->add_option("--checkpoint", sa.checkpoint, "Checkpoint directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  segment->add_option("--volume", sa.volume, "Volume image directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  segment->add_option("-o,--out", sa.out, "Output label directory")->required();
  segment->add_option("--artery", sa.artery, "cca or ica")
      ->check(CLI::IsMember({"cca", "ica", "CCA", "ICA"}));
  segment->add_flag("--tta", sa.tta, "Flip test-time augmentation with majority voting");

  std::string pred, labels, volume_id;
  std::vector<double> spacing;
  auto* evaluate = app.add_subcommand("evaluate", "Compare a prediction directory to labels");
  evaluate->add_option("--pred", pred, "Predicted label directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("--labels", labels, "Ground-truth label directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("-o,--out", out, "Metric CSV to write")->required();
  evaluate->add_option("--volume-id", volume_id, "Volume id column (default: parent dir name)");
  evaluate->add_option("--spacing", spacing, "In-plane spacing x y in mm (default: result.json)")
      ->expected(2);

  StatsArgs st;
  auto* stats_cmd = app.add_subcommand("stats", "Agreement and Tukey tables from CSV files");
  stats_cmd->add_option("--csv", st.csv, "CSV with paired measurement columns")
      ->check(CLI::ExistingFile);
  stats_cmd->add_option("--a", st.col_a, "First column (e.g. auto_vwv_mm3)");
  stats_cmd->add_option("--b", st.col_b, "Second column (e.g. manual_vwv_mm3)");
  stats_cmd->add_option("--units", st.units, "Units for the agreement table");
  stats_cmd->add_option("--group", st.groups, "NAME=metrics.csv, repeatable, for Tukey HSD");
  stats_cmd->add_option("--boundary", st.boundary, "mab or lib for the Tukey groups");
  stats_cmd->add_option("-o,--out", st.out, "Markdown output (default: stdout)");

  PlotArgs pa;
  auto* plot_cmd = app.add_subcommand("plot", "Write an SVG figure");
  plot_cmd->add_option("--kind", pa.kind, "correlation, bland-altman or loss")
      ->required()
      ->check(CLI::IsMember({"correlation", "bland-altman", "loss"}));
  plot_cmd->add_option("--csv", pa.csv, "Input CSV (train_log.csv for loss)")
      ->required()
      ->check(CLI::ExistingFile);
  plot_cmd->add_option("--a", pa.col_a, "x / first measurement column");
  plot_cmd->add_option("--b", pa.col_b, "y / second measurement column");
  plot_cmd->add_option("--units", pa.units, "Units for Bland-Altman axes");
  plot_cmd->add_option("-o,--out", pa.out, "SVG file to write")->required();

  auto* config = app.add_subcommand("config", "Configuration utilities");
  config->require_subcommand(1);
  auto* dump = config->add_subcommand("dump", "Print the effective configuration with all defaults");
  add_config(dump);
  dump->add_option("-o,--out", out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*phantom) return cmd_phantom(config_path, out, n, seed);
    if (*train) return cmd_train(config_path, ta);
    if (*matrix) return cmd_matrix(config_path, cohort, results);
    if (*segment) return cmd_segment(config_path, sa);
    if (*evaluate) return cmd_evaluate(pred, labels, out, volume_id, spacing);
    if (*stats_cmd) return cmd_stats(st);
    if (*plot_cmd) return cmd_plot(pa);
    if (*dump) return cmd_config_dump(config_path, out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
