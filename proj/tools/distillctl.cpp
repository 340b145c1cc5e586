// distillctl: pretrain, distill, generate, eval, ablate, sweep, plot-field.
// Every command resolves its configuration (defaults < config file <
// --set overrides), persists the resolved form into the output directory and
// writes nothing outside it.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "distill/config.hpp"
#include "distill/io.hpp"
#include "distill/synthbench.hpp"

namespace fs = std::filesystem;
using namespace distill;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_out = true) {
  cmd->add_option("--config", args.config_path,
                  "flat key = value configuration file");
  auto* out = cmd->add_option("--out", args.out_dir, "output directory");
  if (needs_out) {
    out->required();
  }
  cmd->add_option("--set", args.overrides,
                  "override a config key (key=value, repeatable)");
  cmd->add_flag("--force", args.force,
                "overwrite an existing run directory");
}

ExperimentConfig resolve(const CommonArgs& args) {
  std::optional<fs::path> file;
  if (!args.config_path.empty()) {
    file = fs::path(args.config_path);
  }
  return load_experiment_config(file, args.overrides);
}

// A directory already holding a resolved config is a prior run; refuse to
// clobber it unless forced.
fs::path prepare_out_dir(const CommonArgs& args) {
  const fs::path dir(args.out_dir);
  if (fs::exists(dir / "resolved_config.cfg") && !args.force) {
    throw StateError("output directory " + dir.string() +
                     " already holds a run (use --force to overwrite)");
  }
  fs::create_directories(dir);
  return dir;
}

void persist_config(const ExperimentConfig& config, const fs::path& dir) {
  write_file(dir / "resolved_config.cfg", serialize_experiment_config(config));
}

Benchmark build_benchmark(const ExperimentConfig& config) {
  RngStream rng(config.distill.seeds.data, 0);
  return make_benchmark(config.bench_spec(), rng);
}

int cmd_pretrain(const CommonArgs& args) {
  const ExperimentConfig config = resolve(args);
  const fs::path dir = prepare_out_dir(args);
  persist_config(config, dir);
  const Benchmark bench = build_benchmark(config);
  const DenoiserParams params = pretrain(config.distill, bench.train);
  save_params(params, dir / "pretrained.bin");
  std::cout << "pretrained model written to "
            << (dir / "pretrained.bin").string() << "\n";
  return 0;
}

int cmd_distill(const CommonArgs& args, const std::string& params_path) {
  const ExperimentConfig config = resolve(args);
  const fs::path dir = prepare_out_dir(args);
  persist_config(config, dir);
  const Benchmark bench = build_benchmark(config);
  DenoiserParams pretrained =
      params_path.empty() ? pretrain(config.distill, bench.train)
                          : load_params(params_path);
  const RunArtifacts artifacts =
      distill(pretrained, config.distill, bench.train);
  write_artifacts(artifacts, dir);
  std::cout << "distilled " << artifacts.distilled.size() << " latents into "
            << dir.string() << "\n";
  return 0;
}

int cmd_generate(const CommonArgs& args, const std::string& params_path) {
  const ExperimentConfig config = resolve(args);
  const fs::path dir = prepare_out_dir(args);
  persist_config(config, dir);
  const DenoiserParams params = load_params(params_path);
  const std::vector<LabeledLatent> distilled =
      generate_distilled(params, config.distill);
  std::ostringstream csv;
  write_distilled_csv(distilled, csv);
  write_file(dir / "distilled.csv", csv.str());
  std::cout << "generated " << distilled.size() << " latents ("
            << config.distill.ipc << " per class)\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& distilled_path) {
  const ExperimentConfig config = resolve(args);
  const fs::path dir = prepare_out_dir(args);
  persist_config(config, dir);
  std::ifstream in(distilled_path);
  if (!in) {
    throw IoError("cannot open " + distilled_path);
  }
  const std::vector<LabeledLatent> distilled = read_distilled_csv(in);
  const Benchmark bench = build_benchmark(config);
  const EvalReport report = evaluate(distilled, bench.test,
                                     config.bench_spec(), config.eval,
                                     config.eval_seed);
  std::ostringstream csv;
  csv << "metric,value\n";
  csv << "top1_accuracy," << format_double(report.top1_accuracy) << "\n";
  csv << "mode_coverage," << format_double(report.mode_coverage) << "\n";
  csv << "mean_nn_distance," << format_double(report.mean_nn_distance)
      << "\n";
  write_file(dir / "eval_report.csv", csv.str());
  std::cout << "top1_accuracy=" << format_double(report.top1_accuracy)
            << " mode_coverage=" << format_double(report.mode_coverage)
            << " mean_nn_distance="
            << format_double(report.mean_nn_distance) << "\n";
  return 0;
}

std::vector<AblationCell> parse_cells(const std::string& text) {
  // "max/max,min/max,..." or the keyword "grid" (2x2) / "grid+fifo"
  std::vector<AblationCell> cells;
  auto grid = [&] {
    for (const char* r : {"max", "min"}) {
      for (const char* g : {"max", "min"}) {
        cells.push_back(AblationCell{parse_policy(r), parse_policy(g)});
      }
    }
  };
  if (text == "grid") {
    grid();
    return cells;
  }
  if (text == "grid+fifo") {
    grid();
    cells.push_back(AblationCell{EvictionPolicy::Oldest,
                                 EvictionPolicy::Oldest});
    return cells;
  }
  for (const std::string& part : split_csv_line(text)) {
    const auto slash = part.find('/');
    if (slash == std::string::npos) {
      throw UsageError("expected policy_real/policy_gen, got '" + part + "'");
    }
    cells.push_back(AblationCell{parse_policy(part.substr(0, slash)),
                                 parse_policy(part.substr(slash + 1))});
  }
  return cells;
}

int cmd_ablate(const CommonArgs& args, const std::string& cells_text,
               const std::vector<int>& ipcs, int trials, int jobs) {
  const ExperimentConfig config = resolve(args);
  const fs::path dir = prepare_out_dir(args);
  persist_config(config, dir);
  const std::vector<AblationCell> cells = parse_cells(cells_text);
  const std::vector<AblationRow> rows =
      run_ablation(config, cells, ipcs, trials, jobs);
  std::ostringstream csv;
  write_ablation_csv(rows, csv);
  write_file(dir / "ablation.csv", csv.str());
  std::cout << "ablation table (" << rows.size() << " rows) written to "
            << (dir / "ablation.csv").string() << "\n";
  return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& parameter,
              const std::vector<double>& values, int trials, int jobs) {
  const ExperimentConfig config = resolve(args);
  const fs::path dir = prepare_out_dir(args);
  persist_config(config, dir);
  const SweepParameter param = parse_sweep_parameter(parameter);
  const std::vector<SweepRow> rows =
      run_sweep(config, param, values, trials, jobs);
  {
    std::ostringstream csv;
    write_sweep_csv(rows, csv);
    write_file(dir / ("sweep_" + to_string(param) + ".csv"), csv.str());
  }
  {
    std::ostringstream csv;
    write_sweep_summary_csv(summarize_sweep(rows), csv);
    write_file(dir / ("sweep_" + to_string(param) + "_summary.csv"),
               csv.str());
  }
  std::cout << "sweep over " << to_string(param) << " written to "
            << dir.string() << "\n";
  return 0;
}

int cmd_plot_field(const CommonArgs& args, const std::string& params_path,
                   int t, int label, const FieldBounds& bounds) {
  const ExperimentConfig config = resolve(args);
  const fs::path dir = prepare_out_dir(args);
  persist_config(config, dir);
  const DenoiserParams params = load_params(params_path);
  const VarianceSchedule sched = config.distill.schedule();
  const std::vector<FieldPoint> field =
      gradient_field(params, sched, bounds, t, label);
  {
    std::ostringstream csv;
    write_field_csv(field, csv);
    write_file(dir / "field.csv", csv.str());
  }
  {
    std::ostringstream svg;
    write_field_svg(field, bounds, svg);
    write_file(dir / "field.svg", svg.str());
  }
  std::cout << "gradient field (" << field.size() << " arrows) written to "
            << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "diversity-driven dataset distillation on synthetic latent benchmarks"};
  app.require_subcommand(1);
  app.footer(
      "Config keys (defaults in parentheses) are listed by --help-keys.");

  bool help_keys = false;
  app.add_flag("--help-keys", help_keys,
               "list every config key with its default and exit");

  CommonArgs pretrain_args;
  auto* pre = app.add_subcommand("pretrain",
                                 "train the toy diffusion model with the "
                                 "pure diffusion loss");
  add_common(pre, pretrain_args);

  CommonArgs distill_args;
  std::string distill_params;
  auto* dis = app.add_subcommand(
      "distill", "run the diversity-driven fine-tuning loop end to end");
  add_common(dis, distill_args);
  dis->add_option("--params", distill_params,
                  "pretrained parameter file (otherwise pretrains first)");

  CommonArgs gen_args;
  std::string gen_params;
  auto* gen = app.add_subcommand(
      "generate", "sample a distilled dataset from a fine-tuned model");
  add_common(gen, gen_args);
  gen->add_option("--params", gen_params, "fine-tuned parameter file")
      ->required();

  CommonArgs eval_args;
  std::string eval_distilled;
  auto* eva = app.add_subcommand(
      "eval", "train the downstream classifier on a distilled set");
  add_common(eva, eval_args);
  eva->add_option("--distilled", eval_distilled, "distilled-set CSV")
      ->required();

  CommonArgs ablate_args;
  std::string ablate_cells = "grid+fifo";
  std::vector<int> ablate_ipcs = {10, 20, 50};
  int ablate_trials = 5;
  int ablate_jobs = 1;
  auto* abl = app.add_subcommand(
      "ablate", "update-strategy ablation over eviction policy pairs");
  add_common(abl, ablate_args);
  abl->add_option("--cells", ablate_cells,
                  "grid | grid+fifo | list like max/max,min/max");
  abl->add_option("--ipc", ablate_ipcs, "ipc settings to evaluate");
  abl->add_option("--trials", ablate_trials, "seed count");
  abl->add_option("--jobs", ablate_jobs, "parallel workers");

  CommonArgs sweep_args;
  std::string sweep_parameter;
  std::vector<double> sweep_values;
  int sweep_trials = 3;
  int sweep_jobs = 1;
  auto* swp = app.add_subcommand("sweep", "hyperparameter sweep");
  add_common(swp, sweep_args);
  swp->add_option("--parameter", sweep_parameter,
                  "lambda_real | lambda_gen | capacity")
      ->required();
  swp->add_option("--values", sweep_values, "values to sweep")->required();
  swp->add_option("--trials", sweep_trials, "seed count");
  swp->add_option("--jobs", sweep_jobs, "parallel workers");

  CommonArgs field_args;
  std::string field_params;
  int field_t = 100;
  int field_label = 0;
  FieldBounds field_bounds;
  auto* fld = app.add_subcommand(
      "plot-field", "emit the denoising direction field as CSV + SVG");
  add_common(fld, field_args);
  fld->add_option("--params", field_params, "parameter file")->required();
  fld->add_option("--t", field_t, "diffusion timestep to probe");
  fld->add_option("--class", field_label, "class label to condition on");
  fld->add_option("--x-min", field_bounds.x_min, "grid x minimum");
  fld->add_option("--x-max", field_bounds.x_max, "grid x maximum");
  fld->add_option("--y-min", field_bounds.y_min, "grid y minimum");
  fld->add_option("--y-max", field_bounds.y_max, "grid y maximum");
  fld->add_option("--nx", field_bounds.nx, "grid points along x");
  fld->add_option("--ny", field_bounds.ny, "grid points along y");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
      std::cout << app.help();
      std::cout << "\nConfig keys:\n";
      for (const ConfigKeyDoc& doc : config_key_docs()) {
        std::cout << "  " << doc.key << " (" << doc.default_value << "): "
                  << doc.doc << "\n";
      }
      return 0;
    }
    std::cerr << "error: category=usage " << e.what() << "\n";
    return 2;
  }

  if (help_keys) {
    for (const ConfigKeyDoc& doc : config_key_docs()) {
      std::cout << doc.key << " (" << doc.default_value << "): " << doc.doc
                << "\n";
    }
    return 0;
  }

  try {
    if (pre->parsed()) return cmd_pretrain(pretrain_args);
    if (dis->parsed()) return cmd_distill(distill_args, distill_params);
    if (gen->parsed()) return cmd_generate(gen_args, gen_params);
    if (eva->parsed()) return cmd_eval(eval_args, eval_distilled);
    if (abl->parsed()) {
      return cmd_ablate(ablate_args, ablate_cells, ablate_ipcs,
                        ablate_trials, ablate_jobs);
    }
    if (swp->parsed()) {
      return cmd_sweep(sweep_args, sweep_parameter, sweep_values,
                       sweep_trials, sweep_jobs);
    }
    if (fld->parsed()) {
      return cmd_plot_field(field_args, field_params, field_t, field_label,
                            field_bounds);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: category=usage " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: category=" << e.category() << " " << e.what()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: category=internal " << e.what() << "\n";
    return 1;
  }
  return 2;
}
