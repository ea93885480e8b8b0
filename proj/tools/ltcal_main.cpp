#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ltcal/log.hpp"
#include "ltcal/repro.hpp"
#include "ltcal/runconfig.hpp"

namespace fs = std::filesystem;
using namespace ltcal;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool out_required = true) {
  cmd->add_option("--config", args.config_path, "Run configuration file");
  CLI::Option* out = cmd->add_option("--out", args.out_dir, "Output directory");
  if (out_required) {
    const char* root = std::getenv("LTCAL_OUT_ROOT");
    if (root == nullptr) out->required();
  }
  cmd->add_option("--seed", args.seed, "Root seed override");
  cmd->add_flag("--quiet", args.quiet, "Suppress log output");
}

RunConfig load_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) cfg = RunConfig::parse_file(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  set_quiet(args.quiet);
  return cfg;
}

fs::path resolve_out(const CommonArgs& args, const std::string& fallback_name) {
  if (!args.out_dir.empty()) return fs::path(args.out_dir);
  const char* root = std::getenv("LTCAL_OUT_ROOT");
  if (root != nullptr) return fs::path(root) / fallback_name;
  throw std::runtime_error("no --out given and LTCAL_OUT_ROOT is unset");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int cmd_synth(const CommonArgs& args, const std::string& prototypes_from) {
  const RunConfig cfg = load_config(args);
  const fs::path dir = resolve_out(args, "synth");
  fs::create_directories(dir);
  cfg.save_resolved(dir / "config.resolved");

  SynthDataset ds;
  const std::uint64_t ds_seed = Rng::derive(cfg.seed, "dataset");
  if (!prototypes_from.empty()) {
    const SynthDataset base = SynthDataset::load(prototypes_from);
    SynthConfig synth_cfg = cfg.synth_config(ds_seed);
    synth_cfg.num_classes = base.config.num_classes;
    synth_cfg.feature_dim = base.config.feature_dim;
    ds = generate_like(base, law_counts(synth_cfg), ds_seed);
  } else {
    ds = generate(cfg.synth_config(ds_seed));
  }
  if (cfg.coco_lt)
    ds = subsample_coco_lt(ds, cfg.coco_lt_subsets, Rng::derive(cfg.seed, "coco_lt"));

  ds.save(dir / "dataset.json");
  write_text(dir / "summary.json", summarize(ds).dump(2) + "\n");
  write_text(dir / "stats.json", ds.stats.to_json().dump(2) + "\n");
  write_manifest(dir);
  info("dataset written to " + (dir / "dataset.json").string());
  return 0;
}

int cmd_train(const CommonArgs& args, const std::string& dataset_path) {
  const RunConfig cfg = load_config(args);
  const fs::path dir = resolve_out(args, "train");
  fs::create_directories(dir);
  cfg.save_resolved(dir / "config.resolved");

  const SynthDataset ds = SynthDataset::load(dataset_path);
  const TrainResult result =
      train_standard(ds, cfg.head_dims(), cfg.train_schedule, cfg.batch_images,
                     Rng(Rng::derive(cfg.seed, "train")));
  result.params.save(dir / "head.json");
  save_train_log(result.log, dir / "train_log.jsonl");
  write_manifest(dir);
  info("trained head written to " + (dir / "head.json").string());
  return 0;
}

int cmd_calibrate(const CommonArgs& args, const std::string& dataset_path,
                  const std::string& head_path) {
  const RunConfig cfg = load_config(args);
  const fs::path dir = resolve_out(args, "calibrate");
  fs::create_directories(dir);
  cfg.save_resolved(dir / "config.resolved");

  const SynthDataset ds = SynthDataset::load(dataset_path);
  const HeadParams original = HeadParams::load(head_path);
  const CalibConfig calib = cfg.calib_config();
  Rng rng(Rng::derive(cfg.seed, "calibrate"));
  const TrainResult result =
      cfg.calib_loss_kind == LossKind::kCrossEntropy
          ? calibrate(ds, original, calib, rng)
          : calibrate_with_alternative(ds, original, cfg.calib_loss_kind, calib, rng);
  result.params.save(dir / "head_cal.json");
  save_train_log(result.log, dir / "cal_log.jsonl");
  write_manifest(dir);
  info("calibrated head written to " + (dir / "head_cal.json").string());
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& dataset_path,
             const std::string& stats_path, const std::string& head_path,
             const std::string& head_orig_path, const std::string& predictions_path,
             bool emit_predictions) {
  const RunConfig cfg = load_config(args);
  const fs::path dir = resolve_out(args, "eval");
  fs::create_directories(dir);
  cfg.save_resolved(dir / "config.resolved");

  const SynthDataset ds = SynthDataset::load(dataset_path);
  ClassStats stats = ds.stats;
  if (!stats_path.empty()) {
    std::ifstream in(stats_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + stats_path);
    nlohmann::json j;
    in >> j;
    stats = ClassStats::from_json(j);
  }

  PredictionSet preds;
  if (!predictions_path.empty()) {
    preds = PredictionSet::load(predictions_path);
  } else if (!head_orig_path.empty()) {
    const HeadParams cal = HeadParams::load(head_path);
    const HeadParams orig = HeadParams::load(head_orig_path);
    const PredictionSet cal_preds = predict_dataset(cal, ds);
    const PredictionSet orig_preds = predict_dataset(orig, ds);
    preds.proposal_ids = cal_preds.proposal_ids;
    preds.predictions = batch_combine(cal_preds.predictions, orig_preds.predictions,
                                      stats, cfg.combine);
  } else {
    preds = predict_dataset(HeadParams::load(head_path), ds);
  }

  const EvalReport report =
      evaluate(preds, ds, stats, cfg.instance_bins(), cfg.image_sets());
  report.save(dir / "report.json");
  write_text(dir / "report.csv",
             EvalReport::csv_header("run,seed") + "\n" +
                 report.csv_row("eval," + std::to_string(cfg.seed)) + "\n");
  if (emit_predictions) preds.save(dir / "predictions.json");
  write_manifest(dir);
  std::cout << EvalReport::csv_header("run,seed") << '\n'
            << report.csv_row("eval," + std::to_string(cfg.seed)) << '\n';
  return 0;
}

int cmd_compare(const CommonArgs& args, const std::vector<std::string>& report_paths) {
  set_quiet(args.quiet);
  std::vector<EvalReport> reports;
  for (const std::string& p : report_paths) reports.push_back(EvalReport::load(p));

  std::string csv = EvalReport::csv_header("report,seed") + "\n";
  for (std::size_t i = 0; i < reports.size(); ++i)
    csv += reports[i].csv_row(fs::path(report_paths[i]).filename().string() + ",-") + "\n";

  std::cout << csv;
  if (reports.size() >= 2) {
    const nlohmann::json cmp = compare(reports.front(), reports.back());
    std::cout << "deltas (last vs first): " << cmp.dump(2) << '\n';
    if (!args.out_dir.empty()) {
      const fs::path dir(args.out_dir);
      fs::create_directories(dir);
      write_text(dir / "compare.csv", csv);
      write_text(dir / "compare.json", cmp.dump(2) + "\n");
    }
  }
  return 0;
}

int cmd_ablate(const CommonArgs& args, const std::string& kind_name,
               const std::string& grid_csv) {
  const RunConfig cfg = load_config(args);
  const fs::path dir = resolve_out(args, "ablate_" + kind_name);
  fs::create_directories(dir);
  cfg.save_resolved(dir / "config.resolved");

  std::vector<std::string> grid;
  {
    std::stringstream ss(grid_csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) grid.push_back(tok);
  }

  const std::uint64_t ds_seed = Rng::derive(cfg.seed, "dataset");
  const SynthDataset train_ds = generate(cfg.synth_config(ds_seed));
  const std::vector<std::int64_t> val_counts(
      static_cast<std::size_t>(cfg.synth.num_classes), cfg.val_instances_per_class);
  const SynthDataset val_ds =
      generate_like(train_ds, val_counts, Rng::derive(cfg.seed, "valset"));
  const TrainResult original =
      train_standard(train_ds, cfg.head_dims(), cfg.train_schedule, cfg.batch_images,
                     Rng(Rng::derive(cfg.seed, "train")));

  SweepContext ctx;
  ctx.train = &train_ds;
  ctx.val = &val_ds;
  ctx.original = &original.params;
  ctx.calib = cfg.calib_config();
  ctx.combine = cfg.combine;
  ctx.instance_bins = cfg.instance_bins();
  ctx.image_sets = cfg.image_sets();
  ctx.seed = cfg.seed;

  const std::string csv = sweep(sweep_kind_from_string(kind_name), grid, ctx);
  write_text(dir / "sweep.csv", csv);
  write_manifest(dir);
  std::cout << csv;
  return 0;
}

int cmd_repro_run(const CommonArgs& args, const std::string& name) {
  const fs::path out = resolve_out(args, "repro");
  std::vector<std::string> names;
  if (name == "all")
    names = repro_experiment_names();
  else
    names.push_back(name);

  bool all_pass = true;
  for (const std::string& n : names) {
    RunConfig cfg;
    if (!args.config_path.empty()) cfg = RunConfig::parse_file(args.config_path);
    set_quiet(args.quiet);
    try {
      const ReproResult r = run_repro(n, cfg, out, args.seed);
      for (const auto& [vname, pass] : r.verdict_list) {
        std::cout << (pass ? "PASS " : "FAIL ") << n << ": " << vname << '\n';
        all_pass &= pass;
      }
    } catch (const std::exception& e) {
      std::cerr << "repro " << n << " failed: " << e.what() << '\n';
      all_pass = false;
    }
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-tail classifier calibration laboratory"};
  app.require_subcommand(1);

  CommonArgs synth_args;
  std::string prototypes_from;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(synth_cmd, synth_args);
  synth_cmd->add_option("--prototypes-from", prototypes_from,
                        "Reuse prototypes and feature geometry from this dataset");

  CommonArgs train_args;
  std::string train_dataset;
  CLI::App* train_cmd = app.add_subcommand("train", "Standard head training");
  add_common(train_cmd, train_args);
  train_cmd->add_option("--dataset", train_dataset, "Training dataset JSON")->required();

  CommonArgs cal_args;
  std::string cal_dataset;
  std::string cal_head;
  CLI::App* cal_cmd = app.add_subcommand("calibrate", "Calibrate a trained head");
  add_common(cal_cmd, cal_args);
  cal_cmd->add_option("--dataset", cal_dataset, "Training dataset JSON")->required();
  cal_cmd->add_option("--head", cal_head, "Original head JSON")->required();

  CommonArgs eval_args;
  std::string eval_dataset;
  std::string eval_stats;
  std::string eval_head;
  std::string eval_head_orig;
  std::string eval_predictions;
  bool emit_predictions = false;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate predictions on a dataset");
  add_common(eval_cmd, eval_args);
  eval_cmd->add_option("--dataset", eval_dataset, "Evaluation dataset JSON")->required();
  eval_cmd->add_option("--stats", eval_stats,
                       "Training ClassStats JSON (defaults to the dataset's own)");
  eval_cmd->add_option("--head", eval_head, "Head JSON (calibrated head for dual schemes)");
  eval_cmd->add_option("--head-orig", eval_head_orig, "Original head JSON for dual schemes");
  eval_cmd->add_option("--predictions", eval_predictions, "Pre-computed predictions JSON");
  eval_cmd->add_flag("--emit-predictions", emit_predictions,
                     "Write the evaluated predictions next to the report");

  CommonArgs compare_args;
  std::vector<std::string> compare_paths;
  CLI::App* compare_cmd = app.add_subcommand("compare", "Compare evaluation reports");
  compare_cmd->add_option("reports", compare_paths, "Report JSON paths")
      ->required()
      ->expected(-2);
  compare_cmd->add_option("--out", compare_args.out_dir, "Optional output directory");
  compare_cmd->add_flag("--quiet", compare_args.quiet, "Suppress log output");

  CommonArgs ablate_args;
  std::string ablate_kind;
  std::string ablate_grid;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "Sweep one knob over a grid");
  add_common(ablate_cmd, ablate_args);
  ablate_cmd
      ->add_option("--kind", ablate_kind, "One of cal_steps, lr, T, layers, head_init")
      ->required();
  ablate_cmd->add_option("--grid", ablate_grid, "Comma-separated grid values")->required();

  CommonArgs repro_args;
  std::string repro_name;
  CLI::App* repro_cmd =
      app.add_subcommand("repro", "Run a named experiment end to end");
  add_common(repro_cmd, repro_args);
  repro_cmd
      ->add_option("experiment", repro_name,
                   "fig1c, table3, table4, table7, fig4a, fig4b, fig4c, table8, table9, or all")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth_args, prototypes_from);
    if (train_cmd->parsed()) return cmd_train(train_args, train_dataset);
    if (cal_cmd->parsed()) return cmd_calibrate(cal_args, cal_dataset, cal_head);
    if (eval_cmd->parsed())
      return cmd_eval(eval_args, eval_dataset, eval_stats, eval_head, eval_head_orig,
                      eval_predictions, emit_predictions);
    if (compare_cmd->parsed()) return cmd_compare(compare_args, compare_paths);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_args, ablate_kind, ablate_grid);
    if (repro_cmd->parsed()) return cmd_repro_run(repro_args, repro_name);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
