// detune: synthetic crack data, detection evaluation and tuning campaigns.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "detune/cli/commands.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2 };

void add_run_flags(CLI::App* sub, detune::cli::RunFlags& f, std::size_t& epochs) {
  sub->add_option("--seed", f.seed, "Master seed")->capture_default_str();
  sub->add_option("--out", f.out, "Output directory")->capture_default_str();
  sub->add_option("--workers", f.workers, "Concurrent trials")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--epochs", epochs, "Override the epoch count of every trial")->check(CLI::PositiveNumber);
  sub->add_option("--train-size", f.data.train_size, "Training scenes")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--val-size", f.data.val_size, "Validation scenes")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--test-size", f.data.test_size, "Test scenes")->check(CLI::PositiveNumber)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = detune::cli;
  CLI::App app{"detune: optimizer and hyperparameter studies on a synthetic crack detector"};
  app.require_subcommand(1);

  cli::GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write synthetic scenes and YOLO labels");
  gen_cmd->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->capture_default_str();
  gen_cmd->add_option("--scale", gen.scale, "Detector scale (n, s, m, l, x)")->capture_default_str();
  gen_cmd->add_option("--train-size", gen.data.train_size)->capture_default_str();
  gen_cmd->add_option("--val-size", gen.data.val_size)->capture_default_str();
  gen_cmd->add_option("--test-size", gen.data.test_size)->capture_default_str();

  cli::EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score prediction label files against ground truth");
  eval_cmd->add_option("--preds", ev.preds, "Prediction label directory")->required();
  eval_cmd->add_option("--gts", ev.gts, "Ground-truth label directory")->required();
  eval_cmd->add_option("--out", ev.out, "Report directory")->capture_default_str();
  eval_cmd->add_option("--iou-thresh", ev.iou_thresh, "IoU threshold for matching")->capture_default_str();
  eval_cmd->add_option("--conf-thresh", ev.conf_thresh, "Confidence for the reported P/R/F1")->capture_default_str();

  std::size_t epochs = 0;
  cli::SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Every scale x optimizer with default hyperparameters");
  add_run_flags(sweep_cmd, sweep.run, epochs);
  sweep_cmd->add_option("--scales", sweep.scales, "Scales")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--optimizers", sweep.optimizers, "Optimizers")->delimiter(',')->capture_default_str();

  cli::OfatOptions ofat;
  auto* ofat_cmd = app.add_subcommand("ofat", "The four H-1..H-4 configuration sets x optimizers");
  add_run_flags(ofat_cmd, ofat.run, epochs);
  ofat_cmd->add_option("--scale", ofat.scale)->capture_default_str();
  ofat_cmd->add_option("--optimizers", ofat.optimizers)->delimiter(',')->capture_default_str();
  ofat_cmd->add_flag("--paper-faithful", ofat.paper_faithful, "Skip H-4 with Adam and AdamW");

  cli::SearchOptions search;
  std::string space_path;
  auto* search_cmd = app.add_subcommand("search", "Random search over a hyperparameter space");
  add_run_flags(search_cmd, search.run, epochs);
  search_cmd->add_option("--trials", search.trials)->check(CLI::PositiveNumber)->capture_default_str();
  search_cmd->add_option("--space", space_path, "Search space JSON (default: built-in ranges)");
  search_cmd->add_option("--scale", search.scale)->capture_default_str();
  search_cmd->add_option("--optimizer", search.optimizer)->capture_default_str();

  cli::CampaignOptions camp;
  auto* camp_cmd = app.add_subcommand("campaign", "Sweep, configuration sets, then random search");
  add_run_flags(camp_cmd, camp.run, epochs);
  camp_cmd->add_option("--protocol", camp.protocol, "'paper' or a protocol JSON file")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  auto with_epochs = [&](cli::RunFlags& f) {
    if (epochs > 0) f.epochs = epochs;
  };

  try {
    if (gen_cmd->parsed()) {
      const auto ds = cli::cmd_gen_data(gen);
      std::cout << "wrote " << ds.train.scenes.size() + ds.val.scenes.size() + ds.test.scenes.size()
                << " scenes to " << gen.out.string() << "\n";
    } else if (eval_cmd->parsed()) {
      const auto r = cli::cmd_eval(ev);
      std::cout << "images " << r.images << "  mAP " << r.map << "  mAP50-95 " << r.map50_95 << "  P " << r.precision
                << "  R " << r.recall << "  best F1 " << r.best_f1 << " @ " << r.best_f1_confidence << "\n";
    } else if (sweep_cmd->parsed()) {
      with_epochs(sweep.run);
      cli::cmd_sweep(sweep);
    } else if (ofat_cmd->parsed()) {
      with_epochs(ofat.run);
      cli::cmd_ofat(ofat);
    } else if (search_cmd->parsed()) {
      with_epochs(search.run);
      if (!space_path.empty()) search.space = space_path;
      cli::cmd_search(search);
    } else if (camp_cmd->parsed()) {
      with_epochs(camp.run);
      cli::cmd_campaign(camp);
    }
  } catch (const detune::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
