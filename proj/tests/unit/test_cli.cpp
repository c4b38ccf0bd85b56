#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "detune/cli/commands.hpp"
#include "support/oracles.hpp"

using namespace detune;
using namespace detune::cli;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("detune_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DETUNE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RunFlags tiny_run(const fs::path& out) {
  RunFlags f;
  f.out = out;
  f.seed = 3;
  f.workers = 4;
  f.epochs = 2;
  f.data.train_size = 16;
  f.data.val_size = 8;
  f.data.test_size = 4;
  return f;
}

const fs::path kFixture = fs::path(DETUNE_SOURCE_DIR) / "tests" / "fixtures" / "eval";

}  // namespace

TEST(GenData, LabelsRoundTripWithinTolerance) {
  const auto dir = scratch("gen");
  GenDataOptions o;
  o.out = dir;
  o.seed = 11;
  o.data.train_size = 20;
  o.data.val_size = 10;
  o.data.test_size = 5;
  const auto ds = cmd_gen_data(o);
  std::size_t boxes = 0;
  for (const auto* split : {&ds.train, &ds.val, &ds.test}) {
    const auto parsed = io::read_annotation_dir(dir / split->name / "labels");
    ASSERT_EQ(parsed.size(), split->scenes.size());
    for (std::size_t i = 0; i < split->scenes.size(); ++i) {
      const auto& want = split->scenes[i].ground_truths;
      const auto& got = parsed.at(scene_stem(i));
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t k = 0; k < want.size(); ++k) {
        ASSERT_NEAR(got[k].box.x_min, want[k].box.x_min, 1e-9);
        ASSERT_NEAR(got[k].box.y_min, want[k].box.y_min, 1e-9);
        ASSERT_NEAR(got[k].box.x_max, want[k].box.x_max, 1e-9);
        ASSERT_NEAR(got[k].box.y_max, want[k].box.y_max, 1e-9);
        ++boxes;
      }
    }
  }
  EXPECT_GT(boxes, 35u);
  EXPECT_TRUE(fs::exists(dir / "dataset.json"));
  EXPECT_TRUE(fs::exists(dir / "val" / "features" / "scene_000009.csv"));
  fs::remove_all(dir);
}

TEST(Eval, PerfectPredictions) {
  const auto dir = scratch("perfect");
  GenDataOptions g;
  g.out = dir / "data";
  g.data.train_size = 1;
  g.data.val_size = 1;
  g.data.test_size = 12;
  const auto ds = cmd_gen_data(g);
  for (std::size_t i = 0; i < ds.test.scenes.size(); ++i) {
    std::vector<Detection> dets;
    for (const auto& gt : ds.test.scenes[i].ground_truths) dets.push_back({gt.box, gt.class_id, 1.0});
    io::write_atomic(dir / "preds" / (scene_stem(i) + ".txt"), io::format_predictions(dets));
  }
  EvalOptions e;
  e.preds = dir / "preds";
  e.gts = dir / "data" / "test" / "labels";
  e.out = dir / "eval";
  const auto r = cmd_eval(e);
  EXPECT_EQ(r.map50, 1.0);
  EXPECT_EQ(r.best_f1, 1.0);
  EXPECT_EQ(r.images, 12u);
  for (const char* f : {"metrics.json", "pr_curve.csv", "precision_confidence.csv", "recall_confidence.csv",
                        "f1_confidence.csv"}) {
    EXPECT_TRUE(fs::exists(e.out / f)) << f;
  }
  const auto j = json::parse(io::read_file(e.out / "metrics.json"));
  EXPECT_EQ(j.at("map50").get<double>(), 1.0);
  fs::remove_all(dir);
}

TEST(Eval, EmptyPredictionDirectoryGivesZeroRecall) {
  const auto dir = scratch("empty");
  fs::create_directories(dir / "preds");
  EvalOptions e;
  e.preds = dir / "preds";
  e.gts = kFixture / "gts";
  e.out = dir / "eval";
  const auto r = cmd_eval(e);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.map50, 0.0);
  fs::remove_all(dir);
}

TEST(Eval, FixtureMatchesOracle) {
  const auto dir = scratch("fixture");
  EvalOptions e;
  e.preds = kFixture / "preds";
  e.gts = kFixture / "gts";
  e.out = dir;
  const auto r = cmd_eval(e);
  // By confidence: 0.95 TP, 0.9 FP, 0.85 FP (duplicate), 0.7 FP (IoU ~0.1), 0.6 TP, 0.3 TP.
  const std::vector<bool> seq{true, false, false, false, true, true};
  EXPECT_NEAR(r.map50, oracle::recall_level_ap(seq, 4), 1e-9);
  EXPECT_NEAR(r.map50, oracle::sampled_ap(seq, 4), 1e-3);
  EXPECT_NEAR(r.precision, 0.5, 1e-9);
  EXPECT_NEAR(r.recall, 0.75, 1e-9);
  fs::remove_all(dir);
}

TEST(Eval, InputErrors) {
  const auto dir = scratch("errors");
  io::write_atomic(dir / "preds" / "orphan.txt", "0 0.5 0.5 0.1 0.1 0.9\n");
  EvalOptions e;
  e.preds = dir / "preds";
  e.gts = kFixture / "gts";
  e.out = dir / "eval";
  try {
    cmd_eval(e);
    FAIL();
  } catch (const DataError& err) {
    EXPECT_NE(std::string(err.what()).find("orphan"), std::string::npos);
  }
  e.gts = dir / "missing";
  EXPECT_THROW(cmd_eval(e), DataError);
  EXPECT_FALSE(fs::exists(dir / "eval" / "metrics.json"));
  fs::remove_all(dir);
}

TEST(Commands, SweepWritesThirtyRows) {
  const auto dir = scratch("sweep");
  SweepOptions o;
  o.run = tiny_run(dir);
  std::ostringstream log;
  const auto report = cmd_sweep(o, log);
  const auto rows = io::parse_leaderboard_csv(io::read_file(dir / "leaderboard.csv"));
  EXPECT_EQ(rows.size(), 30u);
  EXPECT_EQ(io::parse_leaderboard_csv(io::read_file(dir / "step1_leaderboard.csv")).size(), 30u);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_NE(log.str().find("selected:"), std::string::npos);
  EXPECT_EQ(report.steps.size(), 1u);
  fs::remove_all(dir);
}

TEST(Commands, ManifestIsByteIdenticalOnRerun) {
  const auto a = scratch("rerun_a");
  const auto b = scratch("rerun_b");
  SearchOptions o;
  o.trials = 4;
  o.run = tiny_run(a);
  std::ostringstream log;
  cmd_search(o, log);
  o.run.out = b;
  o.run.workers = 1;
  cmd_search(o, log);
  EXPECT_EQ(io::read_file(a / "manifest.json"), io::read_file(b / "manifest.json"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Commands, OfatFaithfulRunsTen) {
  const auto dir = scratch("ofat");
  OfatOptions o;
  o.run = tiny_run(dir);
  o.paper_faithful = true;
  std::ostringstream log;
  const auto r = cmd_ofat(o, log);
  EXPECT_EQ(r.steps[0].trials.size(), 10u);
  fs::remove_all(dir);
}

TEST(Commands, BadFlagsAreInvalidArguments) {
  SweepOptions s;
  s.scales = {"xxl"};
  EXPECT_THROW(cmd_sweep(s), InvalidArgument);
  SweepOptions t;
  t.optimizers = {"lion"};
  t.run.out = scratch("bad");
  EXPECT_THROW(cmd_sweep(t), InvalidArgument);
  EXPECT_THROW(load_protocol("/nonexistent/protocol.json", 0), DataError);
}

TEST(Executable, ExitCodes) {
  const auto dir = scratch("exe");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("sweep --scales n --optimizers lion --out " + dir.string()), 1);
  EXPECT_EQ(run_cli("eval --preds " + (dir / "none").string() + " --gts " + (dir / "none").string()), 2);
  EXPECT_EQ(run_cli("gen-data --train-size 2 --val-size 1 --test-size 1 --out " + (dir / "d").string()), 0);
  EXPECT_EQ(run_cli("eval --preds " + (dir / "d" / "test" / "labels").string() + " --gts " +
                    (dir / "d" / "test" / "labels").string() + " --out " + (dir / "e").string()),
            2);  // label files lack the confidence column
  EXPECT_EQ(run_cli("eval --preds " + (kFixture / "preds").string() + " --gts " + (kFixture / "gts").string() +
                    " --out " + (dir / "e").string()),
            0);
  fs::remove_all(dir);
}

TEST(Executable, SearchWithCheckedInSpace) {
  const auto dir = scratch("exe_search");
  const auto space = fs::path(DETUNE_SOURCE_DIR) / "configs" / "random_search_space.json";
  ASSERT_EQ(run_cli("search --trials 3 --epochs 1 --train-size 8 --val-size 4 --test-size 2 --space " +
                    space.string() + " --out " + dir.string()),
            0);
  const auto j = json::parse(io::read_file(dir / "manifest.json"));
  const auto& trials = j.at("steps").at(0).at("trials");
  ASSERT_EQ(trials.size(), 3u);
  for (const auto& t : trials) {
    const double lr = t.at("config").at("optimizer").at("lr0").get<double>();
    EXPECT_GE(lr, 1.177e-3);
    EXPECT_LE(lr, 8.838e-3);
  }
  fs::remove_all(dir);
}
