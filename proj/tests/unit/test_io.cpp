#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "detune/hpo/campaign.hpp"
#include "detune/io/csv.hpp"
#include "detune/io/files.hpp"
#include "detune/io/format.hpp"
#include "detune/io/json.hpp"
#include "detune/io/labels.hpp"
#include "detune/rng.hpp"

using namespace detune;
using namespace detune::io;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("detune_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string error_of(const std::string& text, bool preds = false) {
  try {
    if (preds) {
      parse_predictions_text(text, "f.txt");
    } else {
      parse_annotations_text(text, "f.txt");
    }
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(0.002373), "0.002373");
  Stream rng(1, "fmt");
  for (int i = 0; i < 10000; ++i) {
    const double v = std::ldexp(rng.uniform(), static_cast<int>(rng.below(80)) - 40);
    double back = 0.0;
    ASSERT_TRUE(parse_double(format_double(v), back));
    ASSERT_EQ(back, v);
  }
  double out = 0.0;
  EXPECT_FALSE(parse_double("0.5x", out));
  EXPECT_FALSE(parse_double("", out));
}

TEST(Labels, CenterToCorner) {
  const auto g = parse_annotations_text("0 0.5 0.5 0.2 0.2\n", "a.txt");
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0].class_id, 0);
  EXPECT_DOUBLE_EQ(g[0].box.x_min, 0.4);
  EXPECT_DOUBLE_EQ(g[0].box.y_min, 0.4);
  EXPECT_DOUBLE_EQ(g[0].box.x_max, 0.6);
  EXPECT_DOUBLE_EQ(g[0].box.y_max, 0.6);
}

TEST(Labels, EmptyAndBlankLines) {
  EXPECT_TRUE(parse_annotations_text("", "a.txt").empty());
  EXPECT_EQ(parse_annotations_text("\n0 0.5 0.5 0.1 0.1\r\n\n", "a.txt").size(), 1u);
}

TEST(Labels, ErrorsNameFileAndLine) {
  EXPECT_EQ(error_of("0 0.5 0.5 -0.1 0.2"), "f.txt:1: negative width");
  EXPECT_EQ(error_of("0 0.5 0.5 0.1 0.2\n0 0.5 0.5 0.1"), "f.txt:2: expected 5 fields, got 4");
  EXPECT_NE(error_of("0 abc 0.5 0.1 0.2").find("f.txt:1: non-numeric cx"), std::string::npos);
  EXPECT_EQ(error_of("0 1.5 0.5 0.1 0.2"), "f.txt:1: cx outside [0, 1]");
  EXPECT_NE(error_of("x 0.5 0.5 0.1 0.2").find("non-integer class"), std::string::npos);
  EXPECT_EQ(error_of("0 0.5 0.5 0.2 0.2 1.5", true), "f.txt:1: confidence outside [0, 1]");
  EXPECT_EQ(error_of("0 0.5 0.5 0.2 0.2", true), "f.txt:1: expected 6 fields, got 5");
}

TEST(Labels, PredictionsCarryConfidence) {
  const auto d = parse_predictions_text("0 0.5 0.5 0.2 0.2 0.9\n", "p.txt");
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].confidence, 0.9);
}

TEST(Labels, FormatParseRoundTrip) {
  Stream rng(2, "labels");
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<GroundTruth> gts;
    for (int i = 0; i < 4; ++i) {
      const double x0 = rng.uniform(0.0, 0.8);
      const double y0 = rng.uniform(0.0, 0.8);
      gts.push_back({{x0, y0, x0 + rng.uniform(0.0, 0.2), y0 + rng.uniform(0.0, 0.2)}, static_cast<int>(rng.below(3))});
    }
    const auto back = parse_annotations_text(format_annotations(gts), "rt.txt");
    ASSERT_EQ(back.size(), gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) {
      ASSERT_EQ(back[i].class_id, gts[i].class_id);
      ASSERT_NEAR(back[i].box.x_min, gts[i].box.x_min, 1e-9);
      ASSERT_NEAR(back[i].box.y_min, gts[i].box.y_min, 1e-9);
      ASSERT_NEAR(back[i].box.x_max, gts[i].box.x_max, 1e-9);
      ASSERT_NEAR(back[i].box.y_max, gts[i].box.y_max, 1e-9);
    }
  }
}

TEST(Labels, DirectoryReading) {
  const auto dir = scratch("labels");
  write_atomic(dir / "b.txt", "0 0.5 0.5 0.2 0.2\n");
  write_atomic(dir / "a.txt", "");
  write_atomic(dir / "notes.md", "ignored");
  const auto m = read_annotation_dir(dir);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_TRUE(m.at("a").empty());
  EXPECT_EQ(m.at("b").size(), 1u);
  EXPECT_THROW(read_annotation_dir(dir / "missing"), DataError);
  fs::remove_all(dir);
}

TEST(Files, AtomicWriteLeavesNoTempFile) {
  const auto dir = scratch("atomic");
  const auto target = dir / "nested" / "out.json";
  write_atomic(target, "first");
  write_atomic(target, "second");
  EXPECT_EQ(read_file(target), "second");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(target.parent_path())) ++entries;
  EXPECT_EQ(entries, 1u);
  EXPECT_THROW(read_file(dir / "absent"), DataError);
  // A directory in the way makes the write fail without leaving a partial file.
  fs::create_directories(dir / "blocked");
  EXPECT_THROW(write_atomic(dir / "blocked", "x"), DataError);
  EXPECT_FALSE(fs::exists(dir / "blocked.tmp"));
  fs::remove_all(dir);
}

TEST(Csv, HeaderIsExact) {
  const std::vector<hpo::TrialRecord> none;
  EXPECT_EQ(leaderboard_csv(none),
            "scale,optimizer,precision,recall,map50_train,map50_val,map50_test,wall_time_s,status\n");
}

TEST(Csv, RoundTripIsExact) {
  Stream rng(3, "csv");
  std::vector<hpo::TrialRecord> recs;
  for (int i = 0; i < 200; ++i) {
    hpo::TrialRecord r;
    r.config.scale = std::string(1, "nsmlx"[rng.below(5)]);
    r.config.optimizer = kAllOptimizers[rng.below(kAllOptimizers.size())];
    r.metrics = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    r.wall_time_s = rng.uniform(0.0, 1e4);
    r.status = rng.bernoulli(0.2) ? hpo::TrialStatus::Diverged : hpo::TrialStatus::Ok;
    recs.push_back(r);
  }
  recs[0].metrics.precision = std::numeric_limits<double>::denorm_min();
  recs[1].metrics.recall = 1.0 / 3.0;
  const auto rows = parse_leaderboard_csv(leaderboard_csv(recs));
  ASSERT_EQ(rows.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) ASSERT_EQ(rows[i], to_row(recs[i]));
}

TEST(Csv, ParseErrors) {
  EXPECT_THROW(parse_leaderboard_csv(""), DataError);
  EXPECT_THROW(parse_leaderboard_csv("scale,optimizer\n"), DataError);
  const std::string head(kLeaderboardHeader);
  try {
    parse_leaderboard_csv(head + "\nm,sgd,1,1,1,1,1,1,ok\nm,sgd,1,1\n", "lb.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.file(), "lb.csv");
  }
  EXPECT_THROW(parse_leaderboard_csv(head + "\nm,lion,1,1,1,1,1,1,ok\n"), DataError);
  EXPECT_THROW(parse_leaderboard_csv(head + "\nm,sgd,1,one,1,1,1,1,ok\n"), DataError);
}

TEST(Csv, CurveTables) {
  PRCurve c;
  c.points = {{0.5, 1.0, 0.9}, {1.0, 2.0 / 3.0, 0.4}};
  EXPECT_EQ(pr_curve_csv(c), "recall,precision,confidence\n0.5,1,0.9\n1,0.6666666666666666,0.4\n");
  ConfidenceSweep s;
  s.rows = {{0.0, 0.5, 1.0, 2.0 / 3.0}, {0.5, 1.0, 1.0, 1.0}};
  EXPECT_EQ(confidence_curve_csv(s, "recall"), "confidence,recall\n0,1\n0.5,1\n");
  EXPECT_THROW(confidence_curve_csv(s, "auc"), InvalidArgument);
}

TEST(Json, ConfigAndSpaceRoundTrip) {
  hpo::TrialConfig c;
  c.label = "search-07";
  c.scale = "l";
  c.optimizer = OptimizerKind::NAdam;
  c.hyper.lr0 = 0.0031415926535;
  c.hyper.canonical_epsilon = true;
  c.dropout = 0.25;
  c.seed = 99;
  EXPECT_EQ(config_from_json(json::parse(config_to_json(c).dump())), c);
  const auto space = hpo::reference_search_space();
  const auto back = space_from_json(json::parse(space_to_json(space).dump()));
  ASSERT_EQ(back.axes.size(), space.axes.size());
  for (std::size_t i = 0; i < space.axes.size(); ++i) {
    EXPECT_EQ(back.axes[i].name, space.axes[i].name);
    EXPECT_EQ(back.axes[i].lower, space.axes[i].lower);
    EXPECT_EQ(back.axes[i].upper, space.axes[i].upper);
    EXPECT_EQ(back.axes[i].law, space.axes[i].law);
  }
}

TEST(Json, ProtocolRoundTripIsCanonical) {
  auto p = hpo::paper_protocol(7);
  p.step2->paper_faithful = true;
  const std::string once = dump_canonical(protocol_to_json(p));
  const std::string twice = dump_canonical(protocol_to_json(protocol_from_json(json::parse(once))));
  EXPECT_EQ(once, twice);
  EXPECT_THROW(protocol_from_json(json::parse(R"({"step2": {"mode": "grid"}})")), DataError);
  EXPECT_THROW(protocol_from_json(json::parse(R"({"step1": {"scales": 3}})")), DataError);
  EXPECT_THROW(protocol_from_json(json::parse(R"({"step1": null})")), DataError);
}

TEST(Json, CheckedInSearchSpaceMatchesReference) {
  const auto text = read_file(fs::path(DETUNE_SOURCE_DIR) / "configs" / "random_search_space.json");
  const auto space = space_from_json(json::parse(text));
  const auto ref = hpo::reference_search_space();
  ASSERT_EQ(space.axes.size(), ref.axes.size());
  for (std::size_t i = 0; i < ref.axes.size(); ++i) {
    EXPECT_EQ(space.axes[i].name, ref.axes[i].name);
    EXPECT_EQ(space.axes[i].lower, ref.axes[i].lower);
    EXPECT_EQ(space.axes[i].upper, ref.axes[i].upper);
  }
}

TEST(Json, ManifestHasNoWallTimeAndSortedKeys) {
  hpo::Protocol p;
  p.step1 = hpo::Step1{{"n", "s"}, {OptimizerKind::SGD}};
  const hpo::Trainer t = [](const hpo::TrialConfig& c) {
    hpo::TrialOutcome o;
    o.metrics.map50_val = c.scale == "s" ? 0.7 : 0.6;
    o.work = 3;
    return o;
  };
  Stream rng(0, "search");
  const auto report = hpo::run_campaign(p, t, rng);
  const auto text = dump_canonical(manifest_json(report, p));
  EXPECT_EQ(text.find("wall_time"), std::string::npos);
  const auto j = json::parse(text);
  EXPECT_EQ(j.at("ap_integration"), kApIntegration);
  EXPECT_EQ(j.at("version"), kToolkitVersion);
  EXPECT_EQ(j.at("selected").at("config").at("scale"), "s");
  EXPECT_TRUE(j.contains("environment"));
  EXPECT_EQ(dump_canonical(j), text);
}
