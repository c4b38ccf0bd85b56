#pragma once

#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "detune/error.hpp"
#include "detune/hpo/trial.hpp"
#include "detune/io/format.hpp"
#include "detune/metrics.hpp"

namespace detune::io {

inline constexpr std::string_view kLeaderboardHeader =
    "scale,optimizer,precision,recall,map50_train,map50_val,map50_test,wall_time_s,status";

/// The columns of one leaderboard CSV line.
struct LeaderboardRow {
  std::string scale;
  OptimizerKind optimizer = OptimizerKind::SGD;
  hpo::TrialMetrics metrics;
  double wall_time_s = 0.0;
  hpo::TrialStatus status = hpo::TrialStatus::Ok;

  friend bool operator==(const LeaderboardRow&, const LeaderboardRow&) = default;
};

inline LeaderboardRow to_row(const hpo::TrialRecord& r) {
  return {r.config.scale, r.config.optimizer, r.metrics, r.wall_time_s, r.status};
}

inline std::string leaderboard_csv(std::span<const hpo::TrialRecord> rows) {
  std::string out(kLeaderboardHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += r.config.scale + ',' + std::string(to_string(r.config.optimizer)) + ',' +
           format_double(r.metrics.precision) + ',' + format_double(r.metrics.recall) + ',' +
           format_double(r.metrics.map50_train) + ',' + format_double(r.metrics.map50_val) + ',' +
           format_double(r.metrics.map50_test) + ',' + format_double(r.wall_time_s) + ',' +
           std::string(hpo::to_string(r.status)) + '\n';
  }
  return out;
}

inline std::string leaderboard_csv(const hpo::Leaderboard& board) { return leaderboard_csv(board.rows); }

inline std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::vector<LeaderboardRow> parse_leaderboard_csv(std::string_view text,
                                                         const std::string& source = "<csv>") {
  std::vector<LeaderboardRow> rows;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header_seen) {
      if (line != kLeaderboardHeader) throw DataError(source, line_no, "unexpected leaderboard header");
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_fields(line, ',');
    if (f.size() != 9) {
      throw DataError(source, line_no, "expected 9 fields, got " + std::to_string(f.size()));
    }
    LeaderboardRow row;
    row.scale = std::string(f[0]);
    try {
      row.optimizer = parse_optimizer_kind(f[1]);
      row.status = hpo::parse_status(f[8]);
    } catch (const InvalidArgument& e) {
      throw DataError(source, line_no, e.what());
    }
    double* slots[] = {&row.metrics.precision, &row.metrics.recall, &row.metrics.map50_train,
                       &row.metrics.map50_val, &row.metrics.map50_test, &row.wall_time_s};
    for (std::size_t k = 0; k < 6; ++k) {
      if (!parse_double(f[2 + k], *slots[k])) {
        throw DataError(source, line_no, "non-numeric field '" + std::string(f[2 + k]) + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (!header_seen) throw DataError(source, 1, "missing leaderboard header");
  return rows;
}

// ---------------------------------------------------------------------------
// Curve tables for the evaluation report.

inline std::string pr_curve_csv(const PRCurve& curve) {
  std::string out = "recall,precision,confidence\n";
  for (const auto& p : curve.points) {
    out += format_double(p.recall) + ',' + format_double(p.precision) + ',' + format_double(p.confidence) + '\n';
  }
  return out;
}

/// One of the confidence-indexed curves: value_name is "precision", "recall" or "f1".
inline std::string confidence_curve_csv(const ConfidenceSweep& sweep, std::string_view value_name) {
  std::string out = "confidence," + std::string(value_name) + '\n';
  for (const auto& r : sweep.rows) {
    double v = 0.0;
    if (value_name == "precision") {
      v = r.precision;
    } else if (value_name == "recall") {
      v = r.recall;
    } else if (value_name == "f1") {
      v = r.f1;
    } else {
      throw InvalidArgument("confidence_curve_csv: unknown column " + std::string(value_name));
    }
    out += format_double(r.threshold) + ',' + format_double(v) + '\n';
  }
  return out;
}

}  // namespace detune::io
