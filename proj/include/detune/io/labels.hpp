#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detune/error.hpp"
#include "detune/geometry.hpp"
#include "detune/io/files.hpp"
#include "detune/io/format.hpp"

// YOLO label files: one object per line, `<class> <cx> <cy> <w> <h>` in
// normalized image coordinates; prediction files append `<conf>`. Boxes are
// converted to corner form here and nowhere else.

namespace detune::io {

struct AnnotationRecord {
  int class_id = 0;
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  BBox corners() const {
    return {std::clamp(cx - 0.5 * w, 0.0, 1.0), std::clamp(cy - 0.5 * h, 0.0, 1.0),
            std::clamp(cx + 0.5 * w, 0.0, 1.0), std::clamp(cy + 0.5 * h, 0.0, 1.0)};
  }

  static AnnotationRecord from_box(const BBox& b, int class_id) {
    return {class_id, 0.5 * (b.x_min + b.x_max), 0.5 * (b.y_min + b.y_max), b.width(), b.height()};
  }
};

namespace detail {

inline std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline double unit_field(std::string_view tok, const char* name, const std::string& file, std::size_t line) {
  double v = 0.0;
  if (!parse_double(tok, v)) throw DataError(file, line, std::string("non-numeric ") + name + " '" + std::string(tok) + "'");
  if (!std::isfinite(v)) throw DataError(file, line, std::string("non-finite ") + name);
  if (v < 0.0 && (std::string_view(name) == "width" || std::string_view(name) == "height")) {
    throw DataError(file, line, std::string("negative ") + name);
  }
  if (v < 0.0 || v > 1.0) throw DataError(file, line, std::string(name) + " outside [0, 1]");
  return v;
}

/// Parses one record; `with_confidence` selects the six-field prediction form.
inline AnnotationRecord parse_record(const std::vector<std::string_view>& f, bool with_confidence,
                                     double* confidence, const std::string& file, std::size_t line) {
  const std::size_t expected = with_confidence ? 6 : 5;
  if (f.size() != expected) {
    throw DataError(file, line, "expected " + std::to_string(expected) + " fields, got " + std::to_string(f.size()));
  }
  long long cls = 0;
  if (!parse_int(f[0], cls)) throw DataError(file, line, "non-integer class id '" + std::string(f[0]) + "'");
  if (cls < 0 || cls > 1'000'000) throw DataError(file, line, "class id out of range");
  AnnotationRecord r;
  r.class_id = static_cast<int>(cls);
  r.cx = unit_field(f[1], "cx", file, line);
  r.cy = unit_field(f[2], "cy", file, line);
  r.w = unit_field(f[3], "width", file, line);
  r.h = unit_field(f[4], "height", file, line);
  if (with_confidence) *confidence = unit_field(f[5], "confidence", file, line);
  return r;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    fn(text.substr(pos, end - pos), line_no);
    pos = end + 1;
  }
}

}  // namespace detail

inline std::vector<GroundTruth> parse_annotations_text(std::string_view text, const std::string& source) {
  std::vector<GroundTruth> out;
  detail::for_each_line(text, [&](std::string_view line, std::size_t n) {
    const auto f = detail::tokens(line);
    if (f.empty()) return;
    const auto r = detail::parse_record(f, false, nullptr, source, n);
    out.push_back({r.corners(), r.class_id});
  });
  return out;
}

inline std::vector<Detection> parse_predictions_text(std::string_view text, const std::string& source) {
  std::vector<Detection> out;
  detail::for_each_line(text, [&](std::string_view line, std::size_t n) {
    const auto f = detail::tokens(line);
    if (f.empty()) return;
    double conf = 0.0;
    const auto r = detail::parse_record(f, true, &conf, source, n);
    out.push_back({r.corners(), r.class_id, conf});
  });
  return out;
}

inline std::vector<GroundTruth> parse_annotations(const fs::path& path) {
  return parse_annotations_text(read_file(path), path.string());
}

inline std::vector<Detection> parse_predictions(const fs::path& path) {
  return parse_predictions_text(read_file(path), path.string());
}

inline std::string format_annotations(std::span<const GroundTruth> gts) {
  std::string out;
  for (const auto& g : gts) {
    const auto r = AnnotationRecord::from_box(g.box, g.class_id);
    out += std::to_string(r.class_id) + ' ' + format_double(r.cx) + ' ' + format_double(r.cy) + ' ' +
           format_double(r.w) + ' ' + format_double(r.h) + '\n';
  }
  return out;
}

inline std::string format_predictions(std::span<const Detection> dets) {
  std::string out;
  for (const auto& d : dets) {
    const auto r = AnnotationRecord::from_box(d.box, d.class_id);
    out += std::to_string(r.class_id) + ' ' + format_double(r.cx) + ' ' + format_double(r.cy) + ' ' +
           format_double(r.w) + ' ' + format_double(r.h) + ' ' + format_double(d.confidence) + '\n';
  }
  return out;
}

/// Every `*.txt` file in `dir`, keyed by file stem (sorted).
inline std::map<std::string, fs::path> label_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      out.emplace(entry.path().stem().string(), entry.path());
    }
  }
  return out;
}

inline std::map<std::string, std::vector<GroundTruth>> read_annotation_dir(const fs::path& dir) {
  std::map<std::string, std::vector<GroundTruth>> out;
  for (const auto& [stem, path] : label_files(dir)) out.emplace(stem, parse_annotations(path));
  return out;
}

inline std::map<std::string, std::vector<Detection>> read_prediction_dir(const fs::path& dir) {
  std::map<std::string, std::vector<Detection>> out;
  for (const auto& [stem, path] : label_files(dir)) out.emplace(stem, parse_predictions(path));
  return out;
}

}  // namespace detune::io
