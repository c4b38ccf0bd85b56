#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "detune/error.hpp"
#include "detune/geometry.hpp"
#include "detune/rng.hpp"

namespace detune::surrogate {

/// Number of latent quantities a crack cell encodes: presence plus four box offsets.
inline constexpr std::size_t kLatentDim = 5;

struct SceneSpec {
  int grid_size = 12;  // cells per side
  int feature_dim = 10;  // channel 0 is a constant 1, the rest carry signal + noise
  int min_cracks = 1;
  int max_cracks = 3;
  double noise_level = 0.1;
  std::uint64_t seed = 0;  // selects the channel mixing matrix

  void validate() const {
    detail::require(grid_size >= 2, "scene: grid_size must be >= 2");
    detail::require(feature_dim >= 1, "scene: feature_dim must be >= 1");
    detail::require(min_cracks >= 1 && min_cracks <= max_cracks,
                    "scene: need 1 <= min_cracks <= max_cracks");
    detail::require(std::isfinite(noise_level) && noise_level >= 0.0,
                    "scene: noise_level must be >= 0");
  }
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Crack {
  std::vector<Point> vertices;  // polyline, at least two points
  double thickness = 0.03;

  BBox box() const {
    BBox b{1.0, 1.0, 0.0, 0.0};
    for (const auto& p : vertices) {
      b.x_min = std::min(b.x_min, p.x);
      b.y_min = std::min(b.y_min, p.y);
      b.x_max = std::max(b.x_max, p.x);
      b.y_max = std::max(b.y_max, p.y);
    }
    const double h = 0.5 * thickness;
    return {std::max(0.0, b.x_min - h), std::max(0.0, b.y_min - h), std::min(1.0, b.x_max + h),
            std::min(1.0, b.y_max + h)};
  }
};

/// Rendered scene. Features are row-major: cell (row, col) occupies
/// [(row * N + col) * D, ... + D). `owner[cell]` is the index of the crack
/// whose polyline covers the most length inside the cell, or -1.
struct SyntheticScene {
  int grid_size = 0;
  int feature_dim = 0;
  std::vector<double> features;
  std::vector<GroundTruth> ground_truths;
  std::vector<int> owner;

  std::size_t cell_count() const {
    return static_cast<std::size_t>(grid_size) * static_cast<std::size_t>(grid_size);
  }
  const double* cell_features(std::size_t cell) const {
    return features.data() + cell * static_cast<std::size_t>(feature_dim);
  }
  std::size_t positive_count() const {
    return static_cast<std::size_t>(std::count_if(owner.begin(), owner.end(), [](int o) { return o >= 0; }));
  }
};

/// Cell rectangle in normalized coordinates.
inline BBox cell_box(int grid_size, std::size_t cell) {
  const auto n = static_cast<std::size_t>(grid_size);
  const double row = static_cast<double>(cell / n);
  const double col = static_cast<double>(cell % n);
  const double s = 1.0 / grid_size;
  return {col * s, row * s, (col + 1.0) * s, (row + 1.0) * s};
}

/// Length of segment a-b inside rectangle r (Liang-Barsky clipping).
inline double clipped_length(Point a, Point b, const BBox& r) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  double t0 = 0.0;
  double t1 = 1.0;
  const std::array<double, 4> p{-dx, dx, -dy, dy};
  const std::array<double, 4> q{a.x - r.x_min, r.x_max - a.x, a.y - r.y_min, r.y_max - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return 0.0;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 > t1) return 0.0;
  }
  return (t1 - t0) * std::hypot(dx, dy);
}

/// Box regression targets of a cell, in cell units: how far the box extends
/// beyond the cell's left, right, top and bottom edges.
inline std::array<double, 4> box_targets(int grid_size, std::size_t cell, const BBox& gt) {
  const BBox c = cell_box(grid_size, cell);
  const double n = grid_size;
  return {(c.x_min - gt.x_min) * n, (gt.x_max - c.x_max) * n, (c.y_min - gt.y_min) * n,
          (gt.y_max - c.y_max) * n};
}

/// Random crack polylines: a start point, then 2-4 segments of a wandering walk.
inline std::vector<Crack> draw_cracks(const SceneSpec& spec, Stream& rng) {
  spec.validate();
  const int count = rng.uniform_int(spec.min_cracks, spec.max_cracks);
  std::vector<Crack> cracks(static_cast<std::size_t>(count));
  for (auto& c : cracks) {
    Point p{rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85)};
    double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const int segments = rng.uniform_int(2, 4);
    c.vertices.push_back(p);
    for (int s = 0; s < segments; ++s) {
      heading += rng.uniform(-0.6, 0.6);
      const double len = rng.uniform(0.08, 0.2);
      p.x = std::clamp(p.x + len * std::cos(heading), 0.02, 0.98);
      p.y = std::clamp(p.y + len * std::sin(heading), 0.02, 0.98);
      c.vertices.push_back(p);
    }
    c.thickness = rng.uniform(0.02, 0.04);
  }
  return cracks;
}

/// Feature-channel mixing matrix, (feature_dim - 1) x kLatentDim, row-major.
/// Columns are orthonormalized and scaled by sqrt((D - 1) / kLatentDim), so
/// wider scales see the latent signal with proportionally less noise.
inline std::vector<double> mixing_matrix(const SceneSpec& spec) {
  const auto rows = static_cast<std::size_t>(spec.feature_dim - 1);
  std::vector<double> a(rows * kLatentDim, 0.0);
  if (rows == 0) return a;
  Stream rng(spec.seed, "mixing", static_cast<std::uint64_t>(spec.feature_dim));
  for (auto& e : a) e = rng.normal();
  // Modified Gram-Schmidt on columns.
  for (std::size_t c = 0; c < kLatentDim; ++c) {
    for (std::size_t prev = 0; prev < c; ++prev) {
      double dot = 0.0;
      for (std::size_t r = 0; r < rows; ++r) dot += a[r * kLatentDim + c] * a[r * kLatentDim + prev];
      for (std::size_t r = 0; r < rows; ++r) a[r * kLatentDim + c] -= dot * a[r * kLatentDim + prev];
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < rows; ++r) norm += a[r * kLatentDim + c] * a[r * kLatentDim + c];
    norm = std::sqrt(norm);
    for (std::size_t r = 0; r < rows; ++r) {
      a[r * kLatentDim + c] = norm > 1e-9 ? a[r * kLatentDim + c] / norm : 0.0;
    }
  }
  const double gain = 2.0 * std::sqrt(static_cast<double>(rows) / kLatentDim);
  for (auto& e : a) e *= gain;
  return a;
}

/// Cell ownership: the crack with the longest in-cell polyline length.
inline std::vector<int> cell_owners(int grid_size, const std::vector<Crack>& cracks) {
  const auto cells = static_cast<std::size_t>(grid_size) * static_cast<std::size_t>(grid_size);
  std::vector<int> owner(cells, -1);
  std::vector<double> best(cells, 1e-12);
  for (std::size_t k = 0; k < cracks.size(); ++k) {
    const auto& v = cracks[k].vertices;
    std::vector<double> len(cells, 0.0);
    for (std::size_t s = 0; s + 1 < v.size(); ++s) {
      const int c0 = std::clamp(static_cast<int>(std::min(v[s].x, v[s + 1].x) * grid_size), 0, grid_size - 1);
      const int c1 = std::clamp(static_cast<int>(std::max(v[s].x, v[s + 1].x) * grid_size), 0, grid_size - 1);
      const int r0 = std::clamp(static_cast<int>(std::min(v[s].y, v[s + 1].y) * grid_size), 0, grid_size - 1);
      const int r1 = std::clamp(static_cast<int>(std::max(v[s].y, v[s + 1].y) * grid_size), 0, grid_size - 1);
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
          const auto cell = static_cast<std::size_t>(r * grid_size + c);
          len[cell] += clipped_length(v[s], v[s + 1], cell_box(grid_size, cell));
        }
      }
    }
    for (std::size_t cell = 0; cell < cells; ++cell) {
      if (len[cell] > best[cell]) {
        best[cell] = len[cell];
        owner[cell] = static_cast<int>(k);
      }
    }
  }
  return owner;
}

/// Renders given crack geometry into cell features. Crack-owned cells carry
/// the mixed latent (1, targets / (N / 4)); every signal channel gets
/// independent Gaussian noise of standard deviation `noise_level`.
inline SyntheticScene render_scene(const SceneSpec& spec, const std::vector<Crack>& cracks,
                                   Stream& noise_rng) {
  spec.validate();
  SyntheticScene scene;
  scene.grid_size = spec.grid_size;
  scene.feature_dim = spec.feature_dim;
  for (const auto& c : cracks) scene.ground_truths.push_back({c.box(), 0});
  scene.owner = cell_owners(spec.grid_size, cracks);

  const auto d = static_cast<std::size_t>(spec.feature_dim);
  const std::vector<double> mix = mixing_matrix(spec);
  const double target_scale = spec.grid_size / 4.0;
  scene.features.assign(scene.cell_count() * d, 0.0);
  for (std::size_t cell = 0; cell < scene.cell_count(); ++cell) {
    double* f = scene.features.data() + cell * d;
    f[0] = 1.0;
    const int o = scene.owner[cell];
    if (o >= 0) {
      const auto t = box_targets(spec.grid_size, cell, scene.ground_truths[static_cast<std::size_t>(o)].box);
      const std::array<double, kLatentDim> z{1.0, t[0] / target_scale, t[1] / target_scale,
                                             t[2] / target_scale, t[3] / target_scale};
      for (std::size_t r = 0; r + 1 < d; ++r) {
        double acc = 0.0;
        for (std::size_t k = 0; k < kLatentDim; ++k) acc += mix[r * kLatentDim + k] * z[k];
        f[r + 1] = acc;
      }
    }
    if (spec.noise_level > 0.0) {
      for (std::size_t r = 1; r < d; ++r) f[r] += spec.noise_level * noise_rng.normal();
    }
  }
  return scene;
}

/// Draws geometry and renders it from a single stream.
inline SyntheticScene generate_scene(const SceneSpec& spec, Stream& rng) {
  const auto cracks = draw_cracks(spec, rng);
  return render_scene(spec, cracks, rng);
}

/// Detector capacity ladder n < s < m < l < x.
struct DetectorScale {
  std::string name;
  double feature_multiplier = 1.0;
  double grid_multiplier = 1.0;

  int feature_dim(int base_feature_dim) const {
    return static_cast<int>(std::lround(base_feature_dim * feature_multiplier));
  }
  int grid_size(int base_grid_size) const {
    return static_cast<int>(std::lround(base_grid_size * grid_multiplier));
  }
  // Trainable parameters of the per-cell head: objectness + 4 offsets per channel.
  std::size_t param_count(int base_feature_dim) const {
    return static_cast<std::size_t>(feature_dim(base_feature_dim)) * (1 + 4);
  }

  friend bool operator==(const DetectorScale&, const DetectorScale&) = default;
};

// All scales share one grid so every scale trains on identical crack geometry.
inline const std::vector<DetectorScale>& scale_ladder() {
  static const std::vector<DetectorScale> ladder{
      {"n", 1.0, 1.0}, {"s", 4.0 / 3.0, 1.0}, {"m", 5.0 / 3.0, 1.0}, {"l", 2.0, 1.0}, {"x", 8.0 / 3.0, 1.0}};
  return ladder;
}

inline const DetectorScale& parse_scale(std::string_view name) {
  for (const auto& s : scale_ladder()) {
    if (s.name == name) return s;
  }
  throw InvalidArgument("unknown detector scale: " + std::string(name));
}

}  // namespace detune::surrogate
