#include "pursuit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pursuit::geometry {

double polygon_area(std::span<const Vec2> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    twice += cross(polygon[i], polygon[(i + 1) % n]);
  }
  return 0.5 * twice;
}

Polygon clip_half_plane(const Polygon& polygon, Vec2 normal, double offset) {
  Polygon out;
  const std::size_t n = polygon.size();
  if (n == 0) return out;
  out.reserve(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = polygon[i];
    const Vec2 b = polygon[(i + 1) % n];
    const double da = dot(normal, a) - offset;
    const double db = dot(normal, b) - offset;
    if (da <= 0.0) out.push_back(a);
    if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)) {
      const double t = da / (da - db);
      out.push_back(a + (b - a) * t);
    }
  }
  if (out.size() < 3) out.clear();
  return out;
}

Polygon square(double half_extent) {
  const double h = half_extent;
  return {{-h, -h}, {h, -h}, {h, h}, {-h, h}};
}

namespace {

std::vector<Vec2> separate_coincident(std::span<const Vec2> seeds) {
  // Golden-angle directions spread successive perturbations around the circle.
  constexpr double kGoldenAngle = 2.399963229728653;
  std::vector<Vec2> out(seeds.begin(), seeds.end());
  for (std::size_t i = 1; i < out.size(); ++i) {
    for (int attempt = 1;; ++attempt) {
      bool clash = false;
      for (std::size_t j = 0; j < i; ++j) {
        if (distance(out[i], out[j]) < kCoincidentSeedDistance) {
          clash = true;
          break;
        }
      }
      if (!clash) break;
      const double angle = kGoldenAngle * static_cast<double>(i);
      out[i] = seeds[i] + Vec2{std::cos(angle), std::sin(angle)} *
                              (kSeedPerturbation * attempt);
    }
  }
  return out;
}

}  // namespace

VoronoiDiagram bounded_voronoi(std::span<const Vec2> seeds, double half_extent) {
  if (seeds.empty()) throw std::invalid_argument("bounded_voronoi: no seeds");
  if (!(half_extent > 0.0)) {
    throw std::invalid_argument("bounded_voronoi: half_extent must be positive");
  }
  for (const Vec2& s : seeds) {
    if (!std::isfinite(s.x) || !std::isfinite(s.y)) {
      throw std::invalid_argument("bounded_voronoi: non-finite seed");
    }
  }

  VoronoiDiagram d;
  d.half_extent = half_extent;
  d.seeds = separate_coincident(seeds);
  const std::size_t n = d.seeds.size();
  d.cells.reserve(n);
  d.areas.reserve(n);
  const Polygon domain = square(half_extent);
  for (std::size_t i = 0; i < n; ++i) {
    Polygon cell = domain;
    const Vec2 si = d.seeds[i];
    for (std::size_t j = 0; j < n && !cell.empty(); ++j) {
      if (j == i) continue;
      // |p - si| <= |p - sj|  <=>  (sj - si) . p <= (|sj|^2 - |si|^2) / 2
      const Vec2 sj = d.seeds[j];
      const Vec2 normal = sj - si;
      const double offset = 0.5 * (sj.squared_norm() - si.squared_norm());
      cell = clip_half_plane(cell, normal, offset);
    }
    d.areas.push_back(polygon_area(cell));
    d.cells.push_back(std::move(cell));
  }
  return d;
}

double max_cell_area(const VoronoiDiagram& diagram) {
  if (diagram.areas.empty()) return 0.0;
  return *std::max_element(diagram.areas.begin(), diagram.areas.end());
}

double coverage_fraction(std::span<const Vec2> positions, double sensor_range,
                         double half_extent, int grid_resolution) {
  if (!(sensor_range > 0.0)) {
    throw std::invalid_argument("coverage_fraction: sensor_range must be positive");
  }
  if (grid_resolution < 100) {
    throw std::invalid_argument("coverage_fraction: grid_resolution must be >= 100");
  }
  if (positions.empty()) return 0.0;

  const int res = grid_resolution;
  const double cell = 2.0 * half_extent / res;
  const double r2 = sensor_range * sensor_range;
  auto centre = [&](int k) { return -half_extent + (k + 0.5) * cell; };

  // Mark only cells inside each disc's bounding box; a centre is counted once.
  std::vector<unsigned char> covered(static_cast<std::size_t>(res) * res, 0);
  for (const Vec2& p : positions) {
    auto lo = [&](double v) {
      return std::clamp(static_cast<int>(std::floor((v - sensor_range + half_extent) / cell)) - 1, 0, res - 1);
    };
    auto hi = [&](double v) {
      return std::clamp(static_cast<int>(std::ceil((v + sensor_range + half_extent) / cell)) + 1, 0, res - 1);
    };
    if (p.x + sensor_range < -half_extent || p.x - sensor_range > half_extent ||
        p.y + sensor_range < -half_extent || p.y - sensor_range > half_extent) {
      continue;
    }
    const int x0 = lo(p.x), x1 = hi(p.x), y0 = lo(p.y), y1 = hi(p.y);
    for (int iy = y0; iy <= y1; ++iy) {
      const double dy = centre(iy) - p.y;
      for (int ix = x0; ix <= x1; ++ix) {
        const double dx = centre(ix) - p.x;
        if (dx * dx + dy * dy <= r2) covered[static_cast<std::size_t>(iy) * res + ix] = 1;
      }
    }
  }
  const auto count = std::count(covered.begin(), covered.end(), 1);
  return static_cast<double>(count) / (static_cast<double>(res) * res);
}

}  // namespace pursuit::geometry
