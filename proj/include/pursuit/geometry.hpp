#pragma once

#include <span>
#include <vector>

#include "pursuit/vec2.hpp"

namespace pursuit::geometry {

/// Convex polygon, vertices counter-clockwise. May be empty.
using Polygon = std::vector<Vec2>;

/// Voronoi partition of the square [-h, h]^2.
struct VoronoiDiagram {
  /// Seeds after deterministic de-duplication (see bounded_voronoi).
  std::vector<Vec2> seeds;
  std::vector<Polygon> cells;
  std::vector<double> areas;
  double half_extent = 0.0;
};

inline constexpr double kCoincidentSeedDistance = 1e-9;
inline constexpr double kSeedPerturbation = 1e-6;

/// Shoelace area; positive for counter-clockwise polygons.
double polygon_area(std::span<const Vec2> polygon);

/// Keeps the part of a convex polygon where dot(normal, p) <= offset.
Polygon clip_half_plane(const Polygon& polygon, Vec2 normal, double offset);

/// Axis-aligned square [-h, h]^2 as a counter-clockwise polygon.
Polygon square(double half_extent);

/// Bounded Voronoi diagram by iterative half-plane clipping of the domain
/// square. Seeds closer than kCoincidentSeedDistance to an earlier seed are
/// moved by kSeedPerturbation along a direction fixed by the seed index.
/// Seeds may lie outside the domain; their cells are still clipped to it and
/// can be empty. Throws std::invalid_argument on an empty or non-finite seed
/// list.
VoronoiDiagram bounded_voronoi(std::span<const Vec2> seeds, double half_extent);

double max_cell_area(const VoronoiDiagram& diagram);

/// Fraction of the grid_resolution^2 cell centres of [-h, h]^2 lying within
/// sensor_range of at least one position.
double coverage_fraction(std::span<const Vec2> positions, double sensor_range,
                         double half_extent, int grid_resolution = 300);

}  // namespace pursuit::geometry
