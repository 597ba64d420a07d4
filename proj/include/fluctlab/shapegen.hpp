#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace fluctlab::shapegen {

enum class ShapeKind {
    triangle,
    square,
    pentagon,
    hexagon,
    heptagon,
    octagon,
    circle,
    spiral,
};

inline constexpr std::array<ShapeKind, 8> kAllShapes = {
    ShapeKind::triangle, ShapeKind::square,  ShapeKind::pentagon, ShapeKind::hexagon,
    ShapeKind::heptagon, ShapeKind::octagon, ShapeKind::circle,   ShapeKind::spiral,
};

inline constexpr std::size_t kDefaultCount = 500;

std::string_view to_string(ShapeKind kind) noexcept;
std::optional<ShapeKind> parse_shape(std::string_view name) noexcept;

/// Vertex count for polygon members, 0 for circle and spiral.
int vertex_count(ShapeKind kind) noexcept;

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

struct ShapeDataset {
    ShapeKind kind = ShapeKind::circle;
    std::uint64_t seed = 0;
    std::vector<Point2> points;

    std::size_t count() const noexcept { return points.size(); }
};

/// Vertices of the regular n-gon inscribed in the unit circle, first vertex at angle pi/2.
std::vector<Point2> polygon_vertices(int n);

/// Maps a uniform draw u in [0, 1) onto the un-normalized contour of `kind`.
/// Polygons use arc-length position u * perimeter; the circle uses theta = 2 pi u;
/// the spiral uses theta = 4 pi u with radius theta / (4 pi).
Point2 contour_point(ShapeKind kind, double u);

/// Contour samples before normalization, one draw per point from SplitMix64(seed).
std::vector<Point2> sample_contour(ShapeKind kind, std::size_t count, std::uint64_t seed);

/// Per-axis affine map of [min, max] onto [-1, 1]; a degenerate axis maps to 0.
std::vector<Point2> normalize_to_unit_box(std::span<const Point2> points);

/// sample_contour followed by normalize_to_unit_box.
ShapeDataset generate(ShapeKind kind, std::size_t count, std::uint64_t seed);

/// Writes `x,y` and one `%.8f,%.8f` row per point. Returns bytes written.
std::size_t export_csv(const ShapeDataset& dataset, std::ostream& out);

}  // namespace fluctlab::shapegen
