#include "fluctlab/shapegen.hpp"

#include "fluctlab/error.hpp"
#include "fluctlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>

namespace fluctlab::shapegen {

namespace {

constexpr std::array<std::string_view, 8> kNames = {
    "triangle", "square", "pentagon", "hexagon", "heptagon", "octagon", "circle", "spiral",
};

}  // namespace

std::string_view to_string(ShapeKind kind) noexcept {
    return kNames[static_cast<std::size_t>(kind)];
}

std::optional<ShapeKind> parse_shape(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == name) {
            return kAllShapes[i];
        }
    }
    return std::nullopt;
}

int vertex_count(ShapeKind kind) noexcept {
    switch (kind) {
    case ShapeKind::triangle: return 3;
    case ShapeKind::square: return 4;
    case ShapeKind::pentagon: return 5;
    case ShapeKind::hexagon: return 6;
    case ShapeKind::heptagon: return 7;
    case ShapeKind::octagon: return 8;
    case ShapeKind::circle:
    case ShapeKind::spiral: return 0;
    }
    return 0;
}

std::vector<Point2> polygon_vertices(int n) {
    if (n < 3) {
        throw InvalidArgument("polygon needs at least 3 vertices");
    }
    std::vector<Point2> vertices;
    vertices.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double angle = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * k / n;
        vertices.push_back({std::cos(angle), std::sin(angle)});
    }
    return vertices;
}

Point2 contour_point(ShapeKind kind, double u) {
    if (kind == ShapeKind::circle) {
        const double theta = 2.0 * std::numbers::pi * u;
        return {std::cos(theta), std::sin(theta)};
    }
    if (kind == ShapeKind::spiral) {
        // Archimedean, two turns: r grows from 0 to 1 over theta in [0, 4 pi].
        const double theta = 4.0 * std::numbers::pi * u;
        const double r = theta / (4.0 * std::numbers::pi);
        return {r * std::cos(theta), r * std::sin(theta)};
    }

    const int n = vertex_count(kind);
    // Sides of a regular polygon are equal, so arc length is linear in the edge parameter.
    const double t = u * n;
    const int edge = std::min(static_cast<int>(std::floor(t)), n - 1);
    const double frac = t - edge;
    const double a0 = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * edge / n;
    const double a1 = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * (edge + 1) / n;
    const Point2 p0{std::cos(a0), std::sin(a0)};
    const Point2 p1{std::cos(a1), std::sin(a1)};
    return {p0.x + frac * (p1.x - p0.x), p0.y + frac * (p1.y - p0.y)};
}

std::vector<Point2> sample_contour(ShapeKind kind, std::size_t count, std::uint64_t seed) {
    if (count == 0) {
        throw InvalidArgument("shape sample count must be positive");
    }
    SplitMix64 rng(seed);
    std::vector<Point2> points;
    points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        points.push_back(contour_point(kind, rng.uniform()));
    }
    return points;
}

std::vector<Point2> normalize_to_unit_box(std::span<const Point2> points) {
    if (points.empty()) {
        throw InvalidArgument("cannot normalize an empty point set");
    }
    double min_x = points.front().x;
    double max_x = min_x;
    double min_y = points.front().y;
    double max_y = min_y;
    for (const auto& p : points) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }

    auto map_axis = [](double v, double lo, double hi) {
        if (hi == lo) {
            return 0.0;
        }
        const double mapped = std::clamp(2.0 * (v - lo) / (hi - lo) - 1.0, -1.0, 1.0);
        return mapped + 0.0;  // folds -0.0 into +0.0
    };

    std::vector<Point2> out;
    out.reserve(points.size());
    for (const auto& p : points) {
        out.push_back({map_axis(p.x, min_x, max_x), map_axis(p.y, min_y, max_y)});
    }
    return out;
}

ShapeDataset generate(ShapeKind kind, std::size_t count, std::uint64_t seed) {
    const auto raw = sample_contour(kind, count, seed);
    return ShapeDataset{kind, seed, normalize_to_unit_box(raw)};
}

std::size_t export_csv(const ShapeDataset& dataset, std::ostream& out) {
    std::size_t written = 0;
    auto emit = [&](const char* data, std::size_t size) {
        out.write(data, static_cast<std::streamsize>(size));
        if (!out) {
            throw IoError("failed writing dataset CSV after " + std::to_string(written) + " bytes",
                          written);
        }
        written += size;
    };

    emit("x,y\n", 4);
    char line[96];
    for (const auto& p : dataset.points) {
        const int n = std::snprintf(line, sizeof line, "%.8f,%.8f\n", p.x + 0.0, p.y + 0.0);
        emit(line, static_cast<std::size_t>(n));
    }
    out.flush();
    if (!out) {
        throw IoError("failed flushing dataset CSV", written);
    }
    return written;
}

}  // namespace fluctlab::shapegen
