#include "fluctlab/error.hpp"
#include "fluctlab/shapegen.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace fluctlab;
using namespace fluctlab::shapegen;

TEST(ShapeKind, EightMembersWithVertexCounts) {
    ASSERT_EQ(kAllShapes.size(), 8u);
    const int expected[] = {3, 4, 5, 6, 7, 8, 0, 0};
    for (std::size_t i = 0; i < kAllShapes.size(); ++i) {
        EXPECT_EQ(vertex_count(kAllShapes[i]), expected[i]);
        EXPECT_EQ(parse_shape(to_string(kAllShapes[i])), kAllShapes[i]);
    }
    EXPECT_FALSE(parse_shape("nonagon").has_value());
}

TEST(ContourPoint, ZeroDrawOnCircleAndSpiral) {
    const auto c = contour_point(ShapeKind::circle, 0.0);
    EXPECT_DOUBLE_EQ(c.x, 1.0);
    EXPECT_DOUBLE_EQ(c.y, 0.0);
    const auto s = contour_point(ShapeKind::spiral, 0.0);
    EXPECT_DOUBLE_EQ(s.x, 0.0);
    EXPECT_DOUBLE_EQ(s.y, 0.0);
}

TEST(ContourPoint, PolygonStartsAtTopVertex) {
    for (int n = 3; n <= 8; ++n) {
        const auto p = contour_point(kAllShapes[n - 3], 0.0);
        EXPECT_NEAR(p.x, 0.0, 1e-15);
        EXPECT_NEAR(p.y, 1.0, 1e-15);
    }
}

TEST(Generate, RejectsZeroCount) {
    EXPECT_THROW(generate(ShapeKind::circle, 0, 1), InvalidArgument);
}

TEST(Generate, DefaultCountAndContainment) {
    for (auto kind : kAllShapes) {
        const auto ds = generate(kind, kDefaultCount, 42);
        ASSERT_EQ(ds.count(), 500u);
        for (const auto& p : ds.points) {
            EXPECT_LE(std::abs(p.x), 1.0);
            EXPECT_LE(std::abs(p.y), 1.0);
        }
    }
}

TEST(Generate, Deterministic) {
    for (auto kind : kAllShapes) {
        std::ostringstream a, b;
        export_csv(generate(kind, 500, 9), a);
        export_csv(generate(kind, 500, 9), b);
        EXPECT_EQ(a.str(), b.str());
    }
    EXPECT_NE(generate(ShapeKind::circle, 50, 1).points, generate(ShapeKind::circle, 50, 2).points);
}

TEST(Generate, PolygonPointsLieOnIdealEdges) {
    for (int n = 3; n <= 8; ++n) {
        const auto kind = kAllShapes[n - 3];
        const auto verts = polygon_vertices(n);
        for (const auto& p : sample_contour(kind, 500, 1234 + n)) {
            double best = 1e9;
            for (int k = 0; k < n; ++k) {
                best = std::min(best, oracle::point_segment_distance(p, verts[k], verts[(k + 1) % n]));
            }
            EXPECT_LE(best, 1e-9) << "n=" << n;
        }
    }
}

TEST(Generate, CirclePointsOnUnitCircleBeforeNormalization) {
    for (const auto& p : sample_contour(ShapeKind::circle, 500, 5)) {
        EXPECT_LE(std::abs(std::hypot(p.x, p.y) - 1.0), 1e-9);
    }
}

TEST(Generate, TriangleHasThreeEdgeDirections) {
    const auto ds = generate(ShapeKind::triangle, 500, 42);
    ASSERT_EQ(ds.count(), 500u);
    EXPECT_EQ(oracle::count_edge_direction_clusters(ds.points, 10), 3u);
}

TEST(Normalize, EndpointsMapToCorners) {
    const std::vector<Point2> in{{0, 0}, {2, 2}};
    const auto out = normalize_to_unit_box(in);
    EXPECT_EQ(out[0], (Point2{-1, -1}));
    EXPECT_EQ(out[1], (Point2{1, 1}));
}

TEST(Normalize, DegenerateAxisMapsToZero) {
    const std::vector<Point2> in{{5, 1}, {5, 3}};
    const auto out = normalize_to_unit_box(in);
    EXPECT_EQ(out[0], (Point2{0, -1}));
    EXPECT_EQ(out[1], (Point2{0, 1}));
}

TEST(Normalize, EmptyInputThrows) {
    EXPECT_THROW(normalize_to_unit_box({}), InvalidArgument);
}

TEST(Normalize, IdempotentOnNormalizedCircle) {
    const auto once = generate(ShapeKind::circle, 500, 3).points;
    const auto twice = normalize_to_unit_box(once);
    for (std::size_t i = 0; i < once.size(); ++i) {
        EXPECT_NEAR(once[i].x, twice[i].x, 1e-12);
        EXPECT_NEAR(once[i].y, twice[i].y, 1e-12);
    }
}

TEST(ExportCsv, SingleRowFormat) {
    ShapeDataset ds{ShapeKind::circle, 0, {{1.0, 0.0}}};
    std::ostringstream out;
    const auto bytes = export_csv(ds, out);
    EXPECT_EQ(out.str(), "x,y\n1.00000000,0.00000000\n");
    EXPECT_EQ(bytes, out.str().size());
    EXPECT_EQ(bytes, 26u);
}

TEST(ExportCsv, LineCountAndRoundTrip) {
    const auto ds = generate(ShapeKind::spiral, 500, 11);
    std::stringstream io;
    export_csv(ds, io);
    const auto text = io.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 501);
    const auto back = oracle::parse_csv(io);
    ASSERT_EQ(back.size(), ds.count());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_NEAR(back[i].x, ds.points[i].x, 1e-8);
        EXPECT_NEAR(back[i].y, ds.points[i].y, 1e-8);
    }
}

namespace {
struct FailingBuf : std::streambuf {
    std::size_t room;
    explicit FailingBuf(std::size_t r) : room(r) {}
    std::streamsize xsputn(const char*, std::streamsize n) override {
        if (static_cast<std::size_t>(n) > room) return 0;
        room -= static_cast<std::size_t>(n);
        return n;
    }
    int overflow(int) override { return traits_type::eof(); }
};
}  // namespace

TEST(ExportCsv, WriteFailureReportsPartialBytes) {
    FailingBuf buf(4 + 22 * 3);
    std::ostream out(&buf);
    const auto ds = generate(ShapeKind::circle, 10, 1);
    try {
        export_csv(ds, out);
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        EXPECT_GT(e.bytes_written(), 0u);
        EXPECT_LE(e.bytes_written(), 4u + 22 * 3);
    }
}
