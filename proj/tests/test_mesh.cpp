#include "fracdg/mesh.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace fracdg {
namespace {

namespace fs = std::filesystem;

std::string write_temp(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << content;
  return p.string();
}

int count_boundary(const Mesh& mesh) {
  int n = 0;
  for (const Edge& e : mesh.edges)
    if (e.is_boundary()) ++n;
  return n;
}

/// Brute-force segment oracle: clip the line against every triangle.
std::vector<RaySegment> brute_segments(const Mesh& mesh, const Vec2& target,
                                       Axis axis) {
  const double u_t = (axis == Axis::X) ? target.x() : target.y();
  const double w = ((axis == Axis::X) ? target.y() : target.x()) +
                   16.0 * mesh.geom_tol();
  std::vector<RaySegment> segs;
  for (int k = 0; k < mesh.K(); ++k) {
    const auto iv = mesh.clip_line(k, axis, w);
    if (!iv) continue;
    const double s0 = iv->first, s1 = std::min(iv->second, u_t);
    if (s1 - s0 > mesh.geom_tol()) segs.push_back({k, s0, s1});
  }
  std::sort(segs.begin(), segs.end(),
            [](const RaySegment& a, const RaySegment& b) { return a.s0 < b.s0; });
  return segs;
}

TEST(GenerateStructured, ElementCountsMatchTableTwo) {
  EXPECT_EQ(generate_structured(2, -1, 1, -1, 1).K(), 8);
  EXPECT_EQ(generate_structured(5, -1, 1, -1, 1).K(), 50);
}

TEST(GenerateStructured, SingleCellSplit) {
  const Mesh mesh = generate_structured(1, 0, 1, 0, 1);
  EXPECT_EQ(mesh.K(), 2);
  EXPECT_EQ(mesh.num_edges(), 5);
  EXPECT_EQ(count_boundary(mesh), 4);
}

TEST(GenerateStructured, RejectsDegenerateBox) {
  EXPECT_THROW(generate_structured(2, 0, 0, 0, 1), ConfigError);
  EXPECT_THROW(generate_structured(2, 0, 1, 1, 1), ConfigError);
  EXPECT_THROW(generate_structured(0, 0, 1, 0, 1), ConfigError);
}

TEST(Connectivity, EdgeCountsAgreeWithBruteForceEnumeration) {
  const Mesh mesh = generate_structured(2, -1, 1, -1, 1);
  EXPECT_EQ(mesh.K(), 8);

  std::set<std::pair<int, int>> unique;
  std::map<std::pair<int, int>, int> uses;
  for (const Element& e : mesh.elements) {
    for (int f = 0; f < 3; ++f) {
      const int a = e.v[f], b = e.v[(f + 1) % 3];
      const auto key = std::minmax(a, b);
      unique.insert(key);
      ++uses[key];
    }
  }
  EXPECT_EQ(mesh.num_edges(), static_cast<int>(unique.size()));
  EXPECT_EQ(mesh.num_edges(), 16);
  int boundary = 0;
  for (auto& [k, n] : uses)
    if (n == 1) ++boundary;
  EXPECT_EQ(count_boundary(mesh), boundary);
  EXPECT_EQ(boundary, 8);
}

TEST(Connectivity, SingleTriangleIsAllBoundary) {
  Mesh mesh;
  mesh.vertices = {{0, 0.0, 0.0}, {1, 1.0, 0.0}, {2, 0.0, 1.0}};
  Element e;
  e.id = 0;
  e.v = {0, 1, 2};
  mesh.elements.push_back(e);
  build_connectivity(mesh);
  EXPECT_EQ(mesh.num_edges(), 3);
  EXPECT_EQ(count_boundary(mesh), 3);
}

TEST(Connectivity, AreasSumToDomainArea) {
  for (const Mesh& mesh :
       {generate_structured(4, -1, 1, -1, 1),
        generate_unstructured(5, -1, 1, -1, 1, 123), generate_lshape(3)}) {
    double total = mesh.total_area();
    const double want = (mesh.K() == 6 * 9) ? 3.0 : 4.0;
    EXPECT_NEAR(total, want, 1e-12 * want);
  }
}

TEST(Connectivity, InteriorEdgesSeparateDistinctElements) {
  const Mesh mesh = generate_unstructured(4, -1, 1, -1, 1, 99);
  for (const Edge& e : mesh.edges) {
    if (e.is_boundary()) continue;
    EXPECT_NE(e.minus_elem, e.plus_elem);
    EXPECT_LT(e.minus_elem, e.plus_elem);  // minus side is the smaller id
    // The normal is outward from the minus element: the minus element's
    // centroid lies on its negative side.
    const Element& me = mesh.elements[e.minus_elem];
    const Vec2 centroid = (mesh.vertex_pos(me.v[0]) + mesh.vertex_pos(me.v[1]) +
                           mesh.vertex_pos(me.v[2])) /
                          3.0;
    const Vec2 mid =
        0.5 * (mesh.vertex_pos(e.v[0]) + mesh.vertex_pos(e.v[1]));
    EXPECT_LT(e.normal.dot(centroid - mid), 0.0);
  }
}

TEST(LoadMesh, SimpleSquare) {
  const std::string path = write_temp("square.txt",
                                      "4 2\n"
                                      "0 0 0\n"
                                      "1 1 0\n"
                                      "2 1 1\n"
                                      "3 0 1\n"
                                      "0 0 1 2\n"
                                      "1 0 2 3\n");
  const Mesh mesh = load_mesh(path);
  EXPECT_EQ(mesh.K(), 2);
  EXPECT_EQ(mesh.num_edges(), 5);
  EXPECT_EQ(count_boundary(mesh), 4);
}

TEST(LoadMesh, NormalizesClockwiseTriangles) {
  const std::string path = write_temp("cw.txt",
                                      "3 1\n"
                                      "0 0 0\n"
                                      "1 1 0\n"
                                      "2 0 1\n"
                                      "0 0 2 1\n");  // clockwise order
  const Mesh mesh = load_mesh(path);
  EXPECT_GT(mesh.elements[0].area, 0.0);
  EXPECT_NEAR(mesh.elements[0].area, 0.5, 1e-14);
}

TEST(LoadMesh, RejectsNonConformingMesh) {
  const std::string path = write_temp("nonconf.txt",
                                      "5 3\n"
                                      "0 0 0\n"
                                      "1 1 0\n"
                                      "2 0.5 1\n"
                                      "3 0.5 -1\n"
                                      "4 0.5 2\n"
                                      "0 0 1 2\n"
                                      "1 0 3 1\n"
                                      "2 0 1 4\n");
  EXPECT_THROW(load_mesh(path), ConfigError);
}

TEST(LoadMesh, ReportsParseErrorsWithLineNumbers) {
  const std::string path = write_temp("bad.txt",
                                      "3 1\n"
                                      "0 0 0\n"
                                      "1 oops 0\n"
                                      "2 0 1\n"
                                      "0 0 1 2\n");
  try {
    load_mesh(path);
    FAIL() << "expected a parse error";
  } catch (const ConfigError& err) {
    EXPECT_NE(std::string(err.what()).find("line 3"), std::string::npos);
  }
}

TEST(LoadMesh, RejectsDuplicateVertexIds) {
  const std::string path = write_temp("dup.txt",
                                      "3 1\n"
                                      "0 0 0\n"
                                      "0 1 0\n"
                                      "2 0 1\n"
                                      "0 0 1 2\n");
  EXPECT_THROW(load_mesh(path), ConfigError);
}

TEST(LoadMesh, RejectsMissingVertexReference) {
  const std::string path = write_temp("missing.txt",
                                      "3 1\n"
                                      "0 0 0\n"
                                      "1 1 0\n"
                                      "2 0 1\n"
                                      "0 0 1 7\n");
  EXPECT_THROW(load_mesh(path), ConfigError);
}

TEST(LoadMesh, ReadsGmshFormat) {
  const std::string path = write_temp("square.msh",
                                      "$MeshFormat\n"
                                      "2.2 0 8\n"
                                      "$EndMeshFormat\n"
                                      "$Nodes\n"
                                      "4\n"
                                      "1 0 0 0\n"
                                      "2 1 0 0\n"
                                      "3 1 1 0\n"
                                      "4 0 1 0\n"
                                      "$EndNodes\n"
                                      "$Elements\n"
                                      "3\n"
                                      "1 15 2 0 1 1\n"
                                      "2 2 2 0 1 1 2 3\n"
                                      "3 2 2 0 1 1 3 4\n"
                                      "$EndElements\n");
  const Mesh mesh = load_mesh(path);
  EXPECT_EQ(mesh.K(), 2);
  EXPECT_EQ(mesh.num_vertices(), 4);
}

TEST(LoadMesh, RoundTripsThroughWriter) {
  const Mesh mesh = generate_unstructured(3, -1, 1, -1, 1, 5);
  std::ostringstream buf;
  write_mesh(mesh, buf);
  const std::string path = write_temp("roundtrip.txt", buf.str());
  const Mesh back = load_mesh(path);
  ASSERT_EQ(back.K(), mesh.K());
  ASSERT_EQ(back.num_vertices(), mesh.num_vertices());
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    EXPECT_DOUBLE_EQ(back.vertices[v].x, mesh.vertices[v].x);
    EXPECT_DOUBLE_EQ(back.vertices[v].y, mesh.vertices[v].y);
  }
}

TEST(BoundaryOverride, SplitsInteriorEdgeIntoCrack) {
  const std::string path = write_temp("crack.txt",
                                      "4 2\n"
                                      "0 0 0\n"
                                      "1 1 0\n"
                                      "2 1 1\n"
                                      "3 0 1\n"
                                      "0 0 1 2\n"
                                      "1 0 2 3\n"
                                      "boundary 0 2\n");
  const Mesh mesh = load_mesh(path);
  EXPECT_EQ(mesh.num_edges(), 6);
  EXPECT_EQ(count_boundary(mesh), 6);
}

TEST(LShape, CoversThreeQuadrants) {
  const Mesh mesh = generate_lshape(2);
  EXPECT_EQ(mesh.K(), 24);
  EXPECT_NEAR(mesh.total_area(), 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(mesh.bbox().xmin, -1.0);
  EXPECT_DOUBLE_EQ(mesh.bbox().xmax, 1.0);
}

TEST(PointLocation, AgreesWithBruteForce) {
  const Mesh mesh = generate_unstructured(6, -1, 1, -1, 1, 2024);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.999, 0.999);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec2 p(u(rng), u(rng));
    const int a = mesh.locate_point(p);
    const int b = mesh.locate_point_brute(p);
    // Both must contain the point (ties on edges may differ).
    const auto la = mesh.barycentric(a, p);
    const auto lb = mesh.barycentric(b, p);
    EXPECT_GE(std::min({la[0], la[1], la[2]}), -1e-10);
    EXPECT_GE(std::min({lb[0], lb[1], lb[2]}), -1e-10);
  }
  EXPECT_THROW(mesh.locate_point(Vec2(3.0, 0.0)), ConfigError);
}

TEST(TraceAxisRay, MatchesFrozenBreakpointsOnStructuredMesh) {
  const Mesh mesh = generate_structured(2, -1, 1, -1, 1);
  const Vec2 target(0.5, -0.5);
  const auto segs = trace_axis_ray(mesh, target, Axis::X);
  ASSERT_EQ(segs.size(), 3u);
  const double breaks[4] = {-1.0, -0.5, 0.0, 0.5};
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(segs[i].s0, breaks[i], 1e-11);
    EXPECT_NEAR(segs[i].s1, breaks[i + 1], 1e-11);
  }
  // And the independent brute-force oracle agrees.
  const auto brute = brute_segments(mesh, target, Axis::X);
  ASSERT_EQ(brute.size(), segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    EXPECT_NEAR(brute[i].s0, segs[i].s0, 1e-10);
    EXPECT_NEAR(brute[i].s1, segs[i].s1, 1e-10);
  }
}

TEST(TraceAxisRay, SingleSegmentNextToInflowBoundary) {
  const Mesh mesh = generate_structured(2, -1, 1, -1, 1);
  const auto segs = trace_axis_ray(mesh, Vec2(-0.95, -0.5), Axis::X);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_NEAR(segs[0].s0, -1.0, 1e-12);
  EXPECT_NEAR(segs[0].s1, -0.95, 1e-12);
}

TEST(TraceAxisRay, TelescopingAndAbutmentOnRandomTargets) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-0.995, 0.995);
  for (const Mesh& mesh : {generate_structured(4, -1, 1, -1, 1),
                           generate_unstructured(5, -1, 1, -1, 1, 77)}) {
    for (int trial = 0; trial < 500; ++trial) {
      const Vec2 target(u(rng), u(rng));
      for (Axis axis : {Axis::X, Axis::Y}) {
        const auto segs = trace_axis_ray(mesh, target, axis);
        ASSERT_FALSE(segs.empty());
        const double u_t = (axis == Axis::X) ? target.x() : target.y();
        double total = 0.0;
        for (std::size_t i = 0; i < segs.size(); ++i) {
          EXPECT_LT(segs[i].s0, segs[i].s1);
          total += segs[i].s1 - segs[i].s0;
          if (i > 0) EXPECT_NEAR(segs[i].s0, segs[i - 1].s1, 1e-10);
        }
        EXPECT_NEAR(segs.front().s0, -1.0, 1e-10);
        EXPECT_NEAR(segs.back().s1, u_t, 1e-10);
        EXPECT_NEAR(total, u_t - (-1.0), 1e-10);
      }
    }
  }
}

TEST(TraceAxisRay, ReverseModeReachesOutflow) {
  const Mesh mesh = generate_structured(3, -1, 1, -1, 1);
  const Vec2 target(-0.4, 0.25);
  const auto segs = trace_axis_ray(mesh, target, Axis::X, /*reverse=*/true);
  ASSERT_FALSE(segs.empty());
  EXPECT_NEAR(segs.front().s0, target.x(), 1e-10);
  EXPECT_NEAR(segs.back().s1, 1.0, 1e-10);
  double total = 0.0;
  for (const auto& s : segs) total += s.s1 - s.s0;
  EXPECT_NEAR(total, 1.0 - target.x(), 1e-10);
}

TEST(TraceAxisRay, LShapeVerticalRayEntersAtCut) {
  const Mesh mesh = generate_lshape(2);
  const auto segs = trace_axis_ray(mesh, Vec2(0.55, 0.45), Axis::Y);
  ASSERT_FALSE(segs.empty());
  // For x > 0 the mesh starts at y = 0, not at the bounding box edge.
  EXPECT_NEAR(segs.front().s0, 0.0, 1e-10);
  EXPECT_NEAR(segs.back().s1, 0.45, 1e-10);
}

TEST(TraceAxisRay, GrazingRayThroughGridLineIsResolved) {
  const Mesh mesh = generate_structured(4, -1, 1, -1, 1);
  // Target on an interior grid line: the unperturbed ray would pass through
  // a row of vertices.
  const auto segs = trace_axis_ray(mesh, Vec2(0.3, 0.5 - 1e-15), Axis::X);
  ASSERT_FALSE(segs.empty());
  double total = 0.0;
  for (const auto& s : segs) total += s.s1 - s.s0;
  EXPECT_NEAR(total, 1.3, 1e-9);
}

}  // namespace
}  // namespace fracdg
