#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fieldforge/geometry.hpp"
#include "fieldforge/refine.hpp"

using namespace fieldforge;

namespace {

Mesh square(int n) {
  GeometrySpec s;
  s.shape = RectangleGeometry{1.0, 1.0, n, n};
  return generate(s);
}

std::vector<int> all_elements(const Mesh& m) {
  std::vector<int> ids(m.num_elements());
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(RefineUniform, Counts) {
  const Mesh m = refine_uniform(square(1));
  EXPECT_EQ(m.num_elements(), 8u);
  EXPECT_EQ(m.num_nodes(), 9u);
  EXPECT_EQ(m.boundary_edges.size(), 8u);
  EXPECT_TRUE(audit(m).ok());
}

TEST(RefineUniform, PreservesAreaTagsAndAngles) {
  GeometrySpec s;
  s.shape = CpwGeometry{};
  const Mesh m = generate(s);
  const Mesh r = refine_uniform(m);
  EXPECT_EQ(r.num_elements(), 4 * m.num_elements());
  EXPECT_LT(rel(total_area(r), total_area(m)), 1e-12);
  EXPECT_NEAR(min_angle(r), min_angle(m), 1e-12);
  EXPECT_TRUE(audit(r).ok());
  for (std::size_t e = 0; e < m.num_elements(); ++e)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(r.region_tags[4 * e + c], m.region_tags[e]);
}

TEST(RefineUniform, ChildrenAreSimilar) {
  Mesh m;
  m.nodes = {{0, 0}, {3, 0.4}, {1.1, 2.0}};
  m.elements = {{0, 1, 2}};
  m.region_tags = {1};
  m.boundary_edges = {{{0, 1}, 2}, {{1, 2}, 2}, {{2, 0}, 2}};
  m.physical_names = {{1, {2, "dielectric:x"}}, {2, {1, "boundary:b"}}};
  const Mesh r = refine_uniform(m);
  for (std::size_t e = 0; e < 4; ++e) EXPECT_NEAR(element_area(r, e), element_area(m, 0) / 4, 1e-14);
  EXPECT_NEAR(min_angle(r), min_angle(m), 1e-12);
}

TEST(RefineMarked, EmptyIsIdentity) {
  const Mesh m = square(4);
  const Mesh r = refine_marked(m, {});
  EXPECT_EQ(r.nodes.size(), m.nodes.size());
  EXPECT_EQ(r.elements, m.elements);
}

TEST(RefineMarked, SingleElementStaysConforming) {
  const Mesh m = square(10);
  const std::vector<int> one{57};
  const Mesh r = refine_marked(m, one);
  EXPECT_GT(r.num_elements(), m.num_elements());
  EXPECT_LT(rel(total_area(r), total_area(m)), 1e-12);
  EXPECT_TRUE(audit(r).ok());
  // Far-field elements are copied unchanged.
  std::size_t kept = 0;
  for (const auto& t : m.elements)
    if (std::find(r.elements.begin(), r.elements.end(), t) != r.elements.end()) ++kept;
  EXPECT_GE(kept, m.num_elements() - 6);
}

TEST(RefineMarked, MarkingAllMatchesBisectionSweeps) {
  // Two-triangle square: each full sweep bisects every element exactly once.
  Mesh m = square(1);
  for (int sweep = 1; sweep <= 4; ++sweep) {
    m = refine_marked(m, all_elements(m));
    EXPECT_EQ(m.num_elements(), 2u << sweep);
    EXPECT_TRUE(audit(m).ok());
  }
  // Two bisection sweeps cover the same count as one red refinement.
  const Mesh twice = refine_marked(refine_marked(square(1), all_elements(square(1))), all_elements(refine_marked(square(1), all_elements(square(1)))));
  EXPECT_EQ(twice.num_elements(), refine_uniform(square(1)).num_elements());
}

TEST(RefineMarked, RepeatedLocalRefinementKeepsAngles) {
  Mesh m = square(4);
  const double a0 = min_angle(m);
  for (int i = 0; i < 12; ++i) {
    // Always refine the element nearest a corner.
    int best = 0;
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
      const Point c = centroid(m, e), b = centroid(m, static_cast<std::size_t>(best));
      if (std::hypot(c.x, c.y) < std::hypot(b.x, b.y)) best = static_cast<int>(e);
    }
    const std::vector<int> mark{best};
    m = refine_marked(m, mark);
    ASSERT_TRUE(audit(m).ok());
  }
  EXPECT_GE(min_angle(m), 0.5 * a0 - 1e-12);
  EXPECT_LT(rel(total_area(m), 1.0), 1e-12);
}

TEST(RefineMarked, RejectsBadIds) {
  const Mesh m = square(2);
  const std::vector<int> bad{8};
  EXPECT_THROW(refine_marked(m, bad), ArgumentError);
  const std::vector<int> neg{-1};
  EXPECT_THROW(refine_marked(m, neg), ArgumentError);
}

TEST(SnapBoundary, ProjectsOntoCircles) {
  GeometrySpec s;
  s.shape = AnnulusGeometry{1.0, 2.0, 12, 2};
  const Mesh m = snap_boundary(refine_uniform(refine_uniform(generate(s))));
  for (int tag : {1, 2})
    for (int v : nodes_on_tag(m, tag))
      EXPECT_NEAR(std::hypot(m.nodes[v].x, m.nodes[v].y), tag == 1 ? 1.0 : 2.0, 1e-14);
  EXPECT_TRUE(audit(m).ok());
}
