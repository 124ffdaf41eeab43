#include <gtest/gtest.h>

#include <string>

#include "fieldforge/geometry.hpp"
#include "fieldforge/msh_io.hpp"
#include "fieldforge/refine.hpp"

using namespace fieldforge;

namespace {

const char* kUnitSquare = R"($MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
2
1 1 "boundary:edge"
2 7 "dielectric:fill"
$EndPhysicalNames
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
7
1 15 2 0 1 1
2 1 2 1 1 1 2
3 1 2 1 1 2 3
4 1 2 1 1 3 4
5 1 2 1 1 4 1
6 2 2 7 1 1 2 3
7 2 2 7 1 1 4 3
$EndElements
)";

void expect_same(const Mesh& a, const Mesh& b) {
  ASSERT_EQ(a.num_nodes(), b.num_nodes());
  for (std::size_t i = 0; i < a.num_nodes(); ++i) {
    EXPECT_EQ(a.nodes[i].x, b.nodes[i].x);
    EXPECT_EQ(a.nodes[i].y, b.nodes[i].y);
  }
  EXPECT_EQ(a.elements, b.elements);
  EXPECT_EQ(a.region_tags, b.region_tags);
  ASSERT_EQ(a.boundary_edges.size(), b.boundary_edges.size());
  for (std::size_t i = 0; i < a.boundary_edges.size(); ++i) {
    EXPECT_EQ(a.boundary_edges[i].nodes, b.boundary_edges[i].nodes);
    EXPECT_EQ(a.boundary_edges[i].tag, b.boundary_edges[i].tag);
  }
  ASSERT_EQ(a.physical_names.size(), b.physical_names.size());
  for (const auto& [tag, pn] : a.physical_names) {
    EXPECT_EQ(b.physical_names.at(tag).name, pn.name);
    EXPECT_EQ(b.physical_names.at(tag).dim, pn.dim);
  }
}

}  // namespace

TEST(LoadMsh, HandWrittenSquare) {
  const auto r = load_msh_string(kUnitSquare);
  EXPECT_EQ(r.mesh.num_nodes(), 4u);
  EXPECT_EQ(r.mesh.num_elements(), 2u);
  EXPECT_EQ(r.mesh.boundary_edges.size(), 4u);
  EXPECT_EQ(r.skipped_elements, 0u);
  EXPECT_EQ(r.mesh.tag_name(7), "dielectric:fill");
  // The second triangle is clockwise in the file and gets reoriented.
  for (std::size_t e = 0; e < 2; ++e) EXPECT_GT(element_area(r.mesh, e), 0.0);
  EXPECT_TRUE(audit(r.mesh).ok());
}

TEST(LoadMsh, SkipsUnknownTypesAndSections) {
  std::string text = kUnitSquare;
  text.replace(text.find("7\n1 15"), 6, "8\n1 15");
  text.replace(text.find("$EndElements"), 0, "8 4 2 1 1 1 2 3 4\n");
  text += "$Comments\nanything at all\n$EndComments\n";
  const auto r = load_msh_string(text);
  EXPECT_EQ(r.skipped_elements, 1u);
  EXPECT_EQ(r.mesh.num_elements(), 2u);
}

TEST(LoadMsh, RejectsOtherVersions) {
  std::string text = kUnitSquare;
  text.replace(text.find("2.2 0 8"), 7, "4.1 0 8");
  EXPECT_THROW(load_msh_string(text), UnsupportedVersionError);
}

TEST(LoadMsh, ParseErrorsCarryLineNumbers) {
  std::string text = kUnitSquare;
  text.replace(text.find("$EndNodes"), 9, "$EndNodez");
  try {
    load_msh_string(text);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 15u);
  }
  std::string truncated = kUnitSquare;
  truncated.resize(truncated.find("$EndElements"));
  EXPECT_THROW(load_msh_string(truncated), ParseError);
}

TEST(LoadMsh, RejectsDegenerateTriangles) {
  std::string text = kUnitSquare;
  text.replace(text.find("3 1 1 0"), 7, "3 0.5 0 0");
  EXPECT_THROW(load_msh_string(text), GeometryError);
}

TEST(SaveMsh, HeaderContract) {
  const auto m = load_msh_string(kUnitSquare).mesh;
  const std::string s = save_msh_string(m);
  EXPECT_EQ(s.rfind("$MeshFormat\n2.2 0 8\n", 0), 0u);
  Mesh bare = m;
  bare.physical_names.clear();
  EXPECT_EQ(save_msh_string(bare).find("$PhysicalNames"), std::string::npos);
}

TEST(SaveMsh, RoundTripGeneratedMeshes) {
  std::vector<GeometrySpec> specs(4);
  specs[0].shape = RectangleGeometry{1.0, 0.3, 7, 5};
  specs[1].shape = AnnulusGeometry{1.0, std::exp(1.0), 20, 4};
  specs[2].shape = CpwGeometry{};
  specs[3].shape = StripsGeometry{};
  for (const auto& spec : specs) {
    Mesh m = generate(spec);
    m.boundary_curves.clear();  // curves are not part of the file format
    const std::string once = save_msh_string(m);
    const Mesh back = load_msh_string(once).mesh;
    expect_same(m, back);
    EXPECT_EQ(save_msh_string(back), once);
  }
}

TEST(SaveMsh, RoundTripRefinedIrrationalCoordinates) {
  GeometrySpec s;
  s.shape = AnnulusGeometry{1.0, 2.0, 9, 2};
  const Mesh m = snap_boundary(refine_uniform(generate(s)));
  const std::string once = save_msh_string(m);
  const Mesh back = load_msh_string(once).mesh;
  for (std::size_t i = 0; i < m.num_nodes(); ++i) EXPECT_EQ(m.nodes[i].x, back.nodes[i].x);
  EXPECT_EQ(save_msh_string(back), once);
}
