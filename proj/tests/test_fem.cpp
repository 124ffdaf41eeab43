#include <gtest/gtest.h>

#include <Eigen/Sparse>
#include <cmath>
#include <random>

#include "fieldforge/fem.hpp"
#include "fieldforge/geometry.hpp"
#include "fieldforge/refine.hpp"
#include "fieldforge/solve.hpp"

using namespace fieldforge;

namespace {

Mesh reference_triangle() {
  Mesh m;
  m.nodes = {{0, 0}, {1, 0}, {0, 1}};
  m.elements = {{0, 1, 2}};
  m.region_tags = {1};
  m.boundary_edges = {{{0, 1}, 2}, {{1, 2}, 2}, {{2, 0}, 2}};
  m.physical_names = {{1, {2, "dielectric:a"}}, {2, {1, "boundary:b"}}};
  return m;
}

Mesh square(int n, double w = 1.0, double h = 1.0) {
  GeometrySpec s;
  s.shape = RectangleGeometry{w, h, n, n};
  return generate(s);
}

Mesh two_region_mesh() {
  GeometrySpec s;
  s.shape = CpwGeometry{};
  return generate(s);
}

// Direct solve with Eigen; keeps these tests independent of the PCG code.
std::vector<double> direct_solve(const ReducedSystem& r) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(to_eigen(r.K));
  Eigen::Map<const Eigen::VectorXd> b(r.rhs.data(), static_cast<Eigen::Index>(r.rhs.size()));
  const Eigen::VectorXd x = ldlt.solve(b);
  return {x.data(), x.data() + x.size()};
}

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST(ElementMatrices, ReferenceStiffness) {
  const Mesh m = reference_triangle();
  const auto k = element_stiffness(m, 0, 1, 1.0);
  const double expect[9] = {1, -0.5, -0.5, -0.5, 0.5, 0, -0.5, 0, 0.5};
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(k[i], expect[i], 1e-15);
}

TEST(ElementMatrices, ReferenceMass) {
  const Mesh m = reference_triangle();
  const auto mm = element_mass(m, 0, 1);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(mm[i * 3 + j], 0.5 / 12 * (i == j ? 2 : 1), 1e-16);
}

TEST(ElementMatrices, P2StiffnessMatchesHandIntegration) {
  // Reference-triangle P2 stiffness in local order (v0, v1, v2, e12, e20, e01).
  const Mesh m = reference_triangle();
  const auto k = element_stiffness(m, 0, 2, 1.0);
  const double expect[36] = {1,  1.0 / 6, 1.0 / 6, 0,  -2.0 / 3, -2.0 / 3,  //
                             1.0 / 6, 0.5,  0,  0,  0,  -2.0 / 3,          //
                             1.0 / 6, 0,  0.5,  0,  -2.0 / 3, 0,            //
                             0,  0,  0,  8.0 / 3, -4.0 / 3, -4.0 / 3,        //
                             -2.0 / 3, 0,  -2.0 / 3, -4.0 / 3, 8.0 / 3, 0,   //
                             -2.0 / 3, -2.0 / 3, 0,  -4.0 / 3, 0,  8.0 / 3};
  for (int i = 0; i < 36; ++i) EXPECT_NEAR(k[i], expect[i], 1e-13) << i;
}

TEST(Assembly, RowSumsVanish) {
  const Mesh m = two_region_mesh();
  std::map<int, double> eps{{101, 11.45}, {102, 1.0}};
  for (int order : {1, 2}) {
    const SparseSystem s = assemble_stiffness(m, eps, order);
    double kmax = 0.0;
    for (double v : s.K.val) kmax = std::max(kmax, std::abs(v));
    const std::vector<double> ones(s.n(), 1.0);
    for (double r : s.K * ones) EXPECT_LE(std::abs(r), 1e-10 * kmax);
  }
}

TEST(Assembly, SymmetricAndSemidefinite) {
  const Mesh m = refine_uniform(square(3));
  std::mt19937_64 rng(7);
  for (int order : {1, 2}) {
    const SparseSystem s = assemble_stiffness(m, uniform_coefficient(m, 2.5), order);
    EXPECT_LE(s.K.asymmetry(), 1e-12);
    EXPECT_EQ(s.K.rows, s.n());
    for (int i = 0; i < 100; ++i) {
      const auto v = random_vector(s.n(), rng);
      EXPECT_GE(bilinear(s.K, v, v) / dot(v, v), -1e-10);
    }
  }
}

TEST(Assembly, LinearInCoefficient) {
  const Mesh m = two_region_mesh();
  const auto a = assemble_stiffness(m, {{101, 11.45}, {102, 1.0}}, 2);
  const auto b = assemble_stiffness(m, {{101, 22.9}, {102, 2.0}}, 2);
  ASSERT_EQ(a.K.col, b.K.col);
  for (std::size_t i = 0; i < a.K.nnz(); ++i) EXPECT_EQ(b.K.val[i], 2 * a.K.val[i]);
}

TEST(Assembly, MissingCoefficient) {
  const Mesh m = two_region_mesh();
  EXPECT_THROW(assemble_stiffness(m, {{101, 11.45}}, 1), ConfigError);
  EXPECT_THROW(assemble_stiffness(m, {{101, 11.45}, {102, 1.0}}, 3), ArgumentError);
}

TEST(Assembly, DofCounts) {
  const Mesh m = two_region_mesh();
  const EdgeTable t = build_edges(m);
  EXPECT_EQ(assemble_stiffness(m, uniform_coefficient(m), 1).n(), m.num_nodes());
  EXPECT_EQ(assemble_stiffness(m, uniform_coefficient(m), 2).n(), m.num_nodes() + t.edges.size());
}

TEST(Assembly, MassSumsToArea) {
  const Mesh m = two_region_mesh();
  for (int order : {1, 2}) {
    const CsrMatrix mass = assemble_mass(m, order);
    long double sum = 0.0L;
    for (double v : mass.val) sum += v;
    EXPECT_NEAR(static_cast<double>(sum) / total_area(m), 1.0, 1e-12);
    EXPECT_LE(mass.asymmetry(), 1e-12);
  }
}

TEST(Assembly, MassPositiveDefinite) {
  const Mesh m = square(5);
  std::mt19937_64 rng(3);
  for (int order : {1, 2}) {
    const CsrMatrix mass = assemble_mass(m, order);
    for (int i = 0; i < 100; ++i) {
      const auto v = random_vector(mass.rows, rng);
      EXPECT_GT(bilinear(mass, v, v), 0.0);
    }
  }
}

TEST(Assembly, IndependentOfWorkerCount) {
  const Mesh m = refine_uniform(two_region_mesh());
  const std::map<int, double> eps{{101, 11.45}, {102, 1.0}};
  for (int order : {1, 2}) {
    const auto one = assemble_stiffness(m, eps, order, 1);
    for (int w : {2, 3, 4, 7}) {
      EXPECT_TRUE(one.K == assemble_stiffness(m, eps, order, w).K);
      EXPECT_TRUE(assemble_mass(m, order, 1) == assemble_mass(m, order, w));
    }
  }
}

TEST(Dirichlet, EmptyIsIdentity) {
  const Mesh m = square(3);
  const auto s = assemble_stiffness(m, uniform_coefficient(m), 1);
  const auto c = apply_dirichlet(s, m, {});
  EXPECT_TRUE(c.constrained.empty());
  EXPECT_TRUE(c.K == s.K);
  EXPECT_EQ(reduce(c).K, s.K);
}

TEST(Dirichlet, GroundedBoundaryIsPositiveDefinite) {
  const Mesh m = square(6);
  for (int order : {1, 2}) {
    const auto s = apply_dirichlet(assemble_stiffness(m, uniform_coefficient(m), order), m,
                                   {{1, 0.0}, {2, 0.0}, {3, 0.0}, {4, 0.0}});
    const ReducedSystem r = reduce(s);
    const Eigen::MatrixXd dense(to_eigen(r.K));
    Eigen::LLT<Eigen::MatrixXd> llt(dense);
    EXPECT_EQ(llt.info(), Eigen::Success);
    EXPECT_LE(r.K.asymmetry(), 1e-12);
  }
}

TEST(Dirichlet, LinearFieldBetweenPlates) {
  const Mesh m = square(8);
  for (int order : {1, 2}) {
    const auto s = apply_dirichlet(assemble_stiffness(m, uniform_coefficient(m), order), m, {{1, 1.0}, {2, 0.0}});
    const ReducedSystem r = reduce(s);
    const auto u = expand(s, r, direct_solve(r));
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(u[i], 1.0 - s.dofs.coords[i].x, 1e-8);
    for (const auto& [d, v] : s.constrained) EXPECT_EQ(u[d], v);
  }
}

TEST(Dirichlet, UnknownTag) {
  const Mesh m = square(2);
  EXPECT_THROW(apply_dirichlet(assemble_stiffness(m, uniform_coefficient(m), 1), m, {{42, 0.0}}), ConfigError);
}

TEST(Dirichlet, QuadraticManufacturedSolutionExactInP2) {
  // -Laplace(x^2 + y^2) = -4
  GeometrySpec spec;
  spec.shape = AnnulusGeometry{0.5, 1.5, 10, 3};
  const Mesh m = generate(spec);
  auto exact = [](double x, double y) { return x * x + y * y; };
  const auto s = apply_dirichlet(assemble_stiffness(m, uniform_coefficient(m), 2), m, {1, 2}, exact);
  const auto load = assemble_load(m, s.dofs, [](double, double) { return -4.0; });
  const ReducedSystem r = reduce(s, load);
  const auto u = expand(s, r, direct_solve(r));
  double err = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    err = std::max(err, std::abs(u[i] - exact(s.dofs.coords[i].x, s.dofs.coords[i].y)));
  EXPECT_LE(err, 1e-9);
}

TEST(Field, GradientOfInterpolant) {
  const Mesh m = square(4);
  const auto u = interpolate(m, 2, [](double x, double y) { return x * x - 3 * x * y; });
  const auto g = field_gradient(m, u, 5, {0.2, 0.3, 0.5});
  const Point p{0.2 * m.nodes[m.elements[5][0]].x + 0.3 * m.nodes[m.elements[5][1]].x + 0.5 * m.nodes[m.elements[5][2]].x,
                0.2 * m.nodes[m.elements[5][0]].y + 0.3 * m.nodes[m.elements[5][1]].y + 0.5 * m.nodes[m.elements[5][2]].y};
  EXPECT_NEAR(g[0], 2 * p.x - 3 * p.y, 1e-12);
  EXPECT_NEAR(g[1], -3 * p.x, 1e-12);
}
