#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "fieldforge/amr.hpp"

using namespace fieldforge;

namespace {

Mesh square(int n) {
  GeometrySpec s;
  s.shape = RectangleGeometry{1, 1, n, n};
  return generate(s);
}

Mesh coax_seed() {
  GeometrySpec s;
  s.shape = AnnulusGeometry{1.0, std::exp(1.0), 12, 2};
  return generate(s);
}

CapacitanceProblem coax_problem() {
  CapacitanceProblem p;
  p.mesh = coax_seed();
  p.conductors = conductor_tags(p.mesh);
  p.permittivity = uniform_coefficient(p.mesh);
  return p;
}

// Dorfler set by exhaustive search: fewest elements, then largest captured
// sum, then smallest ids.
std::vector<int> dorfler_brute_force(const std::vector<double>& eta, double theta) {
  const int n = static_cast<int>(eta.size());
  double total = 0.0;
  for (double v : eta) total += v * v;
  std::vector<int> best;
  std::size_t best_size = n + 1;
  double best_sum = -1.0;
  for (int mask = 0; mask < (1 << n); ++mask) {
    double s = 0.0;
    std::vector<int> set;
    for (int i = 0; i < n; ++i)
      if (mask >> i & 1) {
        s += eta[i] * eta[i];
        set.push_back(i);
      }
    if (s < theta * total - 1e-12) continue;
    const bool better = set.size() < best_size ||
                        (set.size() == best_size && (s > best_sum || (s == best_sum && set < best)));
    if (better) {
      best = set;
      best_size = set.size();
      best_sum = s;
    }
  }
  return best;
}

}  // namespace

TEST(ZzEstimate, ExactOnLinearFields) {
  for (int order : {1, 2}) {
    const Mesh m = square(5);
    const auto u = interpolate(m, order, [](double x, double y) { return 0.3 + 2.0 * x - 1.5 * y; });
    for (double eta : zz_estimate(m, u, uniform_coefficient(m))) {
      EXPECT_GE(eta, 0.0);
      EXPECT_LE(eta, 1e-12);
    }
  }
}

TEST(ZzEstimate, ShrinksUnderUniformRefinement) {
  Mesh m = square(4);
  auto f = [](double x, double y) { return x * x + y * y; };
  double prev = estimator_total(zz_estimate(m, interpolate(m, 1, f), uniform_coefficient(m)));
  for (int k = 0; k < 3; ++k) {
    m = refine_uniform(m);
    const double cur = estimator_total(zz_estimate(m, interpolate(m, 1, f), uniform_coefficient(m)));
    EXPECT_GE(prev / cur, 1.5);
    prev = cur;
  }
}

TEST(ZzEstimate, TranslationInvariant) {
  Mesh a = square(4);
  Mesh b = a;
  for (auto& p : b.nodes) {
    p.x += 3.25;
    p.y -= 1.5;
  }
  auto fa = [](double x, double y) { return std::sin(2 * x) * std::cos(y); };
  auto fb = [&](double x, double y) { return fa(x - 3.25, y + 1.5); };
  const auto ea = zz_estimate(a, interpolate(a, 2, fa), uniform_coefficient(a));
  const auto eb = zz_estimate(b, interpolate(b, 2, fb), uniform_coefficient(b));
  for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_NEAR(ea[i], eb[i], 1e-10 * (1 + ea[i]));
}

TEST(ZzEstimate, WeightsByPermittivity) {
  const Mesh m = square(4);
  const auto u = interpolate(m, 1, [](double x, double y) { return x * x - y * y * y; });
  const auto e1 = zz_estimate(m, u, uniform_coefficient(m, 1.0));
  const auto e4 = zz_estimate(m, u, uniform_coefficient(m, 4.0));
  for (std::size_t i = 0; i < e1.size(); ++i) EXPECT_NEAR(e4[i], 2 * e1[i], 1e-12);
}

TEST(Marking, ThresholdArgmaxAndMonotone) {
  const std::vector<double> eta{0.1, 0.9, 0.3, 0.9, 0.5};
  EXPECT_EQ(mark_threshold(eta, 1.0), (std::vector<int>{1, 3}));
  EXPECT_EQ(mark_threshold(eta, 0.5), (std::vector<int>{1, 3, 4}));
  EXPECT_TRUE(mark_threshold(std::vector<double>(4, 0.0), 0.5).empty());
  EXPECT_THROW(mark_threshold(eta, 0.0), ArgumentError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> r(200);
  for (double& v : r) v = u(rng);
  std::size_t prev = 0;
  for (double tau = 1.0; tau > 0.01; tau -= 0.05) {
    const auto s = mark_threshold(r, tau);
    EXPECT_GE(s.size(), prev);
    prev = s.size();
  }
}

TEST(Marking, DorflerExamples) {
  EXPECT_EQ(mark_dorfler({0.0, 1.0, 2.0, 0.0}, 1.0), (std::vector<int>{1, 2}));
  EXPECT_EQ(mark_dorfler(std::vector<double>(10, 1.0), 0.5), (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(mark_dorfler(std::vector<double>(7, 1.0), 0.5), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_THROW(mark_dorfler({1.0}, 0.0), ArgumentError);
  EXPECT_THROW(mark_dorfler({1.0}, 1.5), ArgumentError);
}

TEST(Marking, DorflerMatchesBruteForce) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> level(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> eta(10);
    for (double& v : eta) v = 0.25 * level(rng);
    for (double theta : {0.2, 0.5, 0.8, 1.0}) {
      double total = 0.0;
      for (double v : eta) total += v * v;
      if (total == 0.0) continue;
      EXPECT_EQ(mark_dorfler(eta, theta), dorfler_brute_force(eta, theta));
    }
  }
}

TEST(NotionalMeshSize, Examples) {
  EXPECT_NEAR(notional_mesh_size(1000000, 3), 0.01, 1e-15);
  EXPECT_NEAR(notional_mesh_size(10000, 2), 0.01, 1e-15);
  EXPECT_EQ(notional_mesh_size(1, 2), 1.0);
  EXPECT_EQ(notional_mesh_size(1, 3), 1.0);
  EXPECT_THROW(notional_mesh_size(0, 2), ArgumentError);
  EXPECT_THROW(notional_mesh_size(10, 4), ArgumentError);
}

TEST(Extrapolate, PowerLaw) {
  const std::vector<double> m{0.1, 0.05, 0.025};
  std::vector<double> v;
  for (double x : m) v.push_back(10 + 3 * x * x);
  const auto e = extrapolate(m, v);
  EXPECT_NEAR(e.value_inf, 10.0, 1e-6);
  EXPECT_NEAR(e.rate, 2.0, 1e-6);
  EXPECT_NEAR(e.coefficient * std::pow(0.1, e.rate), 0.03, 1e-6);
}

TEST(Extrapolate, ConstantSequence) {
  const auto e = extrapolate({0.1, 0.05, 0.025, 0.0125}, {7.089, 7.089, 7.089, 7.089});
  EXPECT_EQ(e.value_inf, 7.089);
  EXPECT_LE(e.residual, 1e-15);
}

TEST(Extrapolate, NoisyPowerLaw) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> noise(-1e-6, 1e-6);
  std::vector<double> m, v;
  for (double x = 0.2; x > 0.01; x *= 0.7) {
    m.push_back(x);
    v.push_back(5.0 - 2.0 * std::pow(x, 1.5) + noise(rng));
  }
  EXPECT_NEAR(extrapolate(m, v).value_inf, 5.0, 1e-4);
}

TEST(Extrapolate, Errors) {
  EXPECT_THROW(extrapolate({0.1, 0.05}, {1, 2}), FitError);
  EXPECT_THROW(extrapolate({0.1, 0.1, 0.1}, {1, 2, 3}), FitError);
}

TEST(AmrLoop, CoaxCapacitance) {
  AmrOptions o;
  o.max_dof = 20000;
  const auto t = amr_loop(coax_problem(), o);
  ASSERT_GE(t.rows.size(), 3u);
  EXPECT_NEAR(t.rows.back().value / (2 * M_PI * constants::epsilon0), 1.0, 5e-3);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_EQ(t.rows[i].iter, static_cast<int>(i));
    EXPECT_NEAR(t.rows[i].m * std::sqrt(static_cast<double>(t.rows[i].dof)), 1.0, 1e-12);
    if (i) {
      EXPECT_GT(t.rows[i].dof, t.rows[i - 1].dof);
      EXPECT_LT(t.rows[i].m, t.rows[i - 1].m);
    }
  }
  EXPECT_LE(t.rows.back().dof, o.max_dof);
  EXPECT_TRUE(t.reason == "dof budget" || t.reason == "converged");
}

TEST(AmrLoop, BudgetBelowSeed) {
  AmrOptions o;
  o.max_dof = 10;
  const auto t = amr_loop(coax_problem(), o);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.reason, "dof budget");
}

TEST(AmrLoop, IterationLimitAndConvergence) {
  AmrOptions o;
  o.max_iterations = 2;
  EXPECT_EQ(amr_loop(coax_problem(), o).reason, "iteration limit");
  o.max_iterations = 60;
  o.target_rel_change = 0.5;
  const auto t = amr_loop(coax_problem(), o);
  EXPECT_EQ(t.reason, "converged");
  EXPECT_EQ(t.rows.size(), 3u);
}

TEST(AmrLoop, SolverFailureBecomesAmrFailure) {
  auto p = coax_problem();
  p.options.tol = 1e-300;  // unreachable
  try {
    amr_loop(p, AmrOptions{});
    FAIL();
  } catch (const AmrFailure& e) {
    EXPECT_EQ(e.partial().rows.size(), 0u);
    EXPECT_EQ(e.partial().reason, "solver failure");
  }
}

TEST(AmrLoop, UnitSquareEigenvalueAgreesWithUniform) {
  EigenProblem p;
  p.mesh = square(4);
  p.dirichlet = {1, 2, 3, 4};
  AmrOptions o;
  o.max_dof = 12000;
  const auto adaptive = amr_loop(p, o);
  o.strategy = RefineUniformly{};
  const auto uniform = amr_loop(p, o);
  const double exact = 2 * M_PI * M_PI;
  EXPECT_NEAR(adaptive.rows.back().value / exact, 1.0, 1e-3);
  const auto& near = *std::min_element(uniform.rows.begin(), uniform.rows.end(), [&](const auto& a, const auto& b) {
    return std::abs(std::log(double(a.dof) / adaptive.rows.back().dof)) <
           std::abs(std::log(double(b.dof) / adaptive.rows.back().dof));
  });
  EXPECT_NEAR(adaptive.rows.back().value / near.value, 1.0, 5e-4);
}

TEST(AmrLoop, TimingOffIsReproducible) {
  AmrOptions o;
  o.max_dof = 3000;
  o.timing = false;
  std::ostringstream a, b;
  write_trace_csv(amr_loop(coax_problem(), o), a);
  auto p = coax_problem();
  p.options.workers = 3;
  write_trace_csv(amr_loop(p, o), b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "iter,dof,m,value,estimator,seconds");
}
