// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "device_table.hpp"
#include "fieldforge/study.hpp"

using namespace fieldforge;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("%s %2d  %s: %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_of(const std::function<void()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool within(double got, double want, double rel) { return std::abs(got - want) <= rel * std::abs(want); }

const EprMode kQubit{6.217e9, 0.99195, ModeRole::qubit};
const EprMode kResonator{9.503e9, 0.00278, ModeRole::resonator};

void epr_worked_example() {
  HamiltonianParams h;
  const double t = seconds_of([&] { h = perturbative_params(kQubit, kResonator, JunctionSpec::from_inductance(11e-9)); });
  const bool ok = within(h.alpha_q, 319.91e6, 5e-3) && within(h.chi_qr, 2.74e6, 1e-2) &&
                  std::abs(h.f_q_dressed - 5.90e9) <= 0.01e9 && within(h.g, 220.06e6, 1e-2) && t < 1.0;
  report(1, ok, "EPR first-order parameters, L_J = 11 nH",
         fmt("alpha_q %.3f MHz, chi_qr %.4f MHz, f_q %.4f GHz, g %.3f MHz, %.2g s", h.alpha_q / 1e6, h.chi_qr / 1e6,
             h.f_q_dressed / 1e9, h.g / 1e6, t));
}

void diagonalization_oracle() {
  const JunctionSpec j = JunctionSpec::from_inductance(11e-9);
  const HamiltonianParams p = perturbative_params(kQubit, kResonator, j);
  SpectrumParams s, single;
  const double ej = 15e9, phi = 0.05;
  const double t = seconds_of([&] {
    s = diagonalize({kQubit, kResonator}, j, 12, 4);
    single = diagonalize_zpf({6e9}, {phi}, ej, 12, 4);
  });
  const double da = s.alpha_q / p.alpha_q - 1, dc = s.chi_qr / p.chi_qr - 1;
  const double ds = single.alpha_q / (ej * std::pow(phi, 4) / 2) - 1;
  const bool ok = std::abs(da) <= 0.03 && std::abs(dc) <= 0.05 && std::abs(ds) <= 5e-3 && t < 10.0;
  report(2, ok, "quartic diagonalization (n_max 12) vs first order",
         fmt("alpha_q %.2f vs %.2f MHz (%+.2f%%), chi_qr %.4f vs %.4f MHz (%+.2f%%), phi_zpf_q %.4f; "
             "single mode phi 0.05: %+.4f%%; %.2g s",
             s.alpha_q / 1e6, p.alpha_q / 1e6, 100 * da, s.chi_qr / 1e6, p.chi_qr / 1e6, 100 * dc, p.phi_zpf_q,
             100 * ds, t));
}

void resonator_formula() {
  const double a = cpw_frequency({6.012e-3, 6.225, Topology::half_wave});
  const double b = cpw_frequency({8.475e-3, 6.225, Topology::half_wave});
  const bool ok = std::abs(a - 10.00e9) <= 0.05e9 && std::abs(b - 7.089e9) <= 0.01e9;
  report(3, ok, "half-wave CPW resonance, eps_eff 6.225",
         fmt("6.012 mm -> %.4f GHz, 8.475 mm -> %.4f GHz", a / 1e9, b / 1e9));
}

void rmse_table() {
  struct Want {
    const char* param;
    double abs_mhz, pct;
  };
  bool ok = true;
  std::string detail;
  for (const Want& w : {Want{"fge", 264.34, 5.99}, Want{"alpha", 21.886, 13.25}, Want{"g", 15.564, 24.53},
                        Want{"fr", 234.28, 3.54}}) {
    const auto rows = device_table::rows(w.param);
    const double a = rmse(rows, RmseMode::absolute), p = rmse(rows, RmseMode::percentage);
    ok = ok && within(a, w.abs_mhz, 5e-3) && within(p, w.pct, 5e-3);
    detail += fmt("%s %.3f MHz / %.2f%%  ", w.param, a, p);
  }
  report(4, ok, "RMSE over eight devices", detail);
}

CapacitanceProblem coax_problem() {
  GeometrySpec s;
  s.shape = AnnulusGeometry{1.0, std::exp(1.0), 12, 2};
  CapacitanceProblem p;
  p.mesh = generate(s);
  p.conductors = conductor_tags(p.mesh);
  p.permittivity = uniform_coefficient(p.mesh);
  return p;
}

// First DoF count at which the trace is within rel of exact; 0 if never.
std::size_t dof_to_reach(const ConvergenceTrace& t, double exact, double rel) {
  for (const auto& r : t.rows)
    if (within(r.value, exact, rel)) return r.dof;
  return 0;
}

void coax_amr() {
  const double exact = 2 * constants::pi * constants::epsilon0;
  AmrOptions o;
  o.max_dof = 20000;
  o.timing = false;
  ConvergenceTrace adaptive, uniform;
  const double t = seconds_of([&] {
    adaptive = amr_loop(coax_problem(), o);
    o.strategy = RefineUniformly{};
    uniform = amr_loop(coax_problem(), o);
  });
  const std::size_t na = dof_to_reach(adaptive, exact, 5e-3), nu = dof_to_reach(uniform, exact, 5e-3);
  const double err = adaptive.rows.back().value / exact - 1;
  const bool ok = na > 0 && na <= 200000 && (nu == 0 || na < nu) && std::abs(err) <= 5e-3 && t < 60.0;
  report(5, ok, "coax capacitance under AMR (P2, threshold 0.5)",
         fmt("0.5%% reached at %zu DoF adaptive vs %zu uniform; final %+.2e at %zu DoF; %.1f s (both loops)", na, nu,
             err, adaptive.rows.back().dof, t));
}

Mesh unit_square(int n) {
  GeometrySpec s;
  s.shape = RectangleGeometry{1.0, 1.0, n, n};
  return generate(s);
}

void square_cavity() {
  ModeSet s;
  const double t = seconds_of([&] { s = cavity_modes(unit_square(24), {1, 2, 3, 4}, 3); });
  const double exact = 2 * constants::pi * constants::pi;
  const double e1 = s.modes[0].k2 / exact - 1;
  const double split = std::abs(s.modes[2].k2 - s.modes[1].k2) / s.modes[1].k2;
  const bool ok = std::abs(e1) <= 1e-3 && split <= 1e-3 && s.dof <= 100000 && t < 60.0;
  report(6, ok, "unit-square Dirichlet modes, P2",
         fmt("k1^2 %+.2e rel, modes 2-3 split %.2e, %zu DoF, %.2f s", e1, split, s.dof, t));
}

void cpw_eps_eff() {
  GeometrySpec g;
  g.shape = CpwGeometry{};
  const auto& cpw = std::get<CpwGeometry>(g.shape);
  EffectivePermittivity e;
  const double t = seconds_of([&] { e = effective_permittivity(g); });
  const double slot = std::max(cpw.center_width, cpw.gap);
  const bool ok = within(e.eps_eff, 6.225, 0.03) && cpw.substrate_thickness >= 10 * slot && t < 120.0;
  report(7, ok, "CPW effective permittivity on silicon",
         fmt("eps_eff %.4f (%+.2f%% from 6.225), substrate/slot %.0f, %zu DoF, %.1f s", e.eps_eff,
             100 * (e.eps_eff / 6.225 - 1), cpw.substrate_thickness / slot, e.dof, t));
}

void convergence_methodology() {
  AmrOptions o;
  o.max_dof = 5000;
  o.timing = false;
  const ConvergenceTrace trace = amr_loop(coax_problem(), o);
  double worst_m = 0;
  for (const auto& r : trace.rows)
    worst_m = std::max(worst_m, std::abs(r.m / std::pow(static_cast<double>(r.dof), -0.5) - 1));

  double worst_x = 0;
  for (double p : {1.0, 2.0, 3.0}) {
    std::vector<double> m, v;
    for (double dof : {200.0, 800.0, 3200.0, 12800.0, 51200.0}) {
      m.push_back(std::pow(dof, -0.5));
      v.push_back(7.5 + 3.0 * std::pow(m.back(), p));
    }
    worst_x = std::max(worst_x, std::abs(extrapolate(m, v).value_inf / 7.5 - 1));
  }

  Mesh mesh = unit_square(4);
  auto f = [](double x, double y) { return std::sin(2 * x) * std::exp(y); };
  double prev = estimator_total(zz_estimate(mesh, interpolate(mesh, 1, f), uniform_coefficient(mesh)));
  double min_shrink = 1e300;
  for (int k = 0; k < 3; ++k) {
    mesh = refine_uniform(mesh);
    const double cur = estimator_total(zz_estimate(mesh, interpolate(mesh, 1, f), uniform_coefficient(mesh)));
    min_shrink = std::min(min_shrink, prev / cur);
    prev = cur;
  }
  const bool ok = worst_m <= 1e-15 && worst_x <= 1e-6 && min_shrink >= 1.5;
  report(8, ok, "convergence methodology",
         fmt("m vs DoF^-1/2 worst %.1e over %zu rows; extrapolation worst %.1e; estimator shrink >= %.2fx", worst_m,
             trace.rows.size(), worst_x, min_shrink));
}

void amdahl() {
  std::vector<ScalingSample> model;
  for (int n = 20; n <= 200; n += 20) model.push_back({n, 88900.0 * ((1 - 0.992) + 0.992 / n)});
  const AmdahlFit fit = amdahl_fit(model);
  const bool fit_ok = within(fit.t1, 88900.0, 1e-6) && within(fit.parallel_fraction, 0.992, 1e-6);

  const Mesh mesh = unit_square(224);
  const auto samples = measure_assembly_scaling(mesh, 1, {1, 4}, 3);
  const double speedup = samples[0].seconds / samples[1].seconds;
  report(9, fit_ok && mesh.num_elements() >= 100000 && speedup >= 2.0, "Amdahl fit and assembly self-scaling",
         fmt("model fit T1 %.6f s, f %.8f; measured speedup %.2fx at 4 workers on %zu elements "
             "(%u hardware threads)",
             fit.t1, fit.parallel_fraction, speedup, mesh.num_elements(), std::thread::hardware_concurrency()));
}

void non_reproducibility_statement() {
  report(10, true, "scope statement",
         "full-device eigenfrequency and capacitance tables need 3D geometry and 1e7-1e8 DoF and are NOT "
         "reproducible at desk scale; they are replaced by the analytic oracles of criteria 5-7 and the "
         "convergence-methodology checks of criterion 8");
}

bool same_bits(const CsrMatrix& a, const CsrMatrix& b) {
  return a.row_ptr == b.row_ptr && a.col == b.col && a.val.size() == b.val.size() &&
         std::memcmp(a.val.data(), b.val.data(), a.val.size() * sizeof(double)) == 0;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void determinism() {
  std::vector<Mesh> meshes;
  meshes.push_back(refine_uniform(coax_problem().mesh));
  meshes.push_back(unit_square(40));
  GeometrySpec cpw;
  cpw.shape = CpwGeometry{};
  meshes.push_back(generate(cpw));

  int matrices = 0, mismatched = 0;
  for (const Mesh& m : meshes)
    for (int order : {1, 2}) {
      const auto coef = uniform_coefficient(m, 2.5);
      const auto k1 = assemble_stiffness(m, coef, order, 1).K, m1 = assemble_mass(m, order, 1);
      for (int w : {1, 2, 4}) {
        matrices += 2;
        if (!same_bits(k1, assemble_stiffness(m, coef, order, w).K)) ++mismatched;
        if (!same_bits(m1, assemble_mass(m, order, w))) ++mismatched;
      }
    }

  const ReducedSystem red = reduce(apply_dirichlet(assemble_stiffness(meshes[1], uniform_coefficient(meshes[1]), 2),
                                                   meshes[1], std::map<int, double>{{1, 0.0}, {3, 1.0}}));
  SolveOptions so;
  const auto x1 = solve_spd(red.K, red.rhs, so).x;
  so.workers = 4;
  const bool solves_ok = same_bits(x1, solve_spd(red.K, red.rhs, so).x);

  int jobs = 0, job_mismatch = 0;
  for (const auto& entry : std::filesystem::directory_iterator(FIELDFORGE_SAMPLE_CONFIGS)) {
    if (entry.path().extension() != ".json" || entry.path().stem() == "amdahl_measure") continue;
    const std::string text = slurp(entry.path());
    auto run = [&](int workers) {
      StudyOptions o;
      o.workers = workers;
      o.timing = false;
      o.base_dir = FIELDFORGE_SAMPLE_CONFIGS;
      return run_study(text, o).files;
    };
    const auto ref = run(1);
    ++jobs;
    if (ref != run(1) || ref != run(3)) ++job_mismatch;
  }
  report(11, mismatched == 0 && solves_ok && job_mismatch == 0, "bit-identical results across runs and workers",
         fmt("%d/%d assembled matrices identical over workers 1,2,4; CG solution %s; %d/%d sample jobs identical "
             "over runs and workers 1,3 (timing off, measured-timing job excluded)",
             matrices - mismatched, matrices, solves_ok ? "identical" : "differs", jobs - job_mismatch, jobs));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria = {
      epr_worked_example, diagonalization_oracle, resonator_formula, rmse_table,
      coax_amr,           square_cavity,          cpw_eps_eff,       convergence_methodology,
      amdahl,             non_reproducibility_statement, determinism};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), false, "exception", e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
