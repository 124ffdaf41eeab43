#pragma once

// JSON job runner behind the command-line tool. A job produces a set of named
// output files in memory; nothing touches the disk until every step succeeded.

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fieldforge/amr.hpp"
#include "fieldforge/analysis.hpp"
#include "fieldforge/eigenmode.hpp"
#include "fieldforge/electrostatics.hpp"
#include "fieldforge/epr.hpp"
#include "fieldforge/errors.hpp"
#include "fieldforge/geometry.hpp"
#include "fieldforge/msh_io.hpp"
#include "fieldforge/parallel.hpp"

namespace fieldforge {

/// Config problem anchored to a line of the config file.
class ConfigLineError : public ConfigError {
 public:
  ConfigLineError(std::size_t line, const std::string& what)
      : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

/// JSON pointer of every key and array element -> line of the key (or of the
/// element for arrays). The root maps to the line of its opening brace.
inline std::map<std::string, std::size_t> json_lines(const std::string& text) {
  struct Frame {
    std::string path;
    bool object;
    int index = 0;
    bool expect_key = true;
    std::string key;
  };
  std::map<std::string, std::size_t> out;
  std::vector<Frame> stack;
  std::size_t line = 1;
  auto element_path = [&]() -> std::string {
    if (stack.empty()) return "";
    const Frame& f = stack.back();
    return f.object ? f.path + "/" + f.key : f.path + "/" + std::to_string(f.index);
  };
  auto mark_element = [&]() {
    if (!stack.empty() && !stack.back().object) out.emplace(element_path(), line);
    if (stack.empty()) out.emplace("", line);
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
    } else if (c == '"') {
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        s += text[i];
      }
      if (!stack.empty() && stack.back().object && stack.back().expect_key) {
        stack.back().key = s;
        stack.back().expect_key = false;
        out.emplace(element_path(), line);
      } else {
        mark_element();
      }
    } else if (c == ',') {
      if (!stack.empty()) {
        if (stack.back().object)
          stack.back().expect_key = true;
        else
          ++stack.back().index;
      }
    } else if (c == '{' || c == '[') {
      mark_element();
      stack.push_back({element_path(), c == '{'});
    } else if (c == '}' || c == ']') {
      if (!stack.empty()) stack.pop_back();
    } else if (c != ':' && c != ' ' && c != '\t' && c != '\r') {
      mark_element();
      while (i + 1 < text.size() && std::string_view(",}]\n \t\r").find(text[i + 1]) == std::string_view::npos) ++i;
    }
  }
  return out;
}

}  // namespace detail

/// Read-only view of one config value that knows where it sits in the file.
class ConfigNode {
 public:
  ConfigNode(const nlohmann::json& j, std::string path, const std::map<std::string, std::size_t>& lines)
      : j_(&j), path_(std::move(path)), lines_(&lines) {}

  const nlohmann::json& json() const { return *j_; }
  const std::string& path() const { return path_; }

  std::size_t line() const {
    for (std::string p = path_;; p = p.substr(0, p.rfind('/'))) {
      if (auto it = lines_->find(p); it != lines_->end()) return it->second;
      if (p.empty()) return 1;
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigLineError(line(), (path_.empty() ? std::string("config") : "'" + path_ + "'") + ": " + what);
  }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  ConfigNode at(const std::string& key) const {
    if (!j_->is_object()) fail("expected an object");
    if (!j_->contains(key)) fail("missing required key \"" + key + "\"");
    return {(*j_)[key], path_ + "/" + key, *lines_};
  }

  std::optional<ConfigNode> find(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return at(key);
  }

  std::vector<ConfigNode> items() const {
    if (!j_->is_array()) fail("expected an array");
    std::vector<ConfigNode> out;
    for (std::size_t i = 0; i < j_->size(); ++i) out.emplace_back((*j_)[i], path_ + "/" + std::to_string(i), *lines_);
    return out;
  }

  void allow_only(std::initializer_list<std::string_view> keys) const {
    if (!j_->is_object()) fail("expected an object");
    for (const auto& [k, _] : j_->items())
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) at(k).fail("unknown key");
  }

  double number() const {
    if (!j_->is_number()) fail("expected a number");
    return j_->get<double>();
  }
  long long integer() const {
    if (!j_->is_number_integer()) fail("expected an integer");
    return j_->get<long long>();
  }
  std::string string() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }
  bool boolean() const {
    if (!j_->is_boolean()) fail("expected true or false");
    return j_->get<bool>();
  }

  double number(const std::string& key, double def) const { return has(key) ? at(key).number() : def; }
  long long integer(const std::string& key, long long def) const { return has(key) ? at(key).integer() : def; }
  std::string string(const std::string& key, const std::string& def) const {
    return has(key) ? at(key).string() : def;
  }
  bool boolean(const std::string& key, bool def) const { return has(key) ? at(key).boolean() : def; }

  /// Length under one of base_m, base_mm, base_um; returned in metres.
  std::optional<double> length(const std::string& base) const {
    static const std::pair<const char*, double> units[] = {{"_m", 1.0}, {"_mm", 1e-3}, {"_um", 1e-6}, {"_nm", 1e-9}};
    std::optional<double> v;
    for (const auto& [suffix, scale] : units)
      if (has(base + suffix)) {
        if (v) fail("\"" + base + "\" given with more than one unit");
        v = at(base + suffix).number() * scale;
      }
    return v;
  }

 private:
  const nlohmann::json* j_;
  std::string path_;
  const std::map<std::string, std::size_t>* lines_;
};

struct StudyOptions {
  int workers = 0;  // 0: FIELDFORGE_WORKERS, else 1
  std::optional<std::uint64_t> seed;
  std::optional<bool> timing;
  std::optional<std::string> output_dir;
  std::filesystem::path base_dir = ".";  // relative mesh_file paths resolve here
  std::optional<std::string> expect_job;   // reject configs declaring a different job
};

struct StudyOutput {
  std::string job;
  std::string output_dir;
  std::vector<std::pair<std::string, std::string>> files;  // name, contents

  const std::string& file(const std::string& name) const {
    for (const auto& [n, c] : files)
      if (n == name) return c;
    throw ArgumentError("no output file " + name);
  }
};

/// Speedup samples for stiffness assembly on `mesh`, best of `repeats` runs.
inline std::vector<ScalingSample> measure_assembly_scaling(const Mesh& mesh, int order, const std::vector<int>& workers,
                                                           int repeats = 3) {
  const auto coef = uniform_coefficient(mesh);
  std::vector<ScalingSample> out;
  for (int w : workers) {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const SparseSystem s = assemble_stiffness(mesh, coef, order, w);
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      if (s.K.rows == 0) best = 0.0;  // keeps the assembly from being optimized away
    }
    out.push_back({w, best});
  }
  return out;
}

namespace detail {

using ojson = nlohmann::ordered_json;

struct Job {
  ConfigNode root;
  int workers;
  std::uint64_t seed;
  bool timing;
  std::filesystem::path base_dir;
};

inline std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

inline GeometrySpec parse_geometry(const ConfigNode& g) {
  GeometrySpec spec;
  const std::string kind = g.at("kind").string();
  auto len = [&](const char* base, double def) { return g.length(base).value_or(def); };
  auto count = [&](const char* key, long long def) {
    const long long v = g.integer(key, def);
    if (v < 0) g.at(key).fail("must be non-negative");
    return static_cast<int>(v);
  };
  if (kind == "rectangle") {
    g.allow_only({"kind", "width_m", "width_mm", "width_um", "height_m", "height_mm", "height_um", "nx", "ny",
                  "target_edge_length_m", "target_edge_length_mm", "target_edge_length_um", "permittivity"});
    spec.shape = RectangleGeometry{len("width", 1.0), len("height", 1.0), count("nx", 0), count("ny", 0)};
  } else if (kind == "annulus") {
    g.allow_only({"kind", "inner_radius_m", "inner_radius_mm", "inner_radius_um", "outer_radius_m",
                  "outer_radius_mm", "outer_radius_um", "n_theta", "n_radial", "target_edge_length_m",
                  "target_edge_length_mm", "target_edge_length_um", "permittivity"});
    spec.shape = AnnulusGeometry{len("inner_radius", 1.0), len("outer_radius", 2.0), count("n_theta", 0),
                                 count("n_radial", 0)};
  } else if (kind == "cpw_cross_section") {
    CpwGeometry c;
    c.center_width = len("center_width", c.center_width);
    c.gap = len("gap", c.gap);
    c.ground_width = len("ground_width", c.ground_width);
    c.substrate_thickness = len("substrate_thickness", c.substrate_thickness);
    c.air_height = len("air_height", c.air_height);
    c.conductor_thickness = len("conductor_thickness", 0.0);
    spec.shape = c;
  } else if (kind == "parallel_strips") {
    StripsGeometry s;
    s.count = count("count", s.count);
    s.strip_width = len("strip_width", s.strip_width);
    s.spacing = len("spacing", s.spacing);
    s.thickness = len("thickness", 0.0);
    s.box_width = len("box_width", s.box_width);
    s.substrate_thickness = len("substrate_thickness", s.substrate_thickness);
    s.air_height = len("air_height", s.air_height);
    spec.shape = s;
  } else {
    g.at("kind").fail("unknown geometry kind \"" + kind +
                      "\" (rectangle, annulus, cpw_cross_section, parallel_strips)");
  }
  spec.target_edge_length = len("target_edge_length", 0.0);
  spec.grading = g.number("grading", spec.grading);
  if (auto p = g.find("permittivity")) {
    if (!p->json().is_object()) p->fail("expected an object of region -> relative permittivity");
    for (const auto& [region, _] : p->json().items()) {
      const double eps = p->at(region).number();
      if (!(eps >= 1.0)) p->at(region).fail("relative permittivity must be >= 1");
      spec.permittivity[region] = eps;
    }
  }
  return spec;
}

struct LoadedMesh {
  Mesh mesh;
  std::map<int, double> permittivity;
  std::optional<GeometrySpec> spec;
};

inline LoadedMesh load_geometry(const Job& job) {
  const ConfigNode& root = job.root;
  if (auto file = root.find("mesh_file")) {
    LoadedMesh out;
    std::filesystem::path p = file->string();
    if (p.is_relative()) p = job.base_dir / p;
    std::ifstream in(p);
    if (!in) file->fail("cannot open mesh file " + p.string());
    try {
      out.mesh = load_msh(in).mesh;
    } catch (const Error& e) {
      file->fail(p.string() + ": " + e.what());
    }
    std::map<std::string, double> eps;
    if (auto perm = root.find("permittivity"))
      for (const auto& [region, _] : perm->json().items()) eps[region] = perm->at(region).number();
    GeometrySpec dummy;
    dummy.permittivity = eps;
    out.permittivity = region_permittivity(out.mesh, dummy);
    return out;
  }
  const ConfigNode g = root.at("geometry");
  LoadedMesh out;
  out.spec = parse_geometry(g);
  try {
    out.mesh = generate(*out.spec);
  } catch (const GeometryError& e) {
    g.fail(e.what());
  } catch (const ArgumentError& e) {
    g.fail(e.what());
  }
  out.permittivity = region_permittivity(out.mesh, *out.spec);
  return out;
}

inline CapacitanceOptions parse_fem(const Job& job) {
  CapacitanceOptions o;
  o.workers = job.workers;
  if (auto f = job.root.find("fem")) {
    f->allow_only({"order", "tol", "preconditioner"});
    o.order = static_cast<int>(f->integer("order", o.order));
    if (o.order != 1 && o.order != 2) f->at("order").fail("order must be 1 or 2");
    o.tol = f->number("tol", o.tol);
    if (!(o.tol > 0.0 && o.tol < 1.0)) f->at("tol").fail("tol must lie in (0, 1)");
    const std::string pc = f->string("preconditioner", "jacobi");
    if (pc == "jacobi")
      o.preconditioner = Preconditioner::jacobi;
    else if (pc == "sgs")
      o.preconditioner = Preconditioner::symmetric_gauss_seidel;
    else
      f->at("preconditioner").fail("preconditioner must be \"jacobi\" or \"sgs\"");
  }
  return o;
}

inline std::vector<int> pick_tags(const Mesh& mesh, const std::optional<ConfigNode>& names, std::vector<int> def) {
  if (!names) return def;
  std::vector<int> out;
  for (const auto& n : names->items()) {
    const auto tag = mesh.find_tag(n.string());
    if (!tag) n.fail("no physical name \"" + n.string() + "\" in the mesh");
    out.push_back(*tag);
  }
  return out;
}

inline std::vector<int> boundary_tags(const Mesh& mesh) {
  std::vector<int> out;
  for (const auto& [tag, pn] : mesh.physical_names)
    if (pn.dim == 1) out.push_back(tag);
  return out;
}

inline void add_reports(ojson& j, const std::vector<SolveReport>& reports, bool timing) {
  ojson arr = ojson::array();
  for (const auto& r : reports) {
    ojson e{{"iterations", r.iterations}, {"residual", r.residual}};
    if (timing) {
      e["seconds"] = r.seconds;
      e["workers"] = r.workers;
    }
    arr.push_back(e);
  }
  j["solves"] = arr;
}

inline StudyOutput job_mesh(const Job& job) {
  const LoadedMesh m = load_geometry(job);
  ojson j;
  j["nodes"] = m.mesh.num_nodes();
  j["elements"] = m.mesh.num_elements();
  j["boundary_edges"] = m.mesh.boundary_edges.size();
  j["area_m2"] = total_area(m.mesh);
  j["min_angle_deg"] = min_angle(m.mesh) * 180.0 / constants::pi;
  j["max_edge_m"] = max_edge_length(m.mesh);
  ojson names = ojson::object();
  for (const auto& [tag, pn] : m.mesh.physical_names) names[pn.name] = tag;
  j["physical_names"] = names;
  return {"mesh", "", {{"mesh.msh", save_msh_string(m.mesh)}, {"mesh.json", dump(j)}}};
}

inline StudyOutput job_cap(const Job& job) {
  const LoadedMesh m = load_geometry(job);
  CapacitanceOptions opt = parse_fem(job);
  opt.open_boundary = job.root.boolean("open_boundary", false);
  const auto tags = pick_tags(m.mesh, job.root.find("conductors"), conductor_tags(m.mesh));
  if (tags.size() < 2) job.root.fail("need at least two conductors");
  const CapacitanceMatrix c = capacitance_matrix(m.mesh, tags, m.permittivity, opt);

  std::ostringstream csv;
  write_capacitance_csv(c, csv);
  ojson j;
  j["conductors"] = c.conductors;
  j["dof"] = c.dof;
  ojson rows = ojson::array();
  for (std::size_t i = 0; i < c.size(); ++i) {
    std::vector<double> r;
    for (std::size_t k = 0; k < c.size(); ++k) r.push_back(c(i, k) * 1e15);
    rows.push_back(r);
  }
  j["maxwell_fF_per_m"] = rows;
  const MutualView v = mutual_view(c);
  ojson mutual = ojson::array();
  for (const auto& [ij, val] : v.pairs)
    mutual.push_back({{"a", c.conductors[ij.first]}, {"b", c.conductors[ij.second]}, {"value_fF_per_m", val * 1e15}});
  j["mutual"] = mutual;
  std::vector<double> ground;
  for (double g : v.ground) ground.push_back(g * 1e15);
  j["ground_fF_per_m"] = ground;
  if (job.root.boolean("eps_eff", false)) {
    if (!m.spec || geometry_kind(*m.spec) != "cpw_cross_section")
      job.root.at("eps_eff").fail("eps_eff needs a cpw_cross_section geometry");
    j["eps_eff"] = effective_permittivity(m.mesh, m.permittivity, opt).eps_eff;
  }
  add_reports(j, c.reports, job.timing);
  return {"cap", "", {{"capacitance.csv", csv.str()}, {"capacitance.json", dump(j)}}};
}

inline Topology parse_topology(const ConfigNode& n) {
  const std::string t = n.string();
  if (t == "half_wave") return Topology::half_wave;
  if (t == "quarter_wave") return Topology::quarter_wave;
  n.fail("topology must be \"half_wave\" or \"quarter_wave\"");
}

inline StudyOutput job_modes(const Job& job) {
  StudyOutput out{"modes", "", {}};
  ojson j;
  if (auto r = job.root.find("resonator")) {
    r->allow_only({"length_m", "length_mm", "length_um", "eps_eff", "topology", "harmonic"});
    const auto length = r->length("length");
    if (!length) r->fail("missing required key \"length_mm\"");
    const Topology topo = r->has("topology") ? parse_topology(r->at("topology")) : Topology::half_wave;
    const int harmonic = static_cast<int>(r->integer("harmonic", 1));
    double eps;
    if (r->has("eps_eff")) {
      eps = r->at("eps_eff").number();
    } else {
      const LoadedMesh m = load_geometry(job);
      if (!m.spec || geometry_kind(*m.spec) != "cpw_cross_section")
        r->fail("without eps_eff the geometry must be a cpw_cross_section");
      eps = effective_permittivity(m.mesh, m.permittivity, parse_fem(job)).eps_eff;
    }
    try {
      j["resonator"] = {{"length_m", *length},
                        {"eps_eff", eps},
                        {"topology", topo == Topology::half_wave ? "half_wave" : "quarter_wave"},
                        {"harmonic", harmonic},
                        {"frequency_GHz", cpw_frequency({*length, eps, topo, harmonic}) / 1e9}};
    } catch (const ArgumentError& e) {
      r->fail(e.what());
    }
    out.files.push_back({"modes.json", dump(j)});
    return out;
  }

  const LoadedMesh m = load_geometry(job);
  CavityOptions co;
  co.order = parse_fem(job).order;
  co.seed = job.seed;
  co.workers = job.workers;
  const long long count = job.root.integer("count", 4);
  if (count < 1) job.root.at("count").fail("count must be >= 1");
  const auto dirichlet = pick_tags(m.mesh, job.root.find("dirichlet"), boundary_tags(m.mesh));
  const ModeSet s = cavity_modes(m.mesh, dirichlet, static_cast<std::size_t>(count), co);
  std::ostringstream csv;
  csv << "label,k2_per_m2,frequency_GHz,residual\n";
  ojson modes = ojson::array();
  for (const auto& md : s.modes) {
    csv << md.label << ',' << format_double(md.k2) << ',' << format_double(md.frequency / 1e9) << ','
        << format_double(md.residual) << '\n';
    modes.push_back({{"label", md.label}, {"k2_per_m2", md.k2}, {"frequency_GHz", md.frequency / 1e9},
                     {"residual", md.residual}});
  }
  j["dof"] = s.dof;
  j["order"] = s.order;
  j["modes"] = modes;
  out.files.push_back({"modes.csv", csv.str()});
  out.files.push_back({"modes.json", dump(j)});
  if (job.root.boolean("fields", false))
    for (std::size_t i = 0; i < s.modes.size(); ++i) {
      std::ostringstream f;
      write_mode_csv(s, i, f);
      out.files.push_back({s.modes[i].label + ".csv", f.str()});
    }
  return out;
}

inline ojson hamiltonian_json(const HamiltonianParams& h) {
  return {{"alpha_q_MHz", h.alpha_q / 1e6}, {"alpha_r_MHz", h.alpha_r / 1e6}, {"chi_qr_MHz", h.chi_qr / 1e6},
          {"f_q_GHz", h.f_q_dressed / 1e9}, {"f_r_GHz", h.f_r / 1e9},         {"g_MHz", h.g / 1e6},
          {"phi_zpf_q", h.phi_zpf_q},       {"phi_zpf_r", h.phi_zpf_r}};
}

inline StudyOutput job_epr(const Job& job) {
  const ConfigNode e = job.root.at("epr");
  e.allow_only({"modes", "junction", "method", "n_max", "order"});
  std::vector<EprMode> modes;
  for (const auto& n : e.at("modes").items()) {
    n.allow_only({"f_GHz", "p", "role"});
    EprMode md{n.at("f_GHz").number() * 1e9, n.at("p").number(), ModeRole::qubit};
    const std::string role = n.string("role", "qubit");
    if (role == "resonator")
      md.role = ModeRole::resonator;
    else if (role != "qubit")
      n.at("role").fail("role must be \"qubit\" or \"resonator\"");
    try {
      check_mode(md);
    } catch (const ArgumentError& err) {
      n.fail(err.what());
    }
    modes.push_back(md);
  }
  if (modes.empty() || modes.size() > 2) e.at("modes").fail("give one or two modes");

  const ConfigNode jn = e.at("junction");
  jn.allow_only({"L_J_nH", "E_J_GHz", "f_ge_GHz", "alpha_MHz", "sign"});
  const int sign = static_cast<int>(jn.integer("sign", 1));
  if (sign != 1 && sign != -1) jn.at("sign").fail("sign must be +1 or -1");
  JunctionSpec junction{};
  ojson j;
  const int given = jn.has("L_J_nH") + jn.has("E_J_GHz") + jn.has("f_ge_GHz");
  if (given != 1) jn.fail("give exactly one of L_J_nH, E_J_GHz or f_ge_GHz (with alpha_MHz)");
  try {
    if (jn.has("L_J_nH")) {
      junction = JunctionSpec::from_inductance(jn.at("L_J_nH").number() * 1e-9, sign);
    } else if (jn.has("E_J_GHz")) {
      junction = JunctionSpec::from_ej_hz(jn.at("E_J_GHz").number() * 1e9, sign);
    } else {
      const Spectroscopy s = ej_from_spectroscopy(jn.at("f_ge_GHz").number() * 1e9, jn.at("alpha_MHz").number() * 1e6);
      junction = {s.ej, sign};
      j["E_C_GHz"] = to_hz(s.ec) / 1e9;
      if (!s.warning.empty()) j["warning"] = s.warning;
    }
  } catch (const ArgumentError& err) {
    jn.fail(err.what());
  }
  j["junction"] = {{"E_J_GHz", junction.ej_hz() / 1e9}, {"L_J_nH", junction.inductance() * 1e9}};

  const std::string method = e.string("method", "perturbative");
  if (method != "perturbative" && method != "diagonalize")
    e.at("method").fail("method must be \"perturbative\" or \"diagonalize\"");
  j["method"] = method;
  const auto qubit = std::find_if(modes.begin(), modes.end(), [](const EprMode& m) { return m.role == ModeRole::qubit; });
  const auto res = std::find_if(modes.begin(), modes.end(), [](const EprMode& m) { return m.role == ModeRole::resonator; });
  if (modes.size() == 2) {
    if (qubit == modes.end() || res == modes.end()) e.at("modes").fail("need one qubit and one resonator mode");
    try {
      j["perturbative"] = hamiltonian_json(perturbative_params(*qubit, *res, junction));
    } catch (const ArgumentError& err) {
      e.fail(err.what());
    }
  } else if (method == "perturbative") {
    e.at("modes").fail("perturbative parameters need a qubit and a resonator mode");
  }
  if (method == "diagonalize") {
    const long long n_max = e.integer("n_max", 12), order = e.integer("order", 4);
    if (n_max < 6) e.at("n_max").fail("n_max must be >= 6");
    if (order != 4 && order != 6 && order != 8) e.at("order").fail("order must be 4, 6 or 8");
    const SpectrumParams s = diagonalize(modes, junction, static_cast<int>(n_max), static_cast<int>(order));
    ojson d{{"n_max", n_max}, {"order", order}, {"alpha_q_MHz", s.alpha_q / 1e6}, {"f_q_GHz", s.f_q_dressed / 1e9}};
    if (modes.size() == 2) {
      d["alpha_r_MHz"] = s.alpha_r / 1e6;
      d["chi_qr_MHz"] = s.chi_qr / 1e6;
      d["f_r_GHz"] = s.f_r_dressed / 1e9;
    }
    j["diagonalized"] = d;
  }
  return {"epr", "", {{"epr.json", dump(j)}}};
}

inline Strategy parse_strategy(const ConfigNode& a) {
  const std::string s = a.string("strategy", "threshold");
  if (s == "threshold") {
    const double tau = a.number("tau", 0.5);
    if (!(tau > 0.0 && tau <= 1.0)) a.at("tau").fail("tau must lie in (0, 1]");
    return MarkThreshold{tau};
  }
  if (s == "dorfler") {
    const double theta = a.number("theta", 0.5);
    if (!(theta > 0.0 && theta <= 1.0)) a.at("theta").fail("theta must lie in (0, 1]");
    return MarkDorfler{theta};
  }
  if (s == "uniform") return RefineUniformly{};
  a.at("strategy").fail("strategy must be \"threshold\", \"dorfler\" or \"uniform\"");
}

inline StudyOutput job_converge(const Job& job) {
  const LoadedMesh m = load_geometry(job);
  const CapacitanceOptions fem = parse_fem(job);
  AmrOptions ao;
  ao.timing = job.timing;
  if (auto a = job.root.find("amr")) {
    a->allow_only({"strategy", "tau", "theta", "max_dof", "target", "max_iterations"});
    ao.strategy = parse_strategy(*a);
    const long long md = a->integer("max_dof", static_cast<long long>(ao.max_dof));
    if (md < 1) a->at("max_dof").fail("max_dof must be positive");
    ao.max_dof = static_cast<std::size_t>(md);
    ao.target_rel_change = a->number("target", ao.target_rel_change);
    if (!(ao.target_rel_change > 0.0)) a->at("target").fail("target must be positive");
    ao.max_iterations = static_cast<int>(a->integer("max_iterations", ao.max_iterations));
    if (ao.max_iterations < 1) a->at("max_iterations").fail("max_iterations must be >= 1");
  }

  const ConfigNode q = job.root.at("quantity");
  const std::string kind = q.at("kind").string();
  AmrProblem problem;
  std::optional<double> analytic;
  std::string unit;
  if (kind == "capacitance") {
    q.allow_only({"kind", "row", "col", "conductors"});
    CapacitanceProblem p{m.mesh, pick_tags(m.mesh, q.find("conductors"), conductor_tags(m.mesh)), m.permittivity};
    p.options = fem;
    auto index = [&](const char* key) {
      const int tag = m.mesh.find_tag(q.at(key).string()).value_or(-1);
      const auto it = std::find(p.conductors.begin(), p.conductors.end(), tag);
      if (it == p.conductors.end()) q.at(key).fail("not one of the job's conductors");
      return static_cast<std::size_t>(it - p.conductors.begin());
    };
    p.row = index("row");
    p.col = index("col");
    if (p.conductors.size() < 2) q.fail("need at least two conductors");
    if (m.spec) {
      if (const auto* an = std::get_if<AnnulusGeometry>(&m.spec->shape); an && p.conductors.size() == 2) {
        const double eps = m.permittivity.begin()->second;
        const double c = 2.0 * constants::pi * constants::epsilon0 * eps / std::log(an->outer_radius / an->inner_radius);
        analytic = p.row == p.col ? c : -c;
      }
    }
    unit = "F/m";
    problem = p;
  } else if (kind == "eigenvalue" || kind == "frequency") {
    q.allow_only({"kind", "mode", "dirichlet"});
    EigenProblem p{m.mesh, pick_tags(m.mesh, q.find("dirichlet"), boundary_tags(m.mesh))};
    const long long mode = q.integer("mode", 1);
    if (mode < 1) q.at("mode").fail("mode is 1-based");
    p.mode = static_cast<std::size_t>(mode - 1);
    p.frequency = kind == "frequency";
    p.options.order = fem.order;
    p.options.seed = job.seed;
    p.options.workers = job.workers;
    if (m.spec && !q.has("dirichlet"))
      if (const auto* r = std::get_if<RectangleGeometry>(&m.spec->shape)) {
        std::vector<double> k2;
        for (int a = 1; a <= 12; ++a)
          for (int b = 1; b <= 12; ++b)
            k2.push_back(constants::pi * constants::pi * (a * a / (r->width * r->width) + b * b / (r->height * r->height)));
        std::sort(k2.begin(), k2.end());
        if (p.mode < 20) {
          const double v = k2[p.mode];
          analytic = p.frequency ? constants::c_light * std::sqrt(v) / (2.0 * constants::pi) : v;
        }
      }
    unit = p.frequency ? "Hz" : "1/m^2";
    problem = p;
  } else {
    q.at("kind").fail("kind must be \"capacitance\", \"eigenvalue\" or \"frequency\"");
  }

  const ConvergenceTrace t = amr_loop(problem, ao);
  std::ostringstream csv;
  write_trace_csv(t, csv);
  ojson j;
  j["quantity"] = kind;
  j["unit"] = unit;
  j["reason"] = t.reason;
  j["rows"] = t.rows.size();
  j["final_dof"] = t.rows.back().dof;
  j["final_value"] = t.rows.back().value;
  j["final_estimator"] = t.rows.back().estimator;
  if (analytic) {
    j["analytic"] = *analytic;
    j["relative_error"] = (t.rows.back().value - *analytic) / std::abs(*analytic);
  }
  if (t.rows.size() >= 3) {
    try {
      const Extrapolation e = extrapolate(t, 5);
      j["extrapolation"] = {{"value_inf", e.value_inf}, {"rate", e.rate}, {"residual", e.residual}};
    } catch (const FitError&) {
      j["extrapolation"] = nullptr;
    }
  }
  return {"converge", "", {{"trace.csv", csv.str()}, {"converge.json", dump(j)}}};
}

inline StudyOutput job_rmse(const Job& job) {
  struct Group {
    std::string unit;
    std::vector<ComparisonRow> rows;
  };
  std::vector<std::pair<std::string, Group>> groups;
  for (const auto& n : job.root.at("rows").items()) {
    n.allow_only({"label", "parameter", "simulated", "measured", "unit"});
    const std::string param = n.string("parameter", "value");
    ComparisonRow r{n.string("label", ""), n.at("simulated").number(), n.at("measured").number(), n.string("unit", "")};
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == param; });
    if (it == groups.end()) {
      groups.push_back({param, {r.unit, {}}});
      it = groups.end() - 1;
    }
    if (r.unit != it->second.unit) n.fail("unit differs from earlier rows of parameter \"" + param + "\"");
    if (r.measured == 0.0) n.at("measured").fail("measured value 0 makes the percentage RMSE undefined");
    it->second.rows.push_back(r);
  }
  if (groups.empty()) job.root.at("rows").fail("need at least one row");
  ojson j = ojson::object();
  for (const auto& [param, g] : groups)
    j[param] = {{"unit", g.unit},
                {"count", g.rows.size()},
                {"absolute", rmse(g.rows, RmseMode::absolute)},
                {"percentage", rmse(g.rows, RmseMode::percentage)}};
  return {"rmse", "", {{"rmse.json", dump(j)}}};
}

inline StudyOutput job_amdahl(const Job& job) {
  std::vector<ScalingSample> samples;
  ojson j;
  if (auto s = job.root.find("samples")) {
    for (const auto& n : s->items()) {
      n.allow_only({"workers", "seconds"});
      const long long w = n.at("workers").integer();
      const double t = n.at("seconds").number();
      if (w < 1 || !(t > 0.0)) n.fail("need workers >= 1 and seconds > 0");
      samples.push_back({static_cast<int>(w), t});
    }
    j["source"] = "config";
  } else {
    const ConfigNode meas = job.root.at("measure");
    meas.allow_only({"elements", "workers", "repeats", "order"});
    const long long elements = meas.integer("elements", 100000);
    if (elements < 2) meas.at("elements").fail("elements must be >= 2");
    const int side = static_cast<int>(std::ceil(std::sqrt(elements / 2.0)));
    std::vector<int> workers{1, 2, 4};
    if (auto w = meas.find("workers")) {
      workers.clear();
      for (const auto& n : w->items()) {
        if (n.integer() < 1) n.fail("worker counts must be >= 1");
        workers.push_back(static_cast<int>(n.integer()));
      }
    }
    GeometrySpec g;
    g.shape = RectangleGeometry{1.0, 1.0, side, side};
    const Mesh mesh = generate(g);
    samples = measure_assembly_scaling(mesh, static_cast<int>(meas.integer("order", 1)), workers,
                                       static_cast<int>(meas.integer("repeats", 3)));
    j["source"] = "assembly";
    j["elements"] = mesh.num_elements();
  }
  const AmdahlFit f = amdahl_fit(samples);
  ojson arr = ojson::array();
  for (const auto& s : samples) arr.push_back({{"workers", s.workers}, {"seconds", s.seconds}});
  j["samples"] = arr;
  j["T1_s"] = f.t1;
  j["parallel_fraction"] = f.parallel_fraction;
  j["residual"] = f.residual;
  return {"amdahl", "", {{"amdahl.json", dump(j)}}};
}

}  // namespace detail

inline const std::vector<std::string>& study_jobs() {
  static const std::vector<std::string> jobs{"mesh", "cap", "modes", "epr", "converge", "rmse", "amdahl"};
  return jobs;
}

/// Parses `config_text`, runs the job and returns its output files.
/// Config problems raise ConfigLineError; solver failures propagate.
inline StudyOutput run_study(const std::string& config_text, const StudyOptions& opt = {}) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(config_text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, config_text.size());  // byte is 1-based
    const std::size_t line = 1 + std::count(config_text.begin(), config_text.begin() + upto, '\n');
    throw ConfigLineError(line, std::string("invalid JSON: ") + e.what());
  }
  const auto lines = detail::json_lines(config_text);
  const ConfigNode root(doc, "", lines);
  if (!doc.is_object()) root.fail("top level must be a JSON object");
  const std::string job_name = root.at("job").string();
  if (std::find(study_jobs().begin(), study_jobs().end(), job_name) == study_jobs().end())
    root.at("job").fail("unknown job \"" + job_name + "\"");
  if (opt.expect_job && *opt.expect_job != job_name)
    root.at("job").fail("config declares job \"" + job_name + "\" but was run as \"" + *opt.expect_job + "\"");
  root.allow_only({"job", "geometry", "mesh_file", "permittivity", "fem", "amr", "epr", "output_dir", "timing", "seed",
                   "conductors", "open_boundary", "eps_eff", "count", "dirichlet", "fields", "resonator", "quantity",
                   "rows", "samples", "measure"});

  long long seed = root.integer("seed", 42);
  if (seed < 0) root.at("seed").fail("seed must be non-negative");
  detail::Job job{root, resolve_workers(opt.workers), opt.seed.value_or(static_cast<std::uint64_t>(seed)),
                  opt.timing.value_or(root.boolean("timing", true)), opt.base_dir};

  StudyOutput out;
  if (job_name == "mesh") out = detail::job_mesh(job);
  else if (job_name == "cap") out = detail::job_cap(job);
  else if (job_name == "modes") out = detail::job_modes(job);
  else if (job_name == "epr") out = detail::job_epr(job);
  else if (job_name == "converge") out = detail::job_converge(job);
  else if (job_name == "rmse") out = detail::job_rmse(job);
  else out = detail::job_amdahl(job);
  out.output_dir = opt.output_dir.value_or(root.string("output_dir", "fieldforge_out"));
  return out;
}

inline void write_study(const StudyOutput& out) {
  const std::filesystem::path dir = out.output_dir;
  std::filesystem::create_directories(dir);
  for (const auto& [name, contents] : out.files) {
    std::ofstream f(dir / name, std::ios::binary);
    f << contents;
    if (!f) throw Error("cannot write " + (dir / name).string());
  }
}

}  // namespace fieldforge
