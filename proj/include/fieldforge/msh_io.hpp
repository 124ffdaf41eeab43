#pragma once

#include <charconv>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fieldforge/errors.hpp"
#include "fieldforge/mesh.hpp"

namespace fieldforge {

struct MshReadResult {
  Mesh mesh;
  std::size_t skipped_elements = 0;  // elements of unsupported types
};

/// Triangles below this area are treated as a corrupt file.
inline constexpr double kDegenerateArea = 1e-20;

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  }

  std::string expect(const char* what) {
    std::string line;
    if (!next(line)) throw ParseError(number_ + 1, std::string("unexpected end of file, expected ") + what);
    return line;
  }

  std::size_t line() const { return number_; }

 private:
  std::istream& in_;
  std::size_t number_ = 0;
};

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  const auto b = s.find_last_not_of(" \t");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

inline std::size_t parse_count(LineReader& r, const char* section) {
  const std::string line = r.expect(section);
  std::istringstream ss(line);
  long long n = -1;
  if (!(ss >> n) || n < 0) throw ParseError(r.line(), std::string("bad entity count in ") + section);
  return static_cast<std::size_t>(n);
}

inline void expect_end(LineReader& r, const std::string& name) {
  const std::string line = trim(r.expect(("$End" + name).c_str()));
  if (line != "$End" + name) throw ParseError(r.line(), "expected $End" + name + ", found '" + line + "'");
}

}  // namespace detail

/// Reads a Gmsh MSH 2.2 ASCII mesh. Lines become boundary edges, triangles
/// become elements; physical tags map through $PhysicalNames. Clockwise
/// triangles are reoriented (vertex 0 is kept in place).
inline MshReadResult load_msh(std::istream& in) {
  detail::LineReader r(in);
  MshReadResult result;
  Mesh& mesh = result.mesh;
  std::unordered_map<long long, int> node_index;
  bool have_format = false, have_nodes = false, have_elements = false;

  std::string line;
  while (r.next(line)) {
    const std::string head = detail::trim(line);
    if (head.empty() || head[0] != '$') throw ParseError(r.line(), "expected a section header, found '" + head + "'");
    const std::string name = head.substr(1);

    if (name == "MeshFormat") {
      std::istringstream ss(r.expect("format line"));
      std::string version;
      int file_type = -1, data_size = 0;
      if (!(ss >> version >> file_type >> data_size)) throw ParseError(r.line(), "malformed $MeshFormat line");
      if (version != "2.2" && version != "2.2.0") throw UnsupportedVersionError("unsupported MSH version " + version);
      if (file_type != 0) throw UnsupportedVersionError("binary MSH files are not supported");
      detail::expect_end(r, name);
      have_format = true;
    } else if (!have_format) {
      throw ParseError(r.line(), "$MeshFormat must come first");
    } else if (name == "PhysicalNames") {
      const std::size_t n = detail::parse_count(r, "$PhysicalNames");
      for (std::size_t i = 0; i < n; ++i) {
        const std::string l = r.expect("physical name");
        std::istringstream ss(l);
        int dim = 0, tag = 0;
        if (!(ss >> dim >> tag)) throw ParseError(r.line(), "malformed physical name");
        const auto q0 = l.find('"'), q1 = l.rfind('"');
        if (q0 == std::string::npos || q1 == q0) throw ParseError(r.line(), "physical name must be quoted");
        if (mesh.physical_names.count(tag)) throw ParseError(r.line(), "duplicate physical tag " + std::to_string(tag));
        mesh.physical_names[tag] = {dim, l.substr(q0 + 1, q1 - q0 - 1)};
      }
      detail::expect_end(r, name);
    } else if (name == "Nodes") {
      const std::size_t n = detail::parse_count(r, "$Nodes");
      mesh.nodes.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::istringstream ss(r.expect("node"));
        long long id = 0;
        double x = 0, y = 0, z = 0;
        if (!(ss >> id >> x >> y >> z)) throw ParseError(r.line(), "malformed node line");
        if (!node_index.emplace(id, static_cast<int>(mesh.nodes.size())).second)
          throw ParseError(r.line(), "duplicate node id " + std::to_string(id));
        mesh.nodes.push_back({x, y});
      }
      detail::expect_end(r, name);
      have_nodes = true;
    } else if (name == "Elements") {
      if (!have_nodes) throw ParseError(r.line(), "$Elements before $Nodes");
      const std::size_t n = detail::parse_count(r, "$Elements");
      for (std::size_t i = 0; i < n; ++i) {
        std::istringstream ss(r.expect("element"));
        long long id = 0;
        int type = 0, ntags = 0;
        if (!(ss >> id >> type >> ntags) || ntags < 0) throw ParseError(r.line(), "malformed element line");
        std::vector<long long> tags(ntags);
        for (auto& t : tags)
          if (!(ss >> t)) throw ParseError(r.line(), "missing element tag");
        const int physical = ntags > 0 ? static_cast<int>(tags[0]) : 0;
        const int nverts = type == 1 ? 2 : type == 2 ? 3 : type == 15 ? 1 : 0;
        if (nverts == 0) {
          ++result.skipped_elements;
          continue;
        }
        std::array<int, 3> v{};
        for (int k = 0; k < nverts; ++k) {
          long long nid = 0;
          if (!(ss >> nid)) throw ParseError(r.line(), "missing element node");
          auto it = node_index.find(nid);
          if (it == node_index.end()) throw ParseError(r.line(), "unknown node id " + std::to_string(nid));
          v[k] = it->second;
        }
        if (type == 1) {
          mesh.boundary_edges.push_back({{v[0], v[1]}, physical});
        } else if (type == 2) {
          double a = signed_area(mesh.nodes[v[0]], mesh.nodes[v[1]], mesh.nodes[v[2]]);
          if (std::abs(a) < kDegenerateArea)
            throw GeometryError("line " + std::to_string(r.line()) + ": degenerate triangle " + std::to_string(id));
          if (a < 0) std::swap(v[1], v[2]);
          mesh.elements.push_back(v);
          mesh.region_tags.push_back(physical);
        }
      }
      detail::expect_end(r, name);
      have_elements = true;
    } else {
      // Unknown section: skip to its terminator.
      std::string l;
      for (;;) {
        if (!r.next(l)) throw ParseError(r.line() + 1, "unterminated section $" + name);
        if (detail::trim(l) == "$End" + name) break;
        if (detail::trim(l).rfind("$End", 0) == 0)
          throw ParseError(r.line(), "mismatched section end '" + detail::trim(l) + "' in $" + name);
      }
    }
  }
  if (!have_format) throw ParseError(r.line(), "missing $MeshFormat section");
  if (!have_nodes) throw ParseError(r.line(), "missing $Nodes section");
  if (!have_elements) throw ParseError(r.line(), "missing $Elements section");
  return result;
}

inline MshReadResult load_msh_string(const std::string& text) {
  std::istringstream in(text);
  return load_msh(in);
}

/// Writes MSH 2.2 ASCII: boundary edges (type 1) then triangles (type 2),
/// both with (physical, elementary) = (tag, tag). Coordinates use the
/// shortest round-trip decimal form, so a second save is byte-identical.
inline void save_msh(const Mesh& mesh, std::ostream& out) {
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  if (!mesh.physical_names.empty()) {
    out << "$PhysicalNames\n" << mesh.physical_names.size() << '\n';
    for (const auto& [tag, pn] : mesh.physical_names) out << pn.dim << ' ' << tag << " \"" << pn.name << "\"\n";
    out << "$EndPhysicalNames\n";
  }
  out << "$Nodes\n" << mesh.num_nodes() << '\n';
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
    out << i + 1 << ' ' << detail::format_double(mesh.nodes[i].x) << ' ' << detail::format_double(mesh.nodes[i].y)
        << " 0\n";
  out << "$EndNodes\n";
  out << "$Elements\n" << mesh.boundary_edges.size() + mesh.num_elements() << '\n';
  std::size_t id = 1;
  for (const auto& be : mesh.boundary_edges)
    out << id++ << " 1 2 " << be.tag << ' ' << be.tag << ' ' << be.nodes[0] + 1 << ' ' << be.nodes[1] + 1 << '\n';
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto& t = mesh.elements[e];
    out << id++ << " 2 2 " << mesh.region_tags[e] << ' ' << mesh.region_tags[e] << ' ' << t[0] + 1 << ' ' << t[1] + 1
        << ' ' << t[2] + 1 << '\n';
  }
  out << "$EndElements\n";
}

inline std::string save_msh_string(const Mesh& mesh) {
  std::ostringstream out;
  save_msh(mesh, out);
  return out.str();
}

}  // namespace fieldforge
