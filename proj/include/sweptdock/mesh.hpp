// Triangle mesh container and file readers (binary STL, ASCII OBJ).
// Loading welds duplicate vertices and drops degenerate triangles; meshes
// are millimeters with no unit autodetection.

#pragma once

#include "sweptdock/core.hpp"
#include "sweptdock/se3.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <vector>

namespace sweptdock {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }

  std::array<Vec3, 3> triangle_vertices(int t) const {
    const auto& tri = triangles[static_cast<std::size_t>(t)];
    return {vertices[static_cast<std::size_t>(tri[0])],
            vertices[static_cast<std::size_t>(tri[1])],
            vertices[static_cast<std::size_t>(tri[2])]};
  }

  double triangle_area(int t) const {
    auto [a, b, c] = triangle_vertices(t);
    return 0.5 * (b - a).cross(c - a).norm();
  }

  Aabb bounds() const {
    Aabb box;
    for (const auto& v : vertices) box.expand(v);
    return box;
  }
};

enum class MeshFormat { stl_binary, obj_ascii };

namespace detail {

struct QuantizedKey {
  std::int64_t x, y, z;
  bool operator==(const QuantizedKey& o) const { return x == o.x && y == o.y && z == o.z; }
};

struct QuantizedKeyHash {
  std::size_t operator()(const QuantizedKey& k) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::int64_t v : {k.x, k.y, k.z}) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace detail

/// Merges vertices closer than `tol` and drops triangles with area below
/// 1e-12 mm^2 or repeated indices. Preserves triangle order.
inline void clean_mesh(TriMesh& mesh, double tol = 1e-6) {
  std::unordered_map<detail::QuantizedKey, int, detail::QuantizedKeyHash> lookup;
  std::vector<Vec3> merged;
  std::vector<int> remap(mesh.vertices.size());
  const double inv = 1.0 / tol;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    detail::QuantizedKey key{static_cast<std::int64_t>(std::llround(v.x() * inv)),
                             static_cast<std::int64_t>(std::llround(v.y() * inv)),
                             static_cast<std::int64_t>(std::llround(v.z() * inv))};
    auto [it, inserted] = lookup.try_emplace(key, static_cast<int>(merged.size()));
    if (inserted) merged.push_back(v);
    remap[i] = it->second;
  }

  std::vector<std::array<int, 3>> kept;
  kept.reserve(mesh.triangles.size());
  for (auto& tri : mesh.triangles) {
    std::array<int, 3> t{remap[static_cast<std::size_t>(tri[0])],
                         remap[static_cast<std::size_t>(tri[1])],
                         remap[static_cast<std::size_t>(tri[2])]};
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
    const Vec3 &a = merged[static_cast<std::size_t>(t[0])], &b = merged[static_cast<std::size_t>(t[1])],
               &c = merged[static_cast<std::size_t>(t[2])];
    if (0.5 * (b - a).cross(c - a).norm() <= 1e-12) continue;
    kept.push_back(t);
  }
  mesh.vertices = std::move(merged);
  mesh.triangles = std::move(kept);
}

inline TriMesh load_stl_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open STL file: " + path);
  in.seekg(0, std::ios::end);
  std::int64_t file_size = in.tellg();
  in.seekg(0);
  if (file_size < 84) {
    throw io_error(path + ": binary STL truncated at byte " + std::to_string(file_size) +
                   " (80-byte header + 4-byte count required)");
  }
  char header[80];
  in.read(header, 80);
  std::uint32_t declared = 0;
  in.read(reinterpret_cast<char*>(&declared), 4);
  const std::int64_t available = (file_size - 84) / 50;
  if (available < declared) {
    throw io_error(path + ": binary STL declares " + std::to_string(declared) +
                   " triangle records but only " + std::to_string(available) +
                   " fit in the file (truncated at byte " + std::to_string(file_size) + ")");
  }
  TriMesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(declared) * 3);
  mesh.triangles.reserve(declared);
  std::vector<char> record(50);
  for (std::uint32_t t = 0; t < declared; ++t) {
    in.read(record.data(), 50);
    if (static_cast<std::size_t>(in.gcount()) != 50) {
      throw io_error(path + ": unexpected end of STL record " + std::to_string(t));
    }
    float raw[12];
    std::memcpy(raw, record.data(), 48);  // normal (ignored) + 3 vertices
    int base = static_cast<int>(mesh.vertices.size());
    for (int v = 0; v < 3; ++v) {
      mesh.vertices.emplace_back(raw[3 + 3 * v + 0], raw[3 + 3 * v + 1], raw[3 + 3 * v + 2]);
    }
    mesh.triangles.push_back({base, base + 1, base + 2});
  }
  clean_mesh(mesh);
  if (mesh.empty()) throw invalid_input(path + ": STL contains no usable triangles");
  return mesh;
}

inline TriMesh load_obj_ascii(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open OBJ file: " + path);
  TriMesh mesh;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) {
        throw io_error(path + ": malformed vertex at line " + std::to_string(line_no));
      }
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string token;
      while (ss >> token) {
        // "v", "v/vt", "v//vn", "v/vt/vn" all start with the vertex index.
        std::size_t pos = 0;
        long v = 0;
        try {
          v = std::stol(token, &pos);
        } catch (const std::exception&) {
          throw io_error(path + ": malformed face index '" + token + "' at line " +
                         std::to_string(line_no));
        }
        if (v < 1 || static_cast<std::size_t>(v) > mesh.vertices.size()) {
          throw io_error(path + ": face index " + std::to_string(v) + " out of range at line " +
                         std::to_string(line_no));
        }
        idx.push_back(static_cast<int>(v - 1));
      }
      if (idx.size() < 3) {
        throw io_error(path + ": face with fewer than 3 vertices at line " + std::to_string(line_no));
      }
      for (std::size_t k = 2; k < idx.size(); ++k) {
        mesh.triangles.push_back({idx[0], idx[k - 1], idx[k]});
      }
    }
  }
  clean_mesh(mesh);
  if (mesh.empty()) throw invalid_input(path + ": OBJ contains no usable triangles");
  return mesh;
}

inline TriMesh load_mesh(const std::string& path, MeshFormat format) {
  return format == MeshFormat::stl_binary ? load_stl_binary(path) : load_obj_ascii(path);
}

/// Picks the reader from the file extension (.stl binary, .obj ascii).
inline TriMesh load_mesh(const std::string& path) {
  auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == "stl") return load_stl_binary(path);
  if (ext == "obj") return load_obj_ascii(path);
  throw invalid_input("unknown mesh extension '" + ext + "' for " + path +
                      " (expected .stl or .obj)");
}

/// True iff the mesh is a closed oriented 2-manifold: every undirected edge
/// is used by exactly two triangles, once in each direction.
inline bool is_watertight(const TriMesh& mesh) {
  if (mesh.empty()) return false;
  std::map<std::pair<int, int>, int> directed;
  for (const auto& tri : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      int a = tri[static_cast<std::size_t>(e)];
      int b = tri[static_cast<std::size_t>((e + 1) % 3)];
      if (++directed[{a, b}] > 1) return false;  // non-manifold fan
    }
  }
  for (const auto& [edge, count] : directed) {
    auto rev = directed.find({edge.second, edge.first});
    if (rev == directed.end() || rev->second != count) return false;
  }
  return true;
}

/// Area-weighted centroid of the triangle surface.
inline Vec3 geometry_center(const TriMesh& mesh) {
  if (mesh.empty()) throw invalid_input("geometry_center: empty mesh");
  Vec3 weighted = Vec3::Zero();
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    auto [a, b, c] = mesh.triangle_vertices(static_cast<int>(t));
    double area = 0.5 * (b - a).cross(c - a).norm();
    weighted += area * (a + b + c) / 3.0;
    total += area;
  }
  return weighted / total;
}

/// Sub-mesh from a sorted unique list of triangle ids, reindexed compactly.
inline TriMesh extract_submesh(const TriMesh& mesh, const std::vector<int>& tri_ids) {
  TriMesh out;
  std::unordered_map<int, int> vmap;
  for (int t : tri_ids) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    std::array<int, 3> mapped{};
    for (int k = 0; k < 3; ++k) {
      auto [it, inserted] = vmap.try_emplace(tri[static_cast<std::size_t>(k)],
                                             static_cast<int>(out.vertices.size()));
      if (inserted) out.vertices.push_back(mesh.vertices[static_cast<std::size_t>(tri[static_cast<std::size_t>(k)])]);
      mapped[static_cast<std::size_t>(k)] = it->second;
    }
    out.triangles.push_back(mapped);
  }
  return out;
}

/// Returns a rigidly transformed copy of the mesh.
inline TriMesh transformed(const TriMesh& mesh, const Pose& pose) {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = pose * v;
  return out;
}

/// Minimal ASCII OBJ writer (v/f lines); used for the touchable sub-mesh.
inline void save_obj(const std::string& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open OBJ file for writing: " + path);
  char line[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(line, sizeof(line), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << line;
  }
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
}

}  // namespace sweptdock
