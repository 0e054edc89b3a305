#pragma once

// Plain-text mesh interchange:
//
//   S3MESH 1
//   <V> <F> <genus>
//   V lines: vertex coordinates (4 floats)
//   V lines: vertex normals (4 floats)
//   F lines: zero-based triangle indices
//
// Floats are written with 17 significant digits so doubles survive a
// round trip.  Readers renormalize vertices and re-orthogonalize normals;
// curvature data is re-estimated on load (the format does not carry it).

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "wlab/mesh.hpp"

namespace wlab {

inline void write_s3mesh(std::ostream& os, const SurfaceMesh& m) {
  os << "S3MESH 1\n";
  os << m.vertices.size() << ' ' << m.faces.size() << ' ' << m.genus << '\n';
  char line[160];
  for (const auto& v : m.vertices) {
    std::snprintf(line, sizeof line, "%.17g %.17g %.17g %.17g\n", v.p()[0],
                  v.p()[1], v.p()[2], v.p()[3]);
    os << line;
  }
  for (const auto& n : m.normals) {
    std::snprintf(line, sizeof line, "%.17g %.17g %.17g %.17g\n", n[0], n[1],
                  n[2], n[3]);
    os << line;
  }
  for (const auto& f : m.faces)
    os << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

inline void write_s3mesh_file(const std::string& path, const SurfaceMesh& m) {
  std::ofstream os(path);
  if (!os) throw InvalidInputError("write_s3mesh: cannot open " + path);
  write_s3mesh(os, m);
}

inline SurfaceMesh read_s3mesh(std::istream& is,
                               bool estimate_curvature = true) {
  std::string magic;
  int version = -1;
  if (!(is >> magic >> version) || magic != "S3MESH" || version != 1)
    throw InvalidInputError("read_s3mesh: bad header");
  long nv = -1, nf = -1, genus = -1;
  if (!(is >> nv >> nf >> genus) || nv < 3 || nf < 1 || genus < 0)
    throw InvalidInputError("read_s3mesh: bad counts line");

  SurfaceMesh m;
  m.vertices.reserve(nv);
  for (long i = 0; i < nv; ++i) {
    Vec4 x;
    if (!(is >> x[0] >> x[1] >> x[2] >> x[3]))
      throw InvalidInputError("read_s3mesh: truncated vertex block");
    m.vertices.emplace_back(x);
  }
  for (long i = 0; i < nv; ++i) {
    Vec4 n;
    if (!(is >> n[0] >> n[1] >> n[2] >> n[3]))
      throw InvalidInputError("read_s3mesh: truncated normal block");
    n -= n.dot(m.vertices[i].p()) * m.vertices[i].p();
    double len = n.norm();
    if (!(len > 1e-8))
      throw InvalidInputError("read_s3mesh: normal parallel to vertex");
    m.normals.push_back(n / len);
  }
  for (long i = 0; i < nf; ++i) {
    std::array<int, 3> f;
    if (!(is >> f[0] >> f[1] >> f[2]))
      throw InvalidInputError("read_s3mesh: truncated face block");
    for (int v : f)
      if (v < 0 || v >= nv)
        throw InvalidInputError("read_s3mesh: face index out of range");
    m.faces.push_back(f);
  }

  m.genus = int(genus);
  if (mesh_euler_characteristic(m) != 2 - 2 * m.genus)
    throw InvalidInputError("read_s3mesh: genus inconsistent with faces");
  compute_vertex_areas(m);
  m.k1.assign(nv, 0.0);
  m.k2.assign(nv, 0.0);
  m.analytic_curvature = false;
  if (estimate_curvature) apply_estimated_curvatures(m);

  // reference point on the normal side, half a local edge off the surface
  double e = std::numeric_limits<double>::infinity();
  for (const auto& f : m.faces)
    for (int k = 0; k < 3; ++k)
      if (f[k] == 0 || f[(k + 1) % 3] == 0)
        e = std::min(e, (m.vertices[f[k]].p() - m.vertices[f[(k + 1) % 3]].p()).norm());
  m.a_star_ref = exp_point(m.vertices[0], m.normals[0], 0.5 * e);
  return m;
}

inline SurfaceMesh read_s3mesh_file(const std::string& path,
                                    bool estimate_curvature = true) {
  std::ifstream is(path);
  if (!is) throw InvalidInputError("read_s3mesh: cannot open " + path);
  return read_s3mesh(is, estimate_curvature);
}

}  // namespace wlab
