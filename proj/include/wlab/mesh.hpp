#pragma once

// Triangle meshes of closed surfaces in S^3.  Vertices live on the unit
// sphere, faces are consistently oriented triples, and each vertex carries
// the unit normal (tangent to S^3) together with principal curvatures
// k1 >= k2 taken with respect to that normal.  Blow-ups and distance
// computations depend on the orientation convention: the normal points into
// the complement component written A*, and curvatures use the sign for
// which a distance sphere with inward-pointing normal has k = cot r.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "wlab/chart.hpp"
#include "wlab/parallel.hpp"
#include "wlab/s3.hpp"

namespace wlab {

struct SurfaceMesh {
  std::vector<SpherePoint> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Vec4> normals;
  std::vector<double> k1, k2;
  std::vector<double> vertex_area;
  int genus = 0;
  bool analytic_curvature = false;

  // set by generators: chart and per-vertex chart coordinates
  std::shared_ptr<const ParametricSurface> chart;
  std::vector<Eigen::Vector2d> uv;

  // a point strictly inside the component the normals point into
  std::optional<SpherePoint> a_star_ref;

  std::size_t size() const { return vertices.size(); }
};

inline double triangle_area(const Vec4& a, const Vec4& b, const Vec4& c) {
  Vec4 e1 = b - a, e2 = c - a;
  double g = e1.squaredNorm() * e2.squaredNorm() - std::pow(e1.dot(e2), 2);
  return 0.5 * std::sqrt(std::max(0.0, g));
}

inline double mesh_area(const SurfaceMesh& m) {
  double s = 0.0;
  for (const auto& f : m.faces)
    s += triangle_area(m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]);
  return s;
}

// Mixed Voronoi weights: Voronoi corner areas on non-obtuse triangles,
// T/2 at the obtuse corner and T/4 elsewhere otherwise.  The three corner
// weights of every triangle sum to its area, so the total is exact.
inline void compute_vertex_areas(SurfaceMesh& m) {
  m.vertex_area.assign(m.vertices.size(), 0.0);
  for (const auto& f : m.faces) {
    const Vec4& A = m.vertices[f[0]];
    const Vec4& B = m.vertices[f[1]];
    const Vec4& C = m.vertices[f[2]];
    double a2 = (B - C).squaredNorm();  // opposite f[0]
    double b2 = (A - C).squaredNorm();
    double c2 = (A - B).squaredNorm();
    double T = triangle_area(A, B, C);
    if (!(T > 0.0))
      throw InvalidInputError("compute_vertex_areas: degenerate triangle");
    // cotangents via dot/cross identities
    auto cot = [&](const Vec4& tip, const Vec4& p, const Vec4& q) {
      Vec4 u = p - tip, v = q - tip;
      double cr = std::sqrt(std::max(
          0.0, u.squaredNorm() * v.squaredNorm() - std::pow(u.dot(v), 2)));
      return u.dot(v) / std::max(cr, 1e-300);
    };
    double cotA = cot(A, B, C), cotB = cot(B, C, A), cotC = cot(C, A, B);
    if (cotA < 0.0 || cotB < 0.0 || cotC < 0.0) {
      int obtuse = cotA < 0.0 ? 0 : (cotB < 0.0 ? 1 : 2);
      for (int k = 0; k < 3; ++k)
        m.vertex_area[f[k]] += (k == obtuse) ? T / 2.0 : T / 4.0;
    } else {
      m.vertex_area[f[0]] += (b2 * cotB + c2 * cotC) / 8.0;
      m.vertex_area[f[1]] += (a2 * cotA + c2 * cotC) / 8.0;
      m.vertex_area[f[2]] += (a2 * cotA + b2 * cotB) / 8.0;
    }
  }
}

// Validates that every undirected edge is shared by exactly two faces with
// opposite orientations, then returns V - E + F.
inline int mesh_euler_characteristic(const SurfaceMesh& m) {
  std::unordered_map<std::uint64_t, int> edges;  // key -> direction balance
  std::unordered_map<std::uint64_t, int> count;
  auto key = [&](int a, int b) {
    return std::uint64_t(std::min(a, b)) << 32 | std::uint64_t(std::max(a, b));
  };
  for (const auto& f : m.faces) {
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      if (a == b || a < 0 || b < 0 || a >= int(m.vertices.size()) ||
          b >= int(m.vertices.size()))
        throw InvalidInputError("mesh: bad face index");
      edges[key(a, b)] += (a < b) ? 1 : -1;
      count[key(a, b)] += 1;
    }
  }
  for (const auto& [k, c] : count) {
    if (c != 2 || edges[k] != 0)
      throw InvalidInputError(
          "mesh: not a closed consistently oriented surface");
  }
  return int(m.vertices.size()) - int(count.size()) + int(m.faces.size());
}

inline double integrate(const SurfaceMesh& m, const std::vector<double>& f) {
  if (f.size() != m.vertices.size())
    throw InvalidInputError("integrate: value count mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * m.vertex_area[i];
  return s;
}

template <class Fn>
double integrate_fn(const SurfaceMesh& m, Fn&& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.vertices.size(); ++i)
    s += f(i) * m.vertex_area[i];
  return s;
}

// Integral of intrinsic curvature minus its topological value:
// int (1 + k1 k2) dA - 2 pi (2 - 2 g).
inline double gauss_bonnet_defect(const SurfaceMesh& m) {
  constexpr double pi = 3.14159265358979323846;
  double total = integrate_fn(m, [&](std::size_t i) {
    return 1.0 + m.k1[i] * m.k2[i];
  });
  return total - 2.0 * pi * (2.0 - 2.0 * m.genus);
}

inline std::vector<std::vector<int>> vertex_adjacency(const SurfaceMesh& m) {
  std::vector<std::vector<int>> adj(m.vertices.size());
  for (const auto& f : m.faces) {
    for (int k = 0; k < 3; ++k) {
      adj[f[k]].push_back(f[(k + 1) % 3]);
      adj[f[k]].push_back(f[(k + 2) % 3]);
    }
  }
  for (auto& v : adj) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return adj;
}

inline std::vector<int> two_ring(const std::vector<std::vector<int>>& adj,
                                 int i) {
  std::vector<int> out = adj[i];
  for (int j : adj[i])
    out.insert(out.end(), adj[j].begin(), adj[j].end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  out.erase(std::remove(out.begin(), out.end(), i), out.end());
  return out;
}

struct CurvatureEstimate {
  std::vector<double> k1, k2;
};

namespace detail {

// Quadric fit in the tangent plane at one vertex: heights over the (e1, e2)
// frame are fitted with linear plus quadratic terms on the two-ring; the
// quadratic part is the shape operator at second order.  Positions come
// through a callable so callers can fit against displaced vertex buffers.
template <class PosFn>
bool fit_principal_pair(const Vec4& p, const Vec4& n, const std::vector<int>& nb,
                        PosFn&& pos, double* k1, double* k2, std::string* why) {
  if (nb.size() < 5) {
    *why = "fewer than 5 fit neighbors";
    return false;
  }
  // surface tangent frame orthogonal to both p and n
  auto f = tangent_frame(SpherePoint(p));
  int pick = 0;
  for (int a = 1; a < 3; ++a)
    if (std::abs(f[a].dot(n)) < std::abs(f[pick].dot(n))) pick = a;
  Vec4 e1 = f[pick] - f[pick].dot(n) * n;
  e1.normalize();
  Vec4 e2 = cross4(p, n, e1);
  e2.normalize();

  Eigen::Matrix<double, 5, 5> ata = Eigen::Matrix<double, 5, 5>::Zero();
  Eigen::Matrix<double, 5, 1> atb = Eigen::Matrix<double, 5, 1>::Zero();
  for (int j : nb) {
    Vec4 d = pos(j) - p;
    double u = d.dot(e1), v = d.dot(e2), h = d.dot(n);
    Eigen::Matrix<double, 5, 1> row;
    row << u, v, 0.5 * u * u, u * v, 0.5 * v * v;
    ata += row * row.transpose();
    atb += row * h;
  }
  Eigen::LDLT<Eigen::Matrix<double, 5, 5>> ldlt(ata);
  Eigen::Matrix<double, 5, 1> sol = ldlt.solve(atb);
  if (!(ata * sol - atb).isZero(1e-8 * (1.0 + atb.norm()))) {
    *why = "rank-deficient fit neighborhood";
    return false;
  }
  double a = sol[2], b = sol[3], c = sol[4];
  double mean = 0.5 * (a + c);
  double s = std::sqrt(std::max(0.0, 0.25 * (a - c) * (a - c) + b * b));
  *k1 = mean + s;
  *k2 = mean - s;
  return true;
}

}  // namespace detail

inline CurvatureEstimate estimate_principal_curvatures(const SurfaceMesh& m,
                                                       int workers = 1) {
  auto adj = vertex_adjacency(m);
  CurvatureEstimate est;
  est.k1.assign(m.vertices.size(), 0.0);
  est.k2.assign(m.vertices.size(), 0.0);
  std::vector<std::string> failures(m.vertices.size());

  parallel_chunks(m.vertices.size(), 512, workers,
                  [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      std::vector<int> nb = two_ring(adj, int(i));
      detail::fit_principal_pair(
          m.vertices[i].p(), m.normals[i], nb,
          [&](int j) -> const Vec4& { return m.vertices[j].p(); },
          &est.k1[i], &est.k2[i], &failures[i]);
    }
  });

  for (std::size_t i = 0; i < failures.size(); ++i)
    if (!failures[i].empty())
      throw UnderDeterminedFitError("estimate_principal_curvatures: vertex " +
                                    std::to_string(i) + ": " + failures[i]);
  return est;
}

// Overwrites stored curvatures with fitted ones unless the mesh carries
// exact chart curvatures.
inline void apply_estimated_curvatures(SurfaceMesh& m, int workers = 1) {
  if (m.analytic_curvature) return;
  auto est = estimate_principal_curvatures(m, workers);
  m.k1 = std::move(est.k1);
  m.k2 = std::move(est.k2);
}

// Rebuilds normals, areas, and curvature estimates after vertex positions
// changed.  Normals come from face-accumulated cross products, globally
// oriented like the previous normal field when one is present.
inline void refresh_mesh_geometry(SurfaceMesh& m, int workers = 1) {
  if (m.analytic_curvature)
    throw InvalidInputError(
        "refresh_mesh_geometry: clear analytic_curvature before moving vertices");
  std::vector<Vec4> acc(m.size(), Vec4::Zero());
  for (const auto& f : m.faces) {
    Vec4 a = m.vertices[f[0]].p();
    Vec4 n = cross4(a, m.vertices[f[1]].p() - a, m.vertices[f[2]].p() - a);
    for (int k = 0; k < 3; ++k) acc[f[k]] += n;
  }
  double sign = 1.0;
  if (m.normals.size() == m.size()) {
    double agree = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) agree += acc[i].dot(m.normals[i]);
    if (agree < 0.0) sign = -1.0;
  }
  m.normals.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    Vec4 n = sign * acc[i];
    n -= n.dot(m.vertices[i].p()) * m.vertices[i].p();
    double len = n.norm();
    if (len < 1e-14)
      throw InvalidInputError("refresh_mesh_geometry: degenerate vertex star at " +
                              std::to_string(i));
    m.normals[i] = n / len;
  }
  compute_vertex_areas(m);
  apply_estimated_curvatures(m, workers);
}

namespace detail {

// Quad (00, 10, 01, 11) -> two triangles along the shorter chordal
// diagonal; ties pick the diagonal whose (min, max) index pair is lower.
inline void split_quad(std::vector<std::array<int, 3>>& faces,
                       const std::vector<SpherePoint>& verts, int v00, int v10,
                       int v01, int v11) {
  double d1 = (verts[v00].p() - verts[v11].p()).norm();
  double d2 = (verts[v10].p() - verts[v01].p()).norm();
  bool use_main;
  if (std::abs(d1 - d2) <= 1e-12 * std::max(1.0, std::max(d1, d2))) {
    use_main = std::minmax(v00, v11) < std::minmax(v10, v01);
  } else {
    use_main = d1 < d2;
  }
  if (use_main) {
    faces.push_back({v00, v10, v11});
    faces.push_back({v00, v11, v01});
  } else {
    faces.push_back({v10, v11, v01});
    faces.push_back({v10, v01, v00});
  }
}

inline void finalize(SurfaceMesh& m, int genus) {
  m.genus = genus;
  compute_vertex_areas(m);
  if (mesh_euler_characteristic(m) != 2 - 2 * genus)
    throw InvalidInputError("mesh generator: Euler characteristic mismatch");
}

}  // namespace detail

// Distance sphere about p.  Normals point toward p, so the component the
// normals face (A*) is the geodesic ball and k1 = k2 = cot r.
inline SurfaceMesh make_geodesic_sphere(const SpherePoint& p, double r,
                                        int res) {
  constexpr double pi = 3.14159265358979323846;
  if (!(r > 0.0 && r < pi))
    throw InvalidInputError("make_geodesic_sphere: radius outside (0, pi)");
  if (res < 4) throw InvalidInputError("make_geodesic_sphere: res < 4");

  auto chart = std::make_shared<SphereChart>(p, r);
  SurfaceMesh m;
  m.chart = chart;
  int rings = res - 1;
  auto id = [&](int i, int j) { return (i - 1) * res + ((j % res + res) % res); };
  double cr = std::cos(r), sr = std::sin(r);
  for (int i = 1; i <= rings; ++i) {
    for (int j = 0; j < res; ++j) {
      double u = pi * i / res, v = 2.0 * pi * j / res;
      m.vertices.emplace_back(chart->jet(u, v).x);
      m.uv.emplace_back(u, v);
    }
  }
  int top = int(m.vertices.size());
  m.vertices.emplace_back(chart->jet(0.0, 0.0).x);
  m.uv.emplace_back(0.0, 0.0);
  int bottom = int(m.vertices.size());
  m.vertices.emplace_back(chart->jet(pi, 0.0).x);
  m.uv.emplace_back(pi, 0.0);

  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    const Vec4& x = m.vertices[i].p();
    Vec4 omega = (x - cr * p.p()) / sr;
    m.normals.push_back(sr * p.p() - cr * omega);
    m.k1.push_back(cr / sr);
    m.k2.push_back(cr / sr);
  }

  for (int j = 0; j < res; ++j) {
    m.faces.push_back({top, id(1, j), id(1, j + 1)});
    m.faces.push_back({bottom, id(rings, j + 1), id(rings, j)});
  }
  for (int i = 1; i < rings; ++i)
    for (int j = 0; j < res; ++j)
      detail::split_quad(m.faces, m.vertices, id(i, j), id(i + 1, j),
                         id(i, j + 1), id(i + 1, j + 1));

  m.analytic_curvature = true;
  m.a_star_ref = p;
  detail::finalize(m, 0);
  return m;
}

// Product torus of radii (a, sqrt(1 - a^2)).  Normals point into the solid
// torus around the (0, 0, cos, sin) core circle, giving k1 = b/a, k2 = -a/b.
inline SurfaceMesh make_flat_torus(double a, int res) {
  constexpr double pi = 3.14159265358979323846;
  if (!(a > 0.0 && a < 1.0))
    throw InvalidInputError("make_flat_torus: need 0 < a < 1");
  if (res < 3) throw InvalidInputError("make_flat_torus: res < 3");
  double b = std::sqrt(1.0 - a * a);

  auto chart = std::make_shared<FlatTorusChart>(a);
  SurfaceMesh m;
  m.chart = chart;
  auto id = [&](int i, int j) {
    return ((i % res + res) % res) * res + ((j % res + res) % res);
  };
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      double u = 2.0 * pi * i / res, v = 2.0 * pi * j / res;
      double cu = std::cos(u), su = std::sin(u), cv = std::cos(v), sv = std::sin(v);
      m.vertices.emplace_back(Vec4(a * cu, a * su, b * cv, b * sv));
      m.uv.emplace_back(u, v);
      m.normals.push_back(Vec4(-b * cu, -b * su, a * cv, a * sv));
      m.k1.push_back(b / a);
      m.k2.push_back(-a / b);
    }
  }
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j)
      detail::split_quad(m.faces, m.vertices, id(i, j), id(i + 1, j),
                         id(i, j + 1), id(i + 1, j + 1));

  m.analytic_curvature = true;
  m.a_star_ref = SpherePoint(Vec4(0, 0, 1, 0));
  detail::finalize(m, 1);
  return m;
}

// Torus of revolution with radii (R, r) in R^3, pulled back to S^3 through
// the stereographic chart with pole e4.  Normals point into the solid torus
// around the pullback of the circle of radius R in the z = 0 plane.
inline SurfaceMesh make_revolution_torus(double R, double r, int res) {
  constexpr double pi = 3.14159265358979323846;
  if (!(r > 0.0)) throw InvalidInputError("make_revolution_torus: r <= 0");
  if (R <= r)
    throw SelfIntersectingInputError("make_revolution_torus: need R > r");
  if (res < 3) throw InvalidInputError("make_revolution_torus: res < 3");

  auto chart = std::make_shared<RevolutionTorusChart>(R, r);
  SurfaceMesh m;
  m.chart = chart;

  // fix the normal side once: at (u, v) = (0, 0) it must face the pullback
  // of the core circle point (R, 0, 0)
  SpherePoint core = stereographic_inverse(SpherePoint(Vec4(0, 0, 0, 1)),
                                           Vec4(R, 0, 0, 0));
  ChartJet J0 = chart->jet(0.0, 0.0);
  CurvaturePoint c0 = chart_curvature(J0, false);
  bool flip = c0.normal.dot(core.p() - J0.x) < 0.0;

  auto id = [&](int i, int j) {
    return ((i % res + res) % res) * res + ((j % res + res) % res);
  };
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      double u = 2.0 * pi * i / res, v = 2.0 * pi * j / res;
      ChartJet J = chart->jet(u, v);
      CurvaturePoint c = chart_curvature(J, flip);
      m.vertices.emplace_back(J.x);
      m.uv.emplace_back(u, v);
      m.normals.push_back(c.normal);
      m.k1.push_back(c.k1);
      m.k2.push_back(c.k2);
    }
  }
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j)
      detail::split_quad(m.faces, m.vertices, id(i, j), id(i + 1, j),
                         id(i, j + 1), id(i + 1, j + 1));

  m.analytic_curvature = true;
  m.a_star_ref = core;
  detail::finalize(m, 1);
  return m;
}

inline double mesh_min_edge(const SurfaceMesh& m) {
  double e = std::numeric_limits<double>::infinity();
  for (const auto& f : m.faces)
    for (int k = 0; k < 3; ++k)
      e = std::min(e, (m.vertices[f[k]].p() - m.vertices[f[(k + 1) % 3]].p()).norm());
  return e;
}

}  // namespace wlab
