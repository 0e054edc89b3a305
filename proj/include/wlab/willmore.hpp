#pragma once

// Integral bending energy of surfaces in S^3 (area plus squared mean
// curvature), the closed form on flat tori, invariance residuals under
// centered dilations, and descent over parametric families or free meshes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wlab/conformal.hpp"
#include "wlab/errors.hpp"
#include "wlab/mesh.hpp"
#include "wlab/s3.hpp"

namespace wlab {

struct EnergyReport {
  double area = 0.0;
  double willmore = 0.0;
  double traceless_sq_integral = 0.0;
  double max_H = 0.0;
};

inline EnergyReport willmore_energy(const SurfaceMesh& m) {
  std::size_t n = m.size();
  if (m.k1.size() != n || m.k2.size() != n || m.vertex_area.size() != n)
    throw InvalidInputError("willmore_energy: mesh lacks curvature or area data");
  EnergyReport e;
  for (std::size_t i = 0; i < n; ++i) {
    double a = m.vertex_area[i];
    double h = 0.5 * (m.k1[i] + m.k2[i]);
    double d = m.k1[i] - m.k2[i];
    e.area += a;
    e.willmore += a * (1.0 + h * h);
    e.traceless_sq_integral += a * 0.5 * d * d;
    e.max_H = std::max(e.max_H, std::abs(h));
  }
  return e;
}

// Energy of the flat torus with circle radii (a, sqrt(1-a^2)); strictly
// minimized at a = 1/sqrt(2) where it equals 2 pi^2.
inline double flat_torus_energy_closed_form(double a) {
  if (!(a > 0.0 && a < 1.0))
    throw InvalidInputError("flat_torus_energy_closed_form: need 0 < a < 1");
  constexpr double kPi = 3.14159265358979323846;
  return kPi * kPi / (a * std::sqrt(1.0 - a * a));
}

// |W(F_v mesh) - W(mesh)|: exactly zero at v = 0, and otherwise a pure
// quadrature effect that shrinks under refinement.
inline double conformal_invariance_residual(const SurfaceMesh& m,
                                            const ConformalParameter& v) {
  if (v.v().squaredNorm() == 0.0) return 0.0;
  double w0 = willmore_energy(m).willmore;
  double w1 = willmore_energy(transform_mesh(v, m)).willmore;
  return std::abs(w1 - w0);
}

struct OptimizerConfig {
  double step = 1e-3;
  int max_iters = 100;
  double grad_tol = 1e-3;
  enum class Mode { parametric, mesh };
  Mode mode = Mode::parametric;
};

struct ParametricFamily {
  std::function<SurfaceMesh(double)> make;
  double lo = 0.0, hi = 0.0;
};

inline ParametricFamily flat_torus_family(int res) {
  // the clamp keeps trials away from the degenerate-torus ends
  return ParametricFamily{[res](double a) { return make_flat_torus(a, res); },
                          0.05, 0.95};
}

inline ParametricFamily revolution_torus_family(double r, int res) {
  return ParametricFamily{
      [r, res](double R) { return make_revolution_torus(R, r, res); },
      1.05 * r, 10.0 * r};
}

struct OptimizeResult {
  std::vector<EnergyReport> trajectory;
  std::vector<double> grad_norms;
  SurfaceMesh surface;
  double parameter = std::numeric_limits<double>::quiet_NaN();
};

class OptimizerStallError : public std::runtime_error {
 public:
  OptimizerStallError(const std::string& msg, std::vector<EnergyReport> traj)
      : std::runtime_error(msg), trajectory(std::move(traj)) {}
  std::vector<EnergyReport> trajectory;
};

namespace detail {

inline void check_optimizer_config(const OptimizerConfig& cfg,
                                   OptimizerConfig::Mode expected) {
  if (!(cfg.step > 0.0)) throw InvalidInputError("optimize_willmore: step <= 0");
  if (!(cfg.grad_tol > 0.0))
    throw InvalidInputError("optimize_willmore: grad_tol <= 0");
  if (cfg.max_iters < 1) throw InvalidInputError("optimize_willmore: max_iters < 1");
  if (cfg.mode != expected)
    throw InvalidInputError("optimize_willmore: config mode does not match input");
}

}  // namespace detail

// One-parameter descent with central-difference gradients and a backtracking
// line search that accepts only strict decreases.
inline OptimizeResult optimize_willmore(const ParametricFamily& family, double p0,
                                        const OptimizerConfig& cfg) {
  detail::check_optimizer_config(cfg, OptimizerConfig::Mode::parametric);
  if (!family.make) throw InvalidInputError("optimize_willmore: empty family");

  auto clamp = [&](double p) { return std::clamp(p, family.lo, family.hi); };
  auto energy = [&](double p) { return willmore_energy(family.make(p)); };
  auto grad = [&](double p) {
    double d = 1e-5 * std::max(1.0, std::abs(p));
    double hi = clamp(p + d), lo = clamp(p - d);
    return (energy(hi).willmore - energy(lo).willmore) / (hi - lo);
  };

  double p = clamp(p0);
  EnergyReport cur = energy(p);
  double g = grad(p);

  OptimizeResult res;
  res.trajectory.push_back(cur);
  res.grad_norms.push_back(std::abs(g));

  double eta = cfg.step;
  while (static_cast<int>(res.trajectory.size()) <= cfg.max_iters) {
    if (std::abs(g) <= cfg.grad_tol) break;
    bool accepted = false;
    for (int k = 0; k < 31; ++k) {
      double cand = clamp(p - eta * g);
      EnergyReport trial = energy(cand);
      if (trial.willmore < cur.willmore - 1e-15) {
        p = cand;
        cur = trial;
        accepted = true;
        if (k == 0) eta *= 1.3;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted)
      throw OptimizerStallError("optimize_willmore: parametric descent stalled",
                                res.trajectory);
    g = grad(p);
    res.trajectory.push_back(cur);
    res.grad_norms.push_back(std::abs(g));
  }

  res.parameter = p;
  res.surface = family.make(p);
  return res;
}

namespace detail {

// Mesh-descent state: topology is frozen, geometry buffers are rebuilt as
// vertices move.  Curvatures always come from the quadric fit.
struct MeshDescent {
  explicit MeshDescent(const SurfaceMesh& m) : mesh(m) {
    mesh.analytic_curvature = false;
    mesh.chart.reset();
    mesh.uv.clear();
    adj = vertex_adjacency(mesh);
    std::size_t n = mesh.size();
    rings.resize(n);
    patches.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      rings[i] = two_ring(adj, static_cast<int>(i));
      patches[i] = rings[i];
      patches[i].push_back(static_cast<int>(i));
    }
    faces_of.resize(n);
    for (std::size_t f = 0; f < mesh.faces.size(); ++f)
      for (int k = 0; k < 3; ++k)
        faces_of[mesh.faces[f][k]].push_back(static_cast<int>(f));
    refresh_mesh_geometry(mesh);
  }

  SurfaceMesh mesh;
  std::vector<std::vector<int>> adj, rings, patches, faces_of;

  double full_energy() {
    refresh_mesh_geometry(mesh);
    return willmore_energy(mesh).willmore;
  }

  Vec4 position(int j, int moved, const Vec4& moved_pos) const {
    return j == moved ? moved_pos : mesh.vertices[j].p();
  }

  // normal at j with vertex `moved` displaced; only valid for j adjacent to
  // or equal to the moved vertex (callers never need others)
  Vec4 local_normal(int j, int moved, const Vec4& moved_pos) const {
    Vec4 acc = Vec4::Zero();
    for (int f : faces_of[j]) {
      const auto& fc = mesh.faces[f];
      Vec4 a = position(fc[0], moved, moved_pos);
      acc += cross4(a, position(fc[1], moved, moved_pos) - a,
                    position(fc[2], moved, moved_pos) - a);
    }
    if (acc.dot(mesh.normals[j]) < 0.0) acc = -acc;
    Vec4 pj = position(j, moved, moved_pos);
    acc -= acc.dot(pj) * pj;
    double len = acc.norm();
    if (len < 1e-14) throw UnderDeterminedFitError("degenerate vertex star");
    return acc / len;
  }

  // mixed-Voronoi area of j with one vertex displaced (same rule as
  // compute_vertex_areas, restricted to the faces around j)
  double local_area(int j, int moved, const Vec4& moved_pos) const {
    double area = 0.0;
    for (int f : faces_of[j]) {
      const auto& fc = mesh.faces[f];
      int c = fc[0] == j ? 0 : (fc[1] == j ? 1 : 2);
      Vec4 p = position(fc[c], moved, moved_pos);
      Vec4 q = position(fc[(c + 1) % 3], moved, moved_pos);
      Vec4 r = position(fc[(c + 2) % 3], moved, moved_pos);
      area += corner_area(p, q, r);
    }
    return area;
  }

  static double tri_area(const Vec4& a, const Vec4& b, const Vec4& c) {
    Vec4 u = b - a, v = c - a;
    double uu = u.squaredNorm(), vv = v.squaredNorm(), uv = u.dot(v);
    return 0.5 * std::sqrt(std::max(0.0, uu * vv - uv * uv));
  }

  static double corner_area(const Vec4& p, const Vec4& q, const Vec4& r) {
    double a2 = (q - r).squaredNorm();  // opposite p
    double b2 = (p - r).squaredNorm();
    double c2 = (p - q).squaredNorm();
    double t = tri_area(p, q, r);
    if (t < 1e-300) return 0.0;
    double cot_q = (a2 + c2 - b2) / (4.0 * t);
    double cot_r = (a2 + b2 - c2) / (4.0 * t);
    double cot_p = (b2 + c2 - a2) / (4.0 * t);
    if (cot_p <= 0.0) return 0.5 * t;
    if (cot_q <= 0.0 || cot_r <= 0.0) return 0.25 * t;
    return 0.125 * (b2 * cot_q + c2 * cot_r);
  }

  // energy restricted to the patch that vertex i influences
  double patch_energy(int i, const Vec4& moved_pos) const {
    double e = 0.0;
    for (int j : patches[i]) {
      bool near = j == i || std::binary_search(adj[i].begin(), adj[i].end(), j);
      Vec4 nj = near ? local_normal(j, i, moved_pos) : mesh.normals[j];
      double k1, k2;
      std::string why;
      Vec4 pj = position(j, i, moved_pos);
      if (!fit_principal_pair(
              pj, nj, rings[j],
              [&](int q) { return position(q, i, moved_pos); }, &k1, &k2, &why))
        throw UnderDeterminedFitError("patch fit: " + why);
      double aj = near ? local_area(j, i, moved_pos) : mesh.vertex_area[j];
      double h = 0.5 * (k1 + k2);
      e += aj * (1.0 + h * h);
    }
    return e;
  }
};

}  // namespace detail

// Projected descent on vertex positions: finite-difference gradients over
// local patches, renormalization to S^3 after each step, backtracking line
// search with strict-decrease acceptance.
inline OptimizeResult optimize_willmore(const SurfaceMesh& start,
                                        const OptimizerConfig& cfg) {
  detail::check_optimizer_config(cfg, OptimizerConfig::Mode::mesh);
  detail::MeshDescent st(start);

  const std::size_t n = st.mesh.size();
  EnergyReport cur = willmore_energy(st.mesh);

  OptimizeResult res;
  res.trajectory.push_back(cur);

  std::vector<Vec4> grad(n);
  auto compute_grad = [&]() {
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec4 p = st.mesh.vertices[i].p();
      double edge = 0.0;
      int cnt = 0;
      for (int j : st.adj[i]) {
        edge += (st.mesh.vertices[j].p() - p).norm();
        ++cnt;
      }
      edge /= std::max(1, cnt);
      double d = 1e-4 * edge;
      auto f = tangent_frame(st.mesh.vertices[i]);
      Vec4 g = Vec4::Zero();
      for (int a = 0; a < 3; ++a) {
        Vec4 plus = (p + d * f[a]).normalized();
        Vec4 minus = (p - d * f[a]).normalized();
        double ep = st.patch_energy(static_cast<int>(i), plus);
        double em = st.patch_energy(static_cast<int>(i), minus);
        g += (ep - em) / (2.0 * d) * f[a];
      }
      grad[i] = g;
      sq += g.squaredNorm();
    }
    return std::sqrt(sq);
  };

  double gnorm = compute_grad();
  res.grad_norms.push_back(gnorm);

  std::vector<SpherePoint> saved;
  double eta = cfg.step;
  while (static_cast<int>(res.trajectory.size()) <= cfg.max_iters) {
    if (gnorm <= cfg.grad_tol) break;
    bool accepted = false;
    saved = st.mesh.vertices;
    for (int k = 0; k < 31; ++k) {
      bool feasible = true;
      for (std::size_t i = 0; i < n; ++i) {
        Vec4 q = saved[i].p() - eta * grad[i];
        if (q.norm() < 1e-12) {
          feasible = false;
          break;
        }
        st.mesh.vertices[i] = SpherePoint(q);
      }
      double trial = std::numeric_limits<double>::infinity();
      if (feasible) {
        try {
          trial = st.full_energy();
        } catch (const UnderDeterminedFitError&) {
          trial = std::numeric_limits<double>::infinity();
        } catch (const InvalidInputError&) {
          trial = std::numeric_limits<double>::infinity();
        }
      }
      if (trial < cur.willmore - 1e-12) {
        cur = willmore_energy(st.mesh);
        accepted = true;
        if (k == 0) eta *= 1.3;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) {
      st.mesh.vertices = saved;
      throw OptimizerStallError("optimize_willmore: mesh descent stalled",
                                res.trajectory);
    }
    gnorm = compute_grad();
    res.trajectory.push_back(cur);
    res.grad_norms.push_back(gnorm);
  }

  res.surface = std::move(st.mesh);
  return res;
}

inline void write_trajectory_csv(std::ostream& os, const OptimizeResult& res) {
  os << "iter,area,willmore,traceless_sq,max_H,grad_norm\n";
  char buf[256];
  for (std::size_t i = 0; i < res.trajectory.size(); ++i) {
    const EnergyReport& e = res.trajectory[i];
    double g = i < res.grad_norms.size() ? res.grad_norms[i] : 0.0;
    std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g,%.12g,%.12g,%.12g\n", i,
                  e.area, e.willmore, e.traceless_sq_integral, e.max_H, g);
    os << buf;
  }
}

}  // namespace wlab
