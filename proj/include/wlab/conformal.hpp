#pragma once

// Centered dilations F_v of S^3 and their action on surface data: normal and
// principal-curvature pushforward, whole-mesh transport, and the tubular
// coordinates Lambda(p, s) on the closed 4-ball with the collapse retraction
// that is the identity outside the 3-eps tube.

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include "wlab/bvh.hpp"
#include "wlab/chart.hpp"
#include "wlab/errors.hpp"
#include "wlab/mesh.hpp"
#include "wlab/parallel.hpp"
#include "wlab/s3.hpp"

namespace wlab {

class ConformalParameter {
 public:
  explicit ConformalParameter(const Vec4& v) : v_(v) {
    if (!v.allFinite() || !(v.norm() < 1.0 - 1e-9))
      throw InvalidInputError("ConformalParameter: need |v| < 1 - 1e-9");
  }
  const Vec4& v() const { return v_; }

 private:
  Vec4 v_;
};

inline SpherePoint apply_F(const ConformalParameter& v, const SpherePoint& x) {
  Vec4 y = Vec4(x) - v.v();
  double c = 1.0 - v.v().squaredNorm();
  return SpherePoint(c / y.squaredNorm() * y - v.v());
}

inline SpherePoint apply_F_inverse(const ConformalParameter& v,
                                   const SpherePoint& y) {
  return apply_F(ConformalParameter(-v.v()), y);
}

// |dF_v| at x; F_v scales tangent lengths by this factor.
inline double conformal_factor(const ConformalParameter& v, const SpherePoint& x) {
  return (1.0 - v.v().squaredNorm()) / (Vec4(x) - v.v()).squaredNorm();
}

namespace detail {
inline void require_unit_tangent(const Vec4& n, const SpherePoint& x,
                                 const char* who) {
  if (std::abs(n.norm() - 1.0) > kUnitTol)
    throw InvalidInputError(std::string(who) + ": normal is not unit length");
  if (std::abs(n.dot(Vec4(x))) > kUnitTol)
    throw InvalidInputError(std::string(who) + ": normal is not tangent to S^3");
}
}  // namespace detail

// Unit normal of the image surface at F_v(x).  dF_v acts on a tangent vector
// w as the conformal factor times the reflection w - 2<y,w>y/|y|^2 with
// y = x - v; for a normal N tangent to S^3 this simplifies to the form below
// because <N, y> = -<N, v>.
inline Vec4 pushforward_normal(const ConformalParameter& v, const SpherePoint& x,
                               const Vec4& n) {
  detail::require_unit_tangent(n, x, "pushforward_normal");
  Vec4 y = Vec4(x) - v.v();
  Vec4 out = n + (2.0 * n.dot(v.v()) / y.squaredNorm()) * y;
  return out.normalized();
}

// Principal curvature of the image surface: both principal curvatures map
// through the same affine rule, so ordering is preserved.
inline double curvature_pushforward(const ConformalParameter& v,
                                    const SpherePoint& x, const Vec4& n,
                                    double k) {
  double r2 = (Vec4(x) - v.v()).squaredNorm();
  return (k * r2 - 2.0 * v.v().dot(n)) / (1.0 - v.v().squaredNorm());
}

// Chart for the image surface F_v(base): exact first and second derivatives
// through the chain rule, so transformed meshes keep analytic jets.
class ComposedMobiusChart final : public ParametricSurface {
 public:
  ComposedMobiusChart(std::shared_ptr<const ParametricSurface> base,
                      const ConformalParameter& v)
      : base_(std::move(base)), v_(v.v()), c_(1.0 - v.v().squaredNorm()) {
    if (!base_) throw InvalidInputError("ComposedMobiusChart: null base chart");
  }

  ChartJet jet(double u, double w) const override {
    ChartJet B = base_->jet(u, w);
    Vec4 y = B.x - v_;
    double r2 = y.squaredNorm();
    auto dF = [&](const Vec4& a) {
      return (c_ * (a / r2 - 2.0 * y.dot(a) / (r2 * r2) * y)).eval();
    };
    auto d2F = [&](const Vec4& a, const Vec4& b) {
      double ya = y.dot(a), yb = y.dot(b);
      Vec4 t = -2.0 * yb * a - 2.0 * (b.dot(a) * y + ya * b);
      return (c_ * (t / (r2 * r2) + 8.0 * ya * yb / (r2 * r2 * r2) * y)).eval();
    };
    ChartJet J;
    J.x = c_ / r2 * y - v_;
    J.xu = dF(B.xu);
    J.xv = dF(B.xv);
    J.xuu = dF(B.xuu) + d2F(B.xu, B.xu);
    J.xuv = dF(B.xuv) + d2F(B.xu, B.xv);
    J.xvv = dF(B.xvv) + d2F(B.xv, B.xv);
    return J;
  }

  std::array<double, 2> periods() const override { return base_->periods(); }

 private:
  std::shared_ptr<const ParametricSurface> base_;
  Vec4 v_;
  double c_;
};

// Image mesh under F_v.  Vertices and normals map pointwise; on meshes with
// exact curvature stamps the principal curvatures map through
// curvature_pushforward, otherwise they are re-estimated after the move.
inline SurfaceMesh transform_mesh(const ConformalParameter& v,
                                  const SurfaceMesh& m, int workers = 1) {
  SurfaceMesh out;
  out.faces = m.faces;
  out.genus = m.genus;
  out.uv = m.uv;
  out.analytic_curvature = m.analytic_curvature;
  std::size_t n = m.size();
  out.vertices.resize(n, SpherePoint());
  out.normals.resize(n);
  if (m.analytic_curvature) {
    out.k1.resize(n);
    out.k2.resize(n);
  }
  int nw = resolve_workers(workers);
  parallel_chunks(n, 2048, nw, [&](int, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const SpherePoint& x = m.vertices[i];
      SpherePoint fx = apply_F(v, x);
      Vec4 fn = pushforward_normal(v, x, m.normals[i]);
      fn -= fn.dot(Vec4(fx)) * Vec4(fx);
      out.vertices[i] = fx;
      out.normals[i] = fn.normalized();
      if (m.analytic_curvature) {
        out.k1[i] = curvature_pushforward(v, x, m.normals[i], m.k1[i]);
        out.k2[i] = curvature_pushforward(v, x, m.normals[i], m.k2[i]);
      }
    }
  });
  if (m.chart)
    out.chart = std::make_shared<ComposedMobiusChart>(m.chart, v);
  if (m.a_star_ref) out.a_star_ref = apply_F(v, *m.a_star_ref);
  compute_vertex_areas(out);
  if (!m.analytic_curvature) {
    out.analytic_curvature = false;
    apply_estimated_curvatures(out, workers);
  }
  return out;
}

// --- tubular coordinates --------------------------------------------------

// Coordinates of a point Lambda(p, s) = (1 - s1)(cos(s2) p + sin(s2) N(p))
// in the closed 4-ball: s1 >= 0 is radial depth, s2 the signed normal offset
// along the surface geodesic, |s| < 3 eps.
struct TubularCoord {
  SpherePoint p;
  double s1 = 0.0, s2 = 0.0;
  double eps = 0.0;
  Vec4 normal = Vec4::Zero();  // set when produced by inversion

  TubularCoord(const SpherePoint& p_, double s1_, double s2_, double eps_)
      : p(p_), s1(s1_), s2(s2_), eps(eps_) {
    if (s1 < -1e-15) throw InvalidInputError("TubularCoord: s1 must be >= 0");
    s1 = std::max(0.0, s1);
    if (!(eps > 0.0)) throw InvalidInputError("TubularCoord: eps must be positive");
    if (!(std::hypot(s1, s2) < 3.0 * eps))
      throw InvalidInputError("TubularCoord: |s| must stay below 3 eps");
  }
};

inline Vec4 lambda_coord(const SpherePoint& p, const Vec4& n, double s1,
                         double s2) {
  detail::require_unit_tangent(n, p, "lambda_coord");
  if (s1 < -1e-15) throw InvalidInputError("lambda_coord: s1 must be >= 0");
  s1 = std::max(0.0, s1);
  return (1.0 - s1) * (std::cos(s2) * Vec4(p) + std::sin(s2) * n);
}

inline Vec4 lambda_coord(const TubularCoord& tc) {
  return lambda_coord(tc.p, tc.normal, tc.s1, tc.s2);
}

// Mesh, its triangle tree, and the tube half-width; built once and then
// read-only, so queries can run from any number of threads.
struct TubeContext {
  SurfaceMesh mesh;
  Bvh bvh;
  double eps = 0.0;
  double reconstruct_tol = 1e-6;
};

// First return of a normal geodesic to the mesh, minimized over a vertex
// subsample.  Grid resolution pi/160 is enough for the 0.4 safety factor in
// the tube width.
inline double mesh_self_distance(const SurfaceMesh& m, const Bvh& bvh) {
  constexpr double kPi = 3.14159265358979323846;
  const double step = kPi / 160.0;
  std::size_t n = m.size();
  std::vector<double> max_edge(n, 0.0);
  for (const auto& f : m.faces) {
    for (int k = 0; k < 3; ++k) {
      double e = (Vec4(m.vertices[f[k]]) - Vec4(m.vertices[f[(k + 1) % 3]])).norm();
      max_edge[f[k]] = std::max(max_edge[f[k]], e);
      max_edge[f[(k + 1) % 3]] = std::max(max_edge[f[(k + 1) % 3]], e);
    }
  }
  double best = kPi;
  std::size_t stride = std::max<std::size_t>(1, n / 512);
  for (std::size_t i = 0; i < n; i += stride) {
    double leave = 2.5 * geodesic_radius(std::min(2.0, max_edge[i]));
    bool left = false;
    for (double t = step; t < best; t += step) {
      Vec4 x = std::cos(t) * Vec4(m.vertices[i]) + std::sin(t) * m.normals[i];
      double chord = std::sqrt(bvh.closest(x).dist2);
      double d = geodesic_radius(std::min(2.0, chord));
      if (!left) {
        if (d >= leave) left = true;
        continue;
      }
      if (d < step) {
        best = std::min(best, t);
        break;
      }
    }
  }
  return best;
}

// Default tube half-width: 0.4 x min(1/max|k|, self-distance/2).  The first
// term estimates the focal distance, the second keeps distinct sheets of the
// surface from claiming the same tube point.
inline double default_tube_epsilon(const SurfaceMesh& m, const Bvh& bvh) {
  double kmax = 0.0;
  for (std::size_t i = 0; i < m.k1.size(); ++i)
    kmax = std::max({kmax, std::abs(m.k1[i]), std::abs(m.k2[i])});
  double focal = kmax > 1e-12 ? 1.0 / kmax : std::numeric_limits<double>::infinity();
  double self = mesh_self_distance(m, bvh);
  return 0.4 * std::min(focal, 0.5 * self);
}

inline TubeContext make_tube_context(SurfaceMesh mesh, double eps = -1.0) {
  TubeContext ctx;
  ctx.mesh = std::move(mesh);
  ctx.bvh = Bvh(ctx.mesh);
  double h = 0.0;
  for (const auto& f : ctx.mesh.faces)
    for (int k = 0; k < 3; ++k)
      h = std::max(h, (Vec4(ctx.mesh.vertices[f[k]]) -
                       Vec4(ctx.mesh.vertices[f[(k + 1) % 3]]))
                          .norm());
  // chart-backed meshes reconstruct to machine precision; bare meshes only
  // to the piecewise-linear sag of the triangles
  ctx.reconstruct_tol = ctx.mesh.chart ? 1e-6 : std::max(1e-6, h * h);
  ctx.eps = eps > 0.0 ? eps : default_tube_epsilon(ctx.mesh, ctx.bvh);
  return ctx;
}

namespace detail {

struct FootPoint {
  SpherePoint p;
  Vec4 normal;
};

// Foot of xhat on the surface: tree seed, then Newton on the chart when one
// is available (the foot maximizes <xhat, X(u,v)>).
inline FootPoint project_to_surface(const TubeContext& ctx, const Vec4& xhat) {
  ClosestHit hit = ctx.bvh.closest(xhat);
  const auto& f = ctx.mesh.faces[hit.face];
  if (ctx.mesh.chart && ctx.mesh.uv.size() == ctx.mesh.size()) {
    auto per = ctx.mesh.chart->periods();
    Eigen::Vector2d base = ctx.mesh.uv[f[0]];
    Eigen::Vector2d seed = Eigen::Vector2d::Zero();
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector2d uvk = ctx.mesh.uv[f[k]];
      for (int a = 0; a < 2; ++a)
        if (per[a] > 0.0)
          uvk[a] = base[a] + std::remainder(uvk[a] - base[a], per[a]);
      seed += hit.bary[k] * uvk;
    }
    double u = seed[0], w = seed[1];
    ChartJet J;
    for (int it = 0; it < 60; ++it) {
      J = ctx.mesh.chart->jet(u, w);
      double g1 = xhat.dot(J.xu), g2 = xhat.dot(J.xv);
      if (std::hypot(g1, g2) <= 1e-14) break;
      double h11 = xhat.dot(J.xuu), h12 = xhat.dot(J.xuv), h22 = xhat.dot(J.xvv);
      double det = h11 * h22 - h12 * h12;
      double scale = std::abs(h11) + std::abs(h22) + std::abs(h12) + 1e-18;
      double du, dw;
      if (h11 + h22 < 0.0 && det > 1e-12 * scale * scale) {
        // clean maximum: full Newton step
        du = (-g1 * h22 + g2 * h12) / det;
        dw = (-g2 * h11 + g1 * h12) / det;
      } else {
        // singular Hessian (equidistant foot ridge): ascend the gradient
        // with the 1-D quadratic-model step, which is exact transverse to
        // the ridge and leaves the along-ridge coordinate alone
        double gg = g1 * g1 + g2 * g2;
        double ghg = g1 * g1 * h11 + 2.0 * g1 * g2 * h12 + g2 * g2 * h22;
        double t = gg / std::max(1e-12, -ghg);
        du = t * g1;
        dw = t * g2;
      }
      double len = std::hypot(du, dw);
      if (len > 0.5) {
        du *= 0.5 / len;
        dw *= 0.5 / len;
      }
      u += du;
      w += dw;
      if (len < 1e-15) break;
    }
    J = ctx.mesh.chart->jet(u, w);
    Vec4 nrm = cross4(J.x, J.xu, J.xv);
    double nn = nrm.norm();
    if (nn < 1e-12) throw OutOfTubeError("lambda_invert: degenerate chart frame");
    nrm /= nn;
    int anchor = 0;
    hit.bary.maxCoeff(&anchor);
    if (nrm.dot(ctx.mesh.normals[f[anchor]]) < 0.0) nrm = -nrm;
    SpherePoint p(J.x);
    nrm -= nrm.dot(Vec4(p)) * Vec4(p);
    return FootPoint{p, nrm.normalized()};
  }
  SpherePoint p(hit.point);
  Vec4 nrm = hit.bary[0] * ctx.mesh.normals[f[0]] +
             hit.bary[1] * ctx.mesh.normals[f[1]] +
             hit.bary[2] * ctx.mesh.normals[f[2]];
  nrm -= nrm.dot(Vec4(p)) * Vec4(p);
  double nn = nrm.norm();
  if (nn < 1e-12) throw OutOfTubeError("lambda_invert: degenerate vertex normals");
  return FootPoint{p, nrm / nn};
}

}  // namespace detail

// Recover (p, s) with x = Lambda(p, s).  Points that no tube coordinate
// reproduces (past the focal set, or with |s| >= 3 eps) raise OutOfTubeError.
inline TubularCoord lambda_invert(const TubeContext& ctx, const Vec4& x) {
  if (!x.allFinite() || x.norm() > 1.0 + 1e-9)
    throw InvalidInputError("lambda_invert: point outside the closed 4-ball");
  double nx = x.norm();
  if (nx < 1e-12) throw OutOfTubeError("lambda_invert: ball center");
  double s1 = std::max(0.0, 1.0 - nx);
  Vec4 xhat = x / nx;
  detail::FootPoint foot = detail::project_to_surface(ctx, xhat);
  double s2 = std::atan2(xhat.dot(foot.normal), xhat.dot(Vec4(foot.p)));
  if (std::hypot(s1, s2) >= 3.0 * ctx.eps)
    throw OutOfTubeError("lambda_invert: |s| >= 3 eps");
  Vec4 rec = lambda_coord(foot.p, foot.normal, s1, s2);
  if ((rec - x).norm() > ctx.reconstruct_tol)
    throw OutOfTubeError("lambda_invert: point not reachable by tube coordinates");
  TubularCoord tc(foot.p, s1, s2, ctx.eps);
  tc.normal = foot.normal;
  return tc;
}

// Collapse retraction: identity outside the 3-eps tube, squashes the eps
// tube onto the surface, interpolates with a cubic smoothstep in between.
inline Vec4 retraction_T(const TubeContext& ctx, const Vec4& x) {
  if (!x.allFinite() || x.norm() > 1.0 + 1e-9)
    throw InvalidInputError("retraction_T: point outside the closed 4-ball");
  if (x.norm() < 1.0 - 3.0 * ctx.eps - 1e-12) return x;
  TubularCoord tc(SpherePoint(Vec4(1, 0, 0, 0)), 0, 0, 1);
  try {
    tc = lambda_invert(ctx, x);
  } catch (const OutOfTubeError&) {
    return x;
  }
  double r = std::hypot(tc.s1, tc.s2);
  if (r <= ctx.eps) return Vec4(tc.p);
  if (r >= 2.0 * ctx.eps) return x;
  double q = (r - ctx.eps) / ctx.eps;
  double phi = q * q * (3.0 - 2.0 * q);
  return lambda_coord(tc.p, tc.normal, phi * tc.s1, phi * tc.s2);
}

}  // namespace wlab
