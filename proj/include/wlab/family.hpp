#pragma once

// Five-parameter family of candidate surfaces: conformal images composed with
// geodesic normal offsets.  Provides the offset immersion, the Jacobian area
// bound and its sweep verifier, signed-distance sublevel regions with Monte
// Carlo volumes, boundary blow-up diagnostics against predicted geodesic
// balls, the extended Gauss map with its mapping degree, and the
// concentration-of-mass sweep.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wlab/bvh.hpp"
#include "wlab/chart.hpp"
#include "wlab/conformal.hpp"
#include "wlab/errors.hpp"
#include "wlab/mesh.hpp"
#include "wlab/parallel.hpp"
#include "wlab/s3.hpp"
#include "wlab/willmore.hpp"

namespace wlab {

inline constexpr double kVolumeS3 =
    2.0 * 3.14159265358979323846 * 3.14159265358979323846;

// ------------------------------------------------------------- family point

struct FamilyPoint {
  ConformalParameter v;
  double t = 0.0;

  FamilyPoint(const ConformalParameter& v_in, double t_in) : v(v_in), t(t_in) {
    constexpr double pi = 3.14159265358979323846;
    if (!std::isfinite(t_in) || std::abs(t_in) > pi + 1e-12)
      throw InvalidInputError("FamilyPoint: offset t must lie in [-pi, pi]");
  }
};

// Offset immersion: conformal image followed by the geodesic normal flow.
// The combination cos(t) F_v(x) + sin(t) N_v(x) is already a unit vector.
inline SpherePoint p_map(const ConformalParameter& v, double t,
                         const SpherePoint& x, const Vec4& normal) {
  if (!std::isfinite(t)) throw InvalidInputError("p_map: offset t must be finite");
  Vec4 nv = pushforward_normal(v, x, normal);
  return SpherePoint(std::cos(t) * Vec4(apply_F(v, x)) + std::sin(t) * nv);
}

// ------------------------------------------------------- offset jacobian

// Area element ratio of the offset immersion at a point with principal
// curvatures k1, k2 of the conformal image.
inline double jacobian_psi(double k1, double k2, double t) {
  double c = std::cos(t), s = std::sin(t);
  return (c - k1 * s) * (c - k2 * s);
}

// Same quantity written through the mean curvature and the traceless part;
// kept separate so the two algebraic routes cross-check each other.
inline double jacobian_psi_expanded(double k1, double k2, double t) {
  double c = std::cos(t), s = std::sin(t);
  double h = 0.5 * (k1 + k2);
  double dev = 0.5 * (k1 - k2);
  double w = s + h * c;
  return 1.0 + h * h - w * w - dev * dev * s * s;
}

namespace detail {

struct JacobianArea {
  double clamped = 0.0;     // integral of max(Jac, 0)
  double signed_sum = 0.0;  // integral of Jac without clamping
};

inline JacobianArea jacobian_area_integrals(const SurfaceMesh& image, double t) {
  if (image.k1.size() != image.size() || image.k2.size() != image.size() ||
      image.vertex_area.size() != image.size())
    throw InvalidInputError("jacobian_area_integrals: mesh lacks curvature or area data");
  JacobianArea out;
  for (std::size_t i = 0; i < image.size(); ++i) {
    double jac = jacobian_psi(image.k1[i], image.k2[i], t);
    out.signed_sum += jac * image.vertex_area[i];
    out.clamped += std::max(jac, 0.0) * image.vertex_area[i];
  }
  return out;
}

}  // namespace detail

// Upper bound for the area of the offset surface: the positive part of the
// offset Jacobian integrated over the conformal image.
inline double area_upper_bound(const SurfaceMesh& mesh, const ConformalParameter& v,
                               double t, int workers = 1) {
  SurfaceMesh image = transform_mesh(v, mesh, workers);
  return detail::jacobian_area_integrals(image, t).clamped;
}

// ------------------------------------------------------------ bound sweep

struct RosEntry {
  Vec4 v = Vec4::Zero();
  double t = 0.0;
  double bound = 0.0;            // clamped offset-area bound
  double signed_integral = 0.0;  // same integral without clamping
  double rhs = 0.0;              // energy minus the traceless correction
  double slack = 0.0;            // rhs - bound; nonnegative when the bound holds
  double signed_slack = 0.0;     // rhs - signed_integral
};

struct RosReport {
  double willmore = 0.0;
  double traceless_sq_integral = 0.0;
  double min_slack = std::numeric_limits<double>::infinity();
  Vec4 argmin_v = Vec4::Zero();
  double argmin_t = 0.0;
  double tol = 0.0;
  bool pass = false;
  std::vector<RosEntry> entries;
};

// Checks area_upper_bound(v, t) <= W - (sin^2 t / 2) * integral |traceless|^2
// over the whole grid.  tol_slack < 0 selects the default of 1% of W.
inline RosReport verify_ros_inequality(const SurfaceMesh& mesh,
                                       const std::vector<Vec4>& v_grid,
                                       const std::vector<double>& t_grid,
                                       double tol_slack = -1.0,
                                       int workers = 1) {
  constexpr double pi = 3.14159265358979323846;
  if (v_grid.empty() || t_grid.empty())
    throw InvalidInputError("verify_ros_inequality: empty parameter grid");
  for (double t : t_grid)
    if (!std::isfinite(t) || std::abs(t) > pi + 1e-12)
      throw InvalidInputError("verify_ros_inequality: offset t outside [-pi, pi]");

  EnergyReport base = willmore_energy(mesh);
  RosReport rep;
  rep.willmore = base.willmore;
  rep.traceless_sq_integral = base.traceless_sq_integral;
  rep.tol = tol_slack < 0.0 ? 0.01 * base.willmore : tol_slack;
  rep.entries.reserve(v_grid.size() * t_grid.size());
  for (const Vec4& vraw : v_grid) {
    ConformalParameter v(vraw);
    SurfaceMesh image = transform_mesh(v, mesh, workers);
    for (double t : t_grid) {
      detail::JacobianArea ja = detail::jacobian_area_integrals(image, t);
      RosEntry e;
      e.v = vraw;
      e.t = t;
      e.bound = ja.clamped;
      e.signed_integral = ja.signed_sum;
      double s = std::sin(t);
      e.rhs = base.willmore - 0.5 * s * s * base.traceless_sq_integral;
      e.slack = e.rhs - e.bound;
      e.signed_slack = e.rhs - e.signed_integral;
      if (e.slack < rep.min_slack) {
        rep.min_slack = e.slack;
        rep.argmin_v = vraw;
        rep.argmin_t = t;
      }
      rep.entries.push_back(e);
    }
  }
  rep.pass = rep.min_slack >= -rep.tol;
  return rep;
}

inline void write_ros_sweep_csv(std::ostream& os, const RosReport& rep) {
  os << "v1,v2,v3,v4,t,bound,rhs,slack\n";
  char buf[256];
  for (const RosEntry& e : rep.entries) {
    std::snprintf(buf, sizeof(buf),
                  "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                  e.v[0], e.v[1], e.v[2], e.v[3], e.t, e.bound, e.rhs, e.slack);
    os << buf;
  }
}

// -------------------------------------------------------- signed distance

// Signed geodesic distance to a closed oriented mesh: positive on the side
// the normals point into (the component holding a_star_ref), negative on the
// other.  The sign comes from the crossing parity of the great-circle arc
// from the query to the reference point; grazing configurations retry with a
// deterministically jittered reference.
class SignedDistance {
 public:
  explicit SignedDistance(SurfaceMesh mesh)
      : mesh_(std::make_shared<const SurfaceMesh>(std::move(mesh))),
        bvh_(std::make_shared<const Bvh>(*mesh_)),
        ref_(require_ref(*mesh_)) {}

  double operator()(const SpherePoint& x) const {
    ClosestHit hit = bvh_->closest(Vec4(x));
    double chord = std::sqrt(std::max(hit.dist2, 0.0));
    if (chord <= 1e-12) return 0.0;
    double dist = 2.0 * std::asin(std::min(1.0, 0.5 * chord));
    return even_parity(Vec4(x)) ? dist : -dist;
  }

  const SurfaceMesh& mesh() const { return *mesh_; }
  const Bvh& bvh() const { return *bvh_; }

 private:
  static SpherePoint require_ref(const SurfaceMesh& m) {
    if (!m.a_star_ref)
      throw InvalidInputError("SignedDistance: mesh has no reference point in the positive component");
    return *m.a_star_ref;
  }

  bool even_parity(const Vec4& x) const {
    std::array<Vec4, 3> frame = tangent_frame(ref_);
    for (int attempt = 0; attempt < 10; ++attempt) {
      Vec4 target = Vec4(ref_);
      if (attempt > 0) {
        // Irrationally spaced directions so retries never ride a mesh symmetry.
        double amp = 2e-4 * attempt;
        double a1 = 0.9553 * attempt + 0.4;
        double a2 = 2.2074 * attempt + 1.1;
        Vec4 dir = std::cos(a1) * frame[0] +
                   std::sin(a1) * (std::cos(a2) * frame[1] + std::sin(a2) * frame[2]);
        target = (target + amp * dir).normalized();
      }
      std::optional<int> c = arc_crossings(x, target);
      if (c) return (*c & 1) == 0;
    }
    throw DegenerateImageError(
        "SignedDistance: arc to the reference point keeps grazing the mesh");
  }

  // Crossing count of the shorter great-circle arc from x to target against
  // the radial cones over the mesh triangles; nullopt when the arc grazes an
  // edge, an endpoint, or a degenerate triangle.
  std::optional<int> arc_crossings(const Vec4& x, const Vec4& target) const {
    double c = x.dot(target);
    Vec4 yraw = target - c * x;
    double s = yraw.norm();
    if (s <= 1e-9) {
      if (c > 0.0) return 0;  // query coincides with the reference
      return std::nullopt;    // antipodal pair: the arc is not unique
    }
    Vec4 y = yraw / s;
    const double arc_len = std::atan2(s, c);
    Vec4 z1, z2;
    plane_complement(x, y, z1, z2);
    int crossings = 0;
    bool clean = true;
    bvh_->for_each_near_plane(z1, z2, [&](const Vec4& a, const Vec4& b,
                                          const Vec4& cc, int) {
      if (!clean) return;
      int h = cone_hit(x, y, arc_len, a, b, cc);
      if (h < 0)
        clean = false;
      else
        crossings += h;
    });
    if (!clean) return std::nullopt;
    return crossings;
  }

  // Orthonormal basis of the orthogonal complement of span(x, y); boxes that
  // miss either hyperplane cannot contain a point of the arc's great circle.
  static void plane_complement(const Vec4& x, const Vec4& y, Vec4& z1, Vec4& z2) {
    std::array<Vec4, 3> f = tangent_frame(SpherePoint(x));
    std::array<Vec4, 3> w;
    for (int i = 0; i < 3; ++i) w[i] = f[i] - f[i].dot(y) * y;
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (w[i].squaredNorm() > w[best].squaredNorm()) best = i;
    z1 = w[best].normalized();
    Vec4 acc = Vec4::Zero();
    double most = -1.0;
    for (int i = 0; i < 3; ++i) {
      if (i == best) continue;
      Vec4 u = w[i] - w[i].dot(z1) * z1;
      if (u.squaredNorm() > most) {
        most = u.squaredNorm();
        acc = u;
      }
    }
    z2 = acc.normalized();
  }

  // 1: the open arc crosses the open cone transversally; 0: no crossing;
  // -1: ambiguous (graze or degeneracy), caller must jitter.
  static int cone_hit(const Vec4& x, const Vec4& y, double arc_len,
                      const Vec4& a, const Vec4& b, const Vec4& c) {
    constexpr double pi = 3.14159265358979323846;
    Vec4 w = cross4(a, b, c);
    double wn = w.norm();
    if (wn <= 1e-30) return -1;
    double alpha = w.dot(x), beta = w.dot(y);
    if (std::hypot(alpha, beta) <= 1e-12 * wn) return -1;  // circle in the cone plane
    double theta = std::atan2(-alpha, beta);
    if (theta < 0.0) theta += pi;  // the root modulo pi; theta + pi exceeds arc_len
    if (theta >= arc_len + 1e-10) return 0;
    if (theta <= 1e-10 || theta >= arc_len - 1e-10) return -1;  // endpoint graze
    Vec4 g = std::cos(theta) * x + std::sin(theta) * y;

    // scale the ray point onto the affine plane of the triangle
    Vec4 e1 = b - a, e2 = c - a;
    Vec4 nu = cross4(e1, e2, w);
    double nun = nu.norm();
    if (nun <= 1e-14 * e1.norm() * e2.norm() * wn) return -1;
    double numer = a.dot(nu);
    double denom = g.dot(nu);
    if (std::abs(numer) <= 1e-14 * nun) return -1;  // plane through the origin
    if (std::abs(denom) <= 1e-12 * nun) return 0;   // ray parallel to the plane
    double scale = numer / denom;
    if (scale <= 0.0) return 0;  // hits the opposite ray
    Vec4 pnt = scale * g - a;

    // in-plane barycentric coordinates from the 2x2 edge Gram system, which
    // stays well conditioned for tiny triangles
    double g11 = e1.squaredNorm(), g22 = e2.squaredNorm(), g12 = e1.dot(e2);
    double det = g11 * g22 - g12 * g12;
    if (det <= 1e-16 * g11 * g22) return -1;  // sliver triangle
    double r1 = e1.dot(pnt), r2 = e2.dot(pnt);
    double b1 = (g22 * r1 - g12 * r2) / det;
    double b2 = (g11 * r2 - g12 * r1) / det;
    double b0 = 1.0 - b1 - b2;
    double resid = (pnt - b1 * e1 - b2 * e2).norm();
    if (resid > 1e-7 * (std::sqrt(std::max(g11, g22)) + pnt.norm())) return -1;
    const double tie = 1e-9;
    double lo = std::min({b0, b1, b2});
    if (lo > tie) return 1;
    if (lo < -tie) return 0;
    return -1;  // grazes an edge or a vertex
  }

  std::shared_ptr<const SurfaceMesh> mesh_;
  std::shared_ptr<const Bvh> bvh_;
  SpherePoint ref_;
};

// One-shot convenience; builds the triangle tree per call.
inline double signed_distance(const SurfaceMesh& mesh_v, const SpherePoint& x) {
  return SignedDistance(mesh_v)(x);
}

// ------------------------------------------------------------ region volume

struct RegionSample {
  std::size_t n_samples = 0;
  std::size_t n_inside = 0;
  std::size_t n_outside = 0;
  std::size_t n_ties = 0;
  double volume = 0.0;
  double complement_volume = 0.0;
  double std_error = 0.0;
};

// Monte Carlo volume of the sublevel region {signed distance < t}.  A fixed
// seed fixes the sample set, so volumes are monotone in t sample-wise and
// the region and its complement tile the sphere volume exactly.
inline RegionSample region_volume(const SurfaceMesh& mesh_v, double t,
                                  std::size_t n_samples,
                                  std::uint64_t seed = kDefaultMcSeed,
                                  int workers = 1) {
  if (n_samples == 0)
    throw InvalidInputError("region_volume: need at least one sample");
  if (!std::isfinite(t)) throw InvalidInputError("region_volume: t must be finite");
  SignedDistance sd(mesh_v);
  std::vector<SpherePoint> pts = uniform_sample_s3(n_samples, seed);
  const std::size_t chunk = 1024;
  std::size_t n_chunks = (n_samples + chunk - 1) / chunk;
  std::vector<std::array<std::size_t, 3>> counts(n_chunks,
                                                 std::array<std::size_t, 3>{});
  parallel_chunks(n_samples, chunk, workers,
                  [&](std::size_t ci, std::size_t b, std::size_t e) {
                    for (std::size_t i = b; i < e; ++i) {
                      double d = sd(pts[i]);
                      if (d < t)
                        ++counts[ci][0];
                      else if (d > t)
                        ++counts[ci][1];
                      else
                        ++counts[ci][2];
                    }
                  });
  RegionSample out;
  out.n_samples = n_samples;
  for (const auto& c : counts) {
    out.n_inside += c[0];
    out.n_outside += c[1];
    out.n_ties += c[2];
  }
  double p = double(out.n_inside) / double(n_samples);
  out.volume = kVolumeS3 * p;
  out.complement_volume =
      kVolumeS3 * double(n_samples - out.n_inside) / double(n_samples);
  out.std_error = kVolumeS3 * std::sqrt(std::max(p * (1.0 - p), 0.0) /
                                        double(n_samples));
  return out;
}

// Indicator of the sublevel region of the conformal image's signed distance.
inline std::function<bool(const SpherePoint&)> region_indicator(
    const SurfaceMesh& mesh, const ConformalParameter& v, double t,
    int workers = 1) {
  SignedDistance sd(transform_mesh(v, mesh, workers));
  return [sd, t](const SpherePoint& x) { return sd(x) < t; };
}

inline std::function<bool(const SpherePoint&)> ball_indicator(
    const SpherePoint& center, double radius) {
  if (!(radius > 0.0))
    throw InvalidInputError("ball_indicator: radius must be positive");
  return [center, radius](const SpherePoint& x) {
    return geodesic_distance(center, x) < radius;
  };
}

inline double symmetric_difference_volume(
    const std::function<bool(const SpherePoint&)>& f,
    const std::function<bool(const SpherePoint&)>& g, std::size_t n_samples,
    std::uint64_t seed = kDefaultMcSeed, int workers = 1) {
  if (n_samples == 0)
    throw InvalidInputError("symmetric_difference_volume: need at least one sample");
  std::vector<SpherePoint> pts = uniform_sample_s3(n_samples, seed);
  const std::size_t chunk = 1024;
  std::size_t n_chunks = (n_samples + chunk - 1) / chunk;
  std::vector<std::size_t> diff(n_chunks, 0);
  parallel_chunks(n_samples, chunk, workers,
                  [&](std::size_t ci, std::size_t b, std::size_t e) {
                    std::size_t d = 0;
                    for (std::size_t i = b; i < e; ++i)
                      if (f(pts[i]) != g(pts[i])) ++d;
                    diff[ci] = d;
                  });
  std::size_t total = std::accumulate(diff.begin(), diff.end(), std::size_t{0});
  return kVolumeS3 * double(total) / double(n_samples);
}

// -------------------------------------------------------- extended gauss map

// Limit center of the blown-up regions for an approach of slope k = tan(theta):
// Q = -sin(theta) p - cos(theta) N.  Continuous across k = +-infinity.
inline SpherePoint extended_gauss_theta(const SpherePoint& p, const Vec4& normal,
                                        double theta) {
  constexpr double pi = 3.14159265358979323846;
  if (!std::isfinite(theta) || std::abs(theta) > 0.5 * pi + 1e-12)
    throw InvalidInputError("extended_gauss_theta: theta outside [-pi/2, pi/2]");
  if (std::abs(normal.norm() - 1.0) > kUnitTol)
    throw InvalidInputError("extended_gauss_theta: normal must be a unit vector");
  if (std::abs(normal.dot(Vec4(p))) > kUnitTol)
    throw InvalidInputError("extended_gauss_theta: normal must be tangent at p");
  return SpherePoint(-std::sin(theta) * Vec4(p) - std::cos(theta) * normal);
}

inline SpherePoint extended_gauss(const SpherePoint& p, const Vec4& normal,
                                  double k) {
  if (std::isnan(k)) throw InvalidInputError("extended_gauss: slope must not be NaN");
  return extended_gauss_theta(p, normal, std::atan(k));
}

// Radius of the predicted limit ball before the t offset.
inline double rbar_theta(double theta) {
  constexpr double pi = 3.14159265358979323846;
  if (!std::isfinite(theta) || std::abs(theta) > 0.5 * pi + 1e-12)
    throw InvalidInputError("rbar_theta: theta outside [-pi/2, pi/2]");
  return 0.5 * pi - theta;
}

inline double rbar(double k) {
  if (std::isnan(k)) throw InvalidInputError("rbar: slope must not be NaN");
  return rbar_theta(std::atan(k));
}

// ------------------------------------------------------------ boundary blowup

struct BlowupApproach {
  SpherePoint p;
  Vec4 normal;
  double theta = 0.0;  // arctan of the approach slope, so +-infinity is ordinary
  std::vector<double> s_sequence;

  BlowupApproach(const SpherePoint& p_in, const Vec4& normal_in, double slope,
                 std::vector<double> scales)
      : p(p_in), normal(normal_in), s_sequence(std::move(scales)) {
    if (std::isnan(slope))
      throw InvalidInputError("BlowupApproach: slope must not be NaN");
    theta = std::atan(slope);
    if (std::abs(normal.norm() - 1.0) > kUnitTol ||
        std::abs(normal.dot(Vec4(p))) > kUnitTol)
      throw InvalidInputError("BlowupApproach: normal must be a unit tangent at p");
    if (s_sequence.empty())
      throw InvalidInputError("BlowupApproach: need at least one scale");
    double prev = std::numeric_limits<double>::infinity();
    for (double s : s_sequence) {
      if (!(s > 0.0) || !(s < prev))
        throw InvalidInputError(
            "BlowupApproach: scales must be positive and strictly decreasing");
      prev = s;
    }
  }
};

// Symmetric-difference volumes between the sublevel regions along the
// approach and the predicted limit ball; expected to decrease toward the
// Monte Carlo noise floor.
inline std::vector<double> blowup_residual(const SurfaceMesh& mesh,
                                           const BlowupApproach& approach,
                                           double t, std::size_t n_samples,
                                           std::uint64_t seed = kDefaultMcSeed,
                                           int workers = 1) {
  constexpr double pi = 3.14159265358979323846;
  SpherePoint qbar = extended_gauss_theta(approach.p, approach.normal, approach.theta);
  double radius = rbar_theta(approach.theta) + t;
  if (!(radius > 0.0))
    throw InvalidInputError("blowup_residual: predicted ball radius rbar + t must be positive");
  auto ball = ball_indicator(qbar, radius);
  std::vector<double> out;
  out.reserve(approach.s_sequence.size());
  for (double s : approach.s_sequence) {
    double s1 = s * std::cos(approach.theta);
    double s2 = s * std::sin(approach.theta);
    if (std::abs(approach.theta) > 0.5 * pi - 1e-12) {
      // a straight vertical ray has s1 = 0, outside the chart; approach along
      // a parabola with the same limiting slope instead
      s1 = s * s;
      s2 = approach.theta > 0.0 ? s : -s;
    }
    ConformalParameter v(lambda_coord(approach.p, approach.normal, s1, s2));
    auto region = region_indicator(mesh, v, t, workers);
    out.push_back(symmetric_difference_volume(region, ball, n_samples, seed, workers));
  }
  return out;
}

// ---------------------------------------------------------------- map degree

namespace detail {

struct GaussLegendre64 {
  std::array<double, 64> x{}, w{};
};

// Nodes by Newton iteration from the Chebyshev-angle initial guesses.
inline const GaussLegendre64& gauss_legendre64() {
  static const GaussLegendre64 rule = [] {
    GaussLegendre64 r;
    constexpr int n = 64;
    constexpr double pi = 3.14159265358979323846;
    auto eval = [](double t, double& pn, double& dpn) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        double pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / double(k);
        p0 = p1;
        p1 = pk;
      }
      pn = p1;
      dpn = double(n) * (t * p1 - p0) / (t * t - 1.0);
    };
    for (int i = 0; i < n; ++i) {
      double t = std::cos(pi * (4.0 * i + 3.0) / (4.0 * n + 2.0));
      double pn = 0.0, dpn = 1.0;
      for (int it = 0; it < 100; ++it) {
        eval(t, pn, dpn);
        double dt = pn / dpn;
        t -= dt;
        if (std::abs(dt) < 1e-15) break;
      }
      eval(t, pn, dpn);
      r.x[i] = t;
      r.w[i] = 2.0 / ((1.0 - t * t) * dpn * dpn);
    }
    return r;
  }();
  return rule;
}

// Angular factor of the extended-map pullback across the tube.  The angle
// substitution absorbs the inverse square-root edge weight, and the result
// does not depend on the tube half-width.
inline double tube_degree_angular(double k1, double k2) {
  constexpr double pi = 3.14159265358979323846;
  const GaussLegendre64& gl = gauss_legendre64();
  double acc = 0.0;
  for (int j = 0; j < 64; ++j) {
    double th = 0.5 * pi * gl.x[j];
    double sn = std::sin(th), cs = std::cos(th);
    acc += gl.w[j] * -(sn * sn - sn * cs * (k1 + k2) + cs * cs * k1 * k2);
  }
  return 0.5 * pi * acc;
}

}  // namespace detail

inline double tube_degree_integral(const SurfaceMesh& mesh) {
  if (mesh.k1.size() != mesh.size() || mesh.k2.size() != mesh.size() ||
      mesh.vertex_area.size() != mesh.size())
    throw InvalidInputError("tube_degree_integral: mesh lacks curvature or area data");
  double acc = 0.0;
  for (std::size_t i = 0; i < mesh.size(); ++i)
    acc += mesh.vertex_area[i] * detail::tube_degree_angular(mesh.k1[i], mesh.k2[i]);
  return acc;
}

// Same integral done in closed form per point: -(pi/2) (1 + k1 k2).
inline double tube_degree_integral_closed_form(const SurfaceMesh& mesh) {
  constexpr double pi = 3.14159265358979323846;
  if (mesh.k1.size() != mesh.size() || mesh.k2.size() != mesh.size() ||
      mesh.vertex_area.size() != mesh.size())
    throw InvalidInputError("tube_degree_integral_closed_form: mesh lacks curvature or area data");
  double acc = 0.0;
  for (std::size_t i = 0; i < mesh.size(); ++i)
    acc += mesh.vertex_area[i] * (1.0 + mesh.k1[i] * mesh.k2[i]);
  return -0.5 * pi * acc;
}

// Degree of the extended Gauss map: the two complement components tile the
// sampled volume exactly, and the tube contributes the angular quadrature,
// which Gauss-Bonnet ties to the genus.  eps is the nominal tube half-width;
// the substituted integrand is independent of it, so it only gets validated.
inline double degree_gauss_map(const SurfaceMesh& mesh, double eps,
                               std::size_t n_samples = 200000,
                               std::uint64_t seed = kDefaultMcSeed,
                               int workers = 1) {
  constexpr double pi = 3.14159265358979323846;
  if (!(eps > 0.0) || !(eps < 0.5 * pi))
    throw InvalidInputError("degree_gauss_map: tube half-width must lie in (0, pi/2)");
  double area = std::accumulate(mesh.vertex_area.begin(), mesh.vertex_area.end(), 0.0);
  double defect = gauss_bonnet_defect(mesh);
  if (std::abs(defect) > 0.02 * (area + 4.0 * pi * (1.0 + mesh.genus)))
    throw InconsistentCurvatureError(
        "degree_gauss_map: curvature data contradicts the total-curvature "
        "identity for the stated genus");
  double quad = tube_degree_integral(mesh);
  double closed = tube_degree_integral_closed_form(mesh);
  if (std::abs(quad - closed) > 1e-8 * (1.0 + std::abs(closed)))
    throw InconsistentCurvatureError(
        "degree_gauss_map: tube quadrature disagrees with its closed form");
  RegionSample rs = region_volume(mesh, 0.0, n_samples, seed, workers);
  double vol_sides =
      kVolumeS3 * double(rs.n_inside + rs.n_outside) / double(rs.n_samples);
  return (vol_sides + quad) / kVolumeS3;
}

// ------------------------------------------------------- mass concentration

namespace detail {

// Uniform bins over the chordal bounding cube; bin width at least the query
// chord guarantees one-ring neighbor completeness.
struct PointBins {
  double cell = 1.0;
  std::unordered_map<std::uint64_t, std::vector<int>> bins;

  static std::uint64_t pack(int a, int b, int c, int d) {
    auto u = [](int t) { return std::uint64_t(std::uint32_t(t)) & 0xFFFFULL; };
    return (u(a) << 48) | (u(b) << 32) | (u(c) << 16) | u(d);
  }
  int index(double x) const { return int((x + 2.0) / cell); }

  void build(const std::vector<Vec4>& pts, double cell_size) {
    cell = std::max(cell_size, 1e-6);
    bins.clear();
    for (int i = 0; i < int(pts.size()); ++i)
      bins[pack(index(pts[i][0]), index(pts[i][1]), index(pts[i][2]),
                index(pts[i][3]))]
          .push_back(i);
  }

  template <class F>
  void for_each_near(const Vec4& q, F&& f) const {
    int ia = index(q[0]), ib = index(q[1]), ic = index(q[2]), id = index(q[3]);
    for (int da = -1; da <= 1; ++da)
      for (int db = -1; db <= 1; ++db)
        for (int dc = -1; dc <= 1; ++dc)
          for (int dd = -1; dd <= 1; ++dd) {
            auto it = bins.find(pack(ia + da, ib + db, ic + dc, id + dd));
            if (it == bins.end()) continue;
            for (int i : it->second) f(i);
          }
  }
};

}  // namespace detail

// Largest image mass found in any geodesic ball of the given radii, maximized
// over the (v, t) grid and over ball centers taken from the image points
// (strided down to center_cap) plus seeded random centers.  The mass is the
// unsigned offset Jacobian times the vertex area, so whole-sphere radii
// recover the total image area bound.
inline std::vector<double> mass_concentration_profile(
    const SurfaceMesh& mesh, const std::vector<Vec4>& v_grid,
    const std::vector<double>& t_grid, const std::vector<double>& radii,
    std::size_t center_cap = 4096, std::size_t random_centers = 512,
    std::uint64_t seed = kDefaultMcSeed, int workers = 1) {
  constexpr double pi = 3.14159265358979323846;
  if (v_grid.empty() || t_grid.empty() || radii.empty())
    throw InvalidInputError("mass_concentration_profile: empty grid");
  for (double r : radii)
    if (!(r > 0.0))
      throw InvalidInputError("mass_concentration_profile: radii must be positive");
  if (center_cap == 0) center_cap = 1;

  std::vector<SpherePoint> extra =
      random_centers > 0
          ? uniform_sample_s3(random_centers, derive_seed(seed, 1))
          : std::vector<SpherePoint>{};

  std::vector<double> best(radii.size(), 0.0);
  std::vector<Vec4> pts;
  std::vector<double> w;
  detail::PointBins bins;
  for (const Vec4& vraw : v_grid) {
    ConformalParameter v(vraw);
    SurfaceMesh image = transform_mesh(v, mesh, workers);
    for (double t : t_grid) {
      if (!std::isfinite(t))
        throw InvalidInputError("mass_concentration_profile: t must be finite");
      double ct = std::cos(t), st = std::sin(t);
      std::size_t n = image.size();
      pts.resize(n);
      w.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        Vec4 y = ct * Vec4(image.vertices[i]) + st * image.normals[i];
        pts[i] = y / y.norm();
        w[i] = std::abs(jacobian_psi(image.k1[i], image.k2[i], t)) *
               image.vertex_area[i];
      }
      std::size_t stride = std::max<std::size_t>(1, n / center_cap);
      for (std::size_t j = 0; j < radii.size(); ++j) {
        double chord = radii[j] >= pi ? 2.1 : 2.0 * std::sin(0.5 * radii[j]);
        double chord2 = chord * chord;
        bins.build(pts, chord);
        auto mass_at = [&](const Vec4& q) {
          double m = 0.0;
          bins.for_each_near(q, [&](int i) {
            if ((pts[i] - q).squaredNorm() < chord2) m += w[i];
          });
          return m;
        };
        double local = 0.0;
        for (std::size_t i = 0; i < n; i += stride)
          local = std::max(local, mass_at(pts[i]));
        for (const SpherePoint& q : extra)
          local = std::max(local, mass_at(Vec4(q)));
        best[j] = std::max(best[j], local);
      }
    }
  }
  return best;
}

inline double mass_concentration(const SurfaceMesh& mesh,
                                 const std::vector<Vec4>& v_grid,
                                 const std::vector<double>& t_grid, double radius,
                                 std::size_t center_cap = 4096,
                                 std::size_t random_centers = 512,
                                 std::uint64_t seed = kDefaultMcSeed,
                                 int workers = 1) {
  return mass_concentration_profile(mesh, v_grid, t_grid,
                                    std::vector<double>{radius}, center_cap,
                                    random_centers, seed, workers)[0];
}

}  // namespace wlab
