#pragma once

// Geometry of the unit 3-sphere in R^4: points, tangent directions,
// geodesics, the chordal/geodesic radius dictionary and stereographic
// charts.  Everything downstream (meshes, conformal maps, Monte Carlo
// volumes) is built on these few primitives.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "wlab/errors.hpp"

namespace wlab {

using Vec4 = Eigen::Vector4d;

inline constexpr double kTangentTol = 1e-12;
inline constexpr double kUnitTol = 1e-9;

// Point on S^3.  Construction renormalizes, so downstream code can rely on
// |p| = 1 within 1e-12 regardless of accumulated rounding in the input.
class SpherePoint {
 public:
  SpherePoint() : p_(1, 0, 0, 0) {}
  explicit SpherePoint(const Vec4& x) {
    double n = x.norm();
    if (!(n > 1e-14) || !std::isfinite(n))
      throw InvalidInputError("SpherePoint: cannot normalize a (near) zero vector");
    p_ = x / n;
  }
  const Vec4& p() const { return p_; }
  operator const Vec4&() const { return p_; }

 private:
  Vec4 p_;
};

// Tangent direction attached to a base point; <dir, base> = 0 within 1e-12.
struct TangentVector {
  SpherePoint base;
  Vec4 dir;
  TangentVector(const SpherePoint& b, const Vec4& d) : base(b), dir(d) {
    if (std::abs(dir.dot(base.p())) > kTangentTol * std::max(1.0, dir.norm()))
      throw InvalidInputError("TangentVector: direction not orthogonal to base");
  }
};

struct GeodesicBall {
  SpherePoint center;
  double radius = 0.0;  // geodesic radius in [0, pi]
  GeodesicBall(const SpherePoint& c, double r) : center(c), radius(r) {
    constexpr double pi = 3.14159265358979323846;
    if (!(r >= -kTangentTol && r <= pi + kTangentTol))
      throw InvalidInputError("GeodesicBall: radius outside [0, pi]");
    radius = std::clamp(r, 0.0, pi);
  }
};

inline double geodesic_distance(const SpherePoint& a, const SpherePoint& b) {
  return std::acos(std::clamp(a.p().dot(b.p()), -1.0, 1.0));
}

// Unit-speed geodesic from p in tangent direction n, evaluated at time t.
inline SpherePoint exp_point(const SpherePoint& p, const Vec4& n, double t) {
  if (std::abs(n.norm() - 1.0) > kUnitTol)
    throw InvalidInputError("exp_point: direction must be a unit vector");
  if (std::abs(n.dot(p.p())) > 1e-10)
    throw InvalidInputError("exp_point: direction must be tangent at p");
  return SpherePoint(std::cos(t) * p.p() + std::sin(t) * n);
}

// Euclidean radius of the R^4 ball cutting S^3 in a geodesic ball of
// radius r: 2 sin(r/2) = sqrt(2 (1 - cos r)).
inline double chord_radius(double r) {
  constexpr double pi = 3.14159265358979323846;
  if (!(r >= -kTangentTol && r <= pi + kTangentTol))
    throw InvalidInputError("chord_radius: geodesic radius outside [0, pi]");
  return 2.0 * std::sin(std::clamp(r, 0.0, pi) / 2.0);
}

inline double geodesic_radius(double chord) {
  if (!(chord >= -kTangentTol && chord <= 2.0 + kTangentTol))
    throw InvalidInputError("geodesic_radius: chordal radius outside [0, 2]");
  return 2.0 * std::asin(std::clamp(chord / 2.0, 0.0, 1.0));
}

// Stereographic chart with pole x: p -> x + (p - x)/(1 - <p, x>).
// The image lies in the hyperplane orthogonal to x.
inline Vec4 stereographic(const SpherePoint& x, const SpherePoint& p) {
  double denom = 1.0 - p.p().dot(x.p());
  if ((p.p() - x.p()).norm() < 1e-12 || denom == 0.0)
    throw PoleError("stereographic: point coincides with the pole");
  return x.p() + (p.p() - x.p()) / denom;
}

inline SpherePoint stereographic_inverse(const SpherePoint& x, const Vec4& w) {
  if (std::abs(w.dot(x.p())) > 1e-9 * (1.0 + w.norm()))
    throw InvalidInputError("stereographic_inverse: w not orthogonal to the pole");
  return SpherePoint(2.0 / (1.0 + w.squaredNorm()) * (w - x.p()) + x.p());
}

// Orthonormal basis of the 3-space orthogonal to p (Householder frame).
inline std::array<Vec4, 3> tangent_frame(const SpherePoint& p) {
  // reflect e4 onto p, then the images of e1..e3 span p^perp
  Vec4 u = p.p();
  u[3] += (u[3] >= 0.0 ? 1.0 : -1.0);
  double s = 2.0 / u.squaredNorm();
  double sign = (p.p()[3] >= 0.0 ? -1.0 : 1.0);
  std::array<Vec4, 3> f;
  for (int a = 0; a < 3; ++a) {
    Vec4 e = Vec4::Zero();
    e[a] = 1.0;
    f[a] = sign * (e - s * u[a] * u);
  }
  return f;
}

// Shared default seed for every Monte Carlo entry point, so repeated runs
// of the same experiment are bitwise reproducible out of the box.
inline constexpr std::uint64_t kDefaultMcSeed = 20240825ULL;

// splitmix64 step; used to derive independent per-worker seeds.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t worker) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (worker + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Uniform samples on S^3: normalized 4-vectors of i.i.d. Gaussians.
// The sequence is a pure function of the seed.
inline std::vector<SpherePoint> uniform_sample_s3(std::size_t n,
                                                  std::uint64_t seed) {
  if (n == 0) throw InvalidInputError("uniform_sample_s3: need n > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<SpherePoint> out;
  out.reserve(n);
  while (out.size() < n) {
    Vec4 x(g(rng), g(rng), g(rng), g(rng));
    if (x.norm() < 1e-12) continue;  // resample degenerate draws
    out.emplace_back(x);
  }
  return out;
}

}  // namespace wlab
