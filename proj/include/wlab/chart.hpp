#pragma once

// Parametric charts into S^3 with analytic first and second derivatives.
// Curvature data on generated meshes comes straight from these jets, so
// the estimation code can be validated against exact values.

#include <cmath>
#include <memory>

#include "wlab/s3.hpp"

namespace wlab {

struct ChartJet {
  Vec4 x, xu, xv, xuu, xuv, xvv;
};

class ParametricSurface {
 public:
  virtual ~ParametricSurface() = default;
  virtual ChartJet jet(double u, double v) const = 0;
  // Per-axis period of the parameter domain; 0 marks a non-periodic axis.
  // Needed to unwrap per-vertex coordinates across the seam before
  // interpolating them inside a triangle.
  virtual std::array<double, 2> periods() const { return {0.0, 0.0}; }
};

// Generalized cross product: the vector orthogonal to a, b, c with
// det[r a b c] > 0.
inline Vec4 cross4(const Vec4& a, const Vec4& b, const Vec4& c) {
  Eigen::Matrix3d m;
  Vec4 r;
  double sign = 1.0;
  for (int i = 0; i < 4; ++i) {
    int col = 0;
    for (int j = 0; j < 4; ++j) {
      if (j == i) continue;
      m(0, col) = a[j];
      m(1, col) = b[j];
      m(2, col) = c[j];
      ++col;
    }
    r[i] = sign * m.determinant();
    sign = -sign;
  }
  return r;
}

struct CurvaturePoint {
  Vec4 normal;       // unit normal tangent to S^3
  double k1, k2;     // principal curvatures, k1 >= k2
};

// Shape operator of the immersed chart inside S^3 at (u, v).
// `orient` flips the normal so generators control which side it faces.
inline CurvaturePoint chart_curvature(const ChartJet& J, bool flip_normal) {
  Vec4 n = cross4(J.x, J.xu, J.xv);
  double nn = n.norm();
  if (!(nn > 1e-14))
    throw InvalidInputError("chart_curvature: degenerate chart point");
  n /= nn;
  if (flip_normal) n = -n;

  double E = J.xu.dot(J.xu), F = J.xu.dot(J.xv), G = J.xv.dot(J.xv);
  double L = J.xuu.dot(n), M = J.xuv.dot(n), N = J.xvv.dot(n);
  double det = E * G - F * F;
  if (!(det > 1e-20))
    throw InvalidInputError("chart_curvature: singular first fundamental form");
  // shape operator I^{-1} II; eigenvalues via trace/determinant
  double tr = (G * L - 2.0 * F * M + E * N) / det;
  double dk = (L * N - M * M) / det;
  double disc = std::max(0.0, tr * tr / 4.0 - dk);
  double s = std::sqrt(disc);
  CurvaturePoint out;
  out.normal = n;
  out.k1 = tr / 2.0 + s;
  out.k2 = tr / 2.0 - s;
  return out;
}

class SphereChart final : public ParametricSurface {
 public:
  SphereChart(const SpherePoint& center, double r)
      : c_(center), r_(r), frame_(tangent_frame(center)) {}

  ChartJet jet(double u, double v) const override {
    const Vec4 &b1 = frame_[0], &b2 = frame_[1], &b3 = frame_[2];
    double su = std::sin(u), cu = std::cos(u), sv = std::sin(v), cv = std::cos(v);
    Vec4 w = su * cv * b1 + su * sv * b2 + cu * b3;
    Vec4 wu = cu * cv * b1 + cu * sv * b2 - su * b3;
    Vec4 wv = -su * sv * b1 + su * cv * b2;
    Vec4 wuu = -w;
    Vec4 wuv = -cu * sv * b1 + cu * cv * b2;
    Vec4 wvv = -su * cv * b1 - su * sv * b2;
    double cr = std::cos(r_), sr = std::sin(r_);
    ChartJet J;
    J.x = cr * c_.p() + sr * w;
    J.xu = sr * wu;
    J.xv = sr * wv;
    J.xuu = sr * wuu;
    J.xuv = sr * wuv;
    J.xvv = sr * wvv;
    return J;
  }

  const SpherePoint& center() const { return c_; }
  double radius() const { return r_; }
  std::array<double, 2> periods() const override {
    return {0.0, 2.0 * 3.14159265358979323846};
  }

 private:
  SpherePoint c_;
  double r_;
  std::array<Vec4, 3> frame_;
};

class FlatTorusChart final : public ParametricSurface {
 public:
  explicit FlatTorusChart(double a) : a_(a), b_(std::sqrt(1.0 - a * a)) {}

  ChartJet jet(double u, double v) const override {
    ChartJet J;
    double cu = std::cos(u), su = std::sin(u), cv = std::cos(v), sv = std::sin(v);
    J.x = Vec4(a_ * cu, a_ * su, b_ * cv, b_ * sv);
    J.xu = Vec4(-a_ * su, a_ * cu, 0, 0);
    J.xv = Vec4(0, 0, -b_ * sv, b_ * cv);
    J.xuu = Vec4(-a_ * cu, -a_ * su, 0, 0);
    J.xuv = Vec4::Zero();
    J.xvv = Vec4(0, 0, -b_ * cv, -b_ * sv);
    return J;
  }

  double a() const { return a_; }
  double b() const { return b_; }
  std::array<double, 2> periods() const override {
    constexpr double tau = 2.0 * 3.14159265358979323846;
    return {tau, tau};
  }

 private:
  double a_, b_;
};

// Torus of revolution in R^3 pulled back through the inverse stereographic
// chart with pole e4.
class RevolutionTorusChart final : public ParametricSurface {
 public:
  RevolutionTorusChart(double R, double r) : R_(R), r_(r) {}

  ChartJet jet(double u, double v) const override {
    double cu = std::cos(u), su = std::sin(u), cv = std::cos(v), sv = std::sin(v);
    double rad = R_ + r_ * cu;
    // w and its derivatives in the e4-orthogonal 3-space
    Vec4 w(rad * cv, rad * sv, r_ * su, 0.0);
    Vec4 wu(-r_ * su * cv, -r_ * su * sv, r_ * cu, 0.0);
    Vec4 wv(-rad * sv, rad * cv, 0.0, 0.0);
    Vec4 wuu(-r_ * cu * cv, -r_ * cu * sv, -r_ * su, 0.0);
    Vec4 wuv(r_ * su * sv, -r_ * su * cv, 0.0, 0.0);
    Vec4 wvv(-rad * cv, -rad * sv, 0.0, 0.0);

    const Vec4 pole(0, 0, 0, 1);
    double S = 1.0 + w.squaredNorm();
    double Su = 2.0 * w.dot(wu), Sv = 2.0 * w.dot(wv);
    double Suu = 2.0 * (wu.dot(wu) + w.dot(wuu));
    double Svv = 2.0 * (wv.dot(wv) + w.dot(wvv));
    double Suv = 2.0 * (wu.dot(wv) + w.dot(wuv));
    Vec4 d = w - pole;

    ChartJet J;
    J.x = 2.0 / S * d + pole;
    J.xu = 2.0 * wu / S - 2.0 * Su / (S * S) * d;
    J.xv = 2.0 * wv / S - 2.0 * Sv / (S * S) * d;
    J.xuu = 2.0 * wuu / S - 4.0 * Su / (S * S) * wu -
            2.0 * Suu / (S * S) * d + 4.0 * Su * Su / (S * S * S) * d;
    J.xvv = 2.0 * wvv / S - 4.0 * Sv / (S * S) * wv -
            2.0 * Svv / (S * S) * d + 4.0 * Sv * Sv / (S * S * S) * d;
    J.xuv = 2.0 * wuv / S - 2.0 * Sv / (S * S) * wu - 2.0 * Su / (S * S) * wv -
            2.0 * Suv / (S * S) * d + 4.0 * Su * Sv / (S * S * S) * d;
    return J;
  }

  std::array<double, 2> periods() const override {
    constexpr double tau = 2.0 * 3.14159265358979323846;
    return {tau, tau};
  }

 private:
  double R_, r_;
};

// First-derivative-only view used for composed (conformally mapped) charts,
// where second derivatives are not needed: Newton projection of a point
// onto the chart only requires the tangent plane.
class FirstOrderChart {
 public:
  virtual ~FirstOrderChart() = default;
  virtual void eval(double u, double v, Vec4& x, Vec4& xu, Vec4& xv) const = 0;
};

}  // namespace wlab
