#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wlab/family.hpp"

using namespace wlab;
using Catch::Approx;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi2 = 2.0 * kPi * kPi;

// volume of a geodesic ball of radius rho in S^3
double ball_volume(double rho) { return kPi * (2.0 * rho - std::sin(2.0 * rho)); }

SpherePoint random_point(std::mt19937_64& g) {
  std::normal_distribution<double> d;
  return SpherePoint(Vec4(d(g), d(g), d(g), d(g)));
}

Vec4 random_unit_tangent(std::mt19937_64& g, const SpherePoint& x) {
  std::normal_distribution<double> d;
  auto f = tangent_frame(x);
  Vec4 n = d(g) * f[0] + d(g) * f[1] + d(g) * f[2];
  return n / n.norm();
}

Vec4 random_v(std::mt19937_64& g, double rmax) {
  std::uniform_real_distribution<double> u(0.0, rmax);
  return u(g) * Vec4(random_point(g));
}

}  // namespace

TEST_CASE("family map reduces to the known flows") {
  std::mt19937_64 g(101);
  std::uniform_real_distribution<double> ut(-kPi, kPi);
  for (int i = 0; i < 30; ++i) {
    SpherePoint x = random_point(g);
    Vec4 n = random_unit_tangent(g, x);
    ConformalParameter v(random_v(g, 0.8));
    double t = ut(g);

    // t = 0 is the plain conformal image
    REQUIRE((Vec4(p_map(v, 0.0, x, n)) - Vec4(apply_F(v, x))).norm() <= 1e-12);

    // v = 0 is the geodesic normal flow
    SpherePoint flow = p_map(ConformalParameter(Vec4::Zero()), t, x, n);
    REQUIRE((Vec4(flow) - Vec4(exp_point(x, n, t))).norm() <= 1e-12);

    // the defining combination is itself a unit vector before renormalizing
    Vec4 raw = std::cos(t) * Vec4(apply_F(v, x)) +
               std::sin(t) * pushforward_normal(v, x, n);
    REQUIRE(raw.norm() == Approx(1.0).margin(1e-12));
  }

  SpherePoint x = random_point(g);
  Vec4 n = random_unit_tangent(g, x);
  REQUIRE((Vec4(p_map(ConformalParameter(Vec4::Zero()), kPi, x, n)) +
           Vec4(x)).norm() <= 1e-12);

  REQUIRE_NOTHROW(FamilyPoint(ConformalParameter(Vec4(0.3, 0, 0, 0)), kPi));
  REQUIRE_NOTHROW(FamilyPoint(ConformalParameter(Vec4::Zero()), -kPi));
  REQUIRE_THROWS_AS(FamilyPoint(ConformalParameter(Vec4::Zero()), 3.2),
                    InvalidInputError);
  REQUIRE_THROWS_AS(p_map(ConformalParameter(Vec4(0.1, 0, 0, 0)), 0.3, x, Vec4(x)),
                    InvalidInputError);
}

TEST_CASE("offset jacobian closed forms and expansion agree") {
  REQUIRE(jacobian_psi(2.3, -0.7, 0.0) == 1.0);
  std::mt19937_64 g(202);
  std::uniform_real_distribution<double> ut(-kPi, kPi), uk(-10.0, 10.0);
  for (int i = 0; i < 40; ++i) {
    double t = ut(g);
    double c = std::cos(t);
    REQUIRE(jacobian_psi(0.0, 0.0, t) == Approx(c * c).margin(1e-15));
    // principal curvatures +1/-1 collapse to the double angle
    REQUIRE(jacobian_psi(1.0, -1.0, t) == Approx(std::cos(2.0 * t)).margin(1e-14));
  }
  for (int i = 0; i < 500; ++i) {
    double k1 = uk(g), k2 = uk(g), t = ut(g);
    double a = jacobian_psi(k1, k2, t);
    double b = jacobian_psi_expanded(k1, k2, t);
    REQUIRE(a == Approx(b).margin(1e-12 * (1.0 + std::abs(a))));
  }
}

TEST_CASE("offset area bound matches offset torus and sphere values") {
  SurfaceMesh cl = make_flat_torus(std::sqrt(0.5), 128);

  // t = 0: the bound is exactly the area of the transformed surface
  ConformalParameter v(Vec4(0.0, 0.3, 0.0, 0.1));
  double a_v = willmore_energy(transform_mesh(v, cl)).area;
  REQUIRE(area_upper_bound(cl, v, 0.0) == Approx(a_v).epsilon(1e-9));

  // v = 0: the bound equals the area of the independently meshed offset torus
  ConformalParameter v0(Vec4::Zero());
  for (double t : {-0.6, -0.3, 0.2, 0.5}) {
    double bound = area_upper_bound(cl, v0, t);
    REQUIRE(bound == Approx(kTwoPi2 * std::cos(2.0 * t)).epsilon(0.01));
    SurfaceMesh off = make_flat_torus(std::cos(kPi / 4.0 + t), 128);
    REQUIRE(bound == Approx(willmore_energy(off).area).epsilon(0.01));
  }

  // quarter-turn offsets keep only the positive product of curvatures
  SurfaceMesh sp = make_geodesic_sphere(SpherePoint(Vec4(0, 1, 0, 0)), kPi / 3, 64);
  REQUIRE(area_upper_bound(sp, v0, kPi / 2) == Approx(kPi).epsilon(0.01));
  REQUIRE(area_upper_bound(cl, v0, kPi / 2) <= 1e-9);
}

TEST_CASE("area inequality sweep stays nonnegative and hits its closed form") {
  SurfaceMesh cl = make_flat_torus(std::sqrt(0.5), 96);
  std::vector<double> tg;
  for (int i = 0; i < 17; ++i) tg.push_back(-kPi + 2.0 * kPi * i / 16.0);
  std::vector<Vec4> vg = {Vec4::Zero()};

  RosReport rep = verify_ros_inequality(cl, vg, tg);
  REQUIRE(rep.entries.size() == 17);
  REQUIRE(rep.willmore == Approx(kTwoPi2).epsilon(0.005));
  REQUIRE(rep.traceless_sq_integral == Approx(2.0 * kTwoPi2).epsilon(0.005));
  REQUIRE(rep.min_slack >= -1e-6 * rep.willmore);
  REQUIRE(rep.pass);
  for (const RosEntry& e : rep.entries) {
    double s2 = std::sin(e.t) * std::sin(e.t);
    // the unclamped integral satisfies an exact identity on a minimal surface
    REQUIRE(e.signed_slack == Approx(kTwoPi2 * s2).margin(0.02 * kTwoPi2));
    // clamping can only lower the slack
    REQUIRE(e.slack <= e.signed_slack + 1e-9);
    REQUIRE(e.slack >= -1e-6 * rep.willmore);
  }

  // the t = 0 slice has a strict maximum of area at v = 0
  std::vector<Vec4> ray;
  for (int i = 0; i <= 10; ++i) ray.push_back(Vec4(0.05 * i, 0, 0, 0));
  RosReport r2 = verify_ros_inequality(cl, ray, {0.0});
  REQUIRE(r2.min_slack >= -1e-6 * rep.willmore);
  REQUIRE(std::abs(r2.entries.front().slack) <= 1e-6 * rep.willmore);
  REQUIRE(r2.entries.back().slack > r2.entries.front().slack);
  REQUIRE(r2.entries.back().slack > 0.005 * rep.willmore);

  REQUIRE_THROWS_AS(verify_ros_inequality(cl, {}, tg), InvalidInputError);
  REQUIRE_THROWS_AS(verify_ros_inequality(cl, vg, {}), InvalidInputError);
  REQUIRE_THROWS_AS(verify_ros_inequality(cl, vg, {4.0}), InvalidInputError);
}

TEST_CASE("sweep report serializes to csv") {
  SurfaceMesh cl = make_flat_torus(std::sqrt(0.5), 32);
  std::vector<Vec4> vg = {Vec4::Zero(), Vec4(0.0, 0.0, 0.2, 0.0)};
  std::vector<double> tg = {-1.0, -0.3, 0.0, 0.4, 1.1};
  RosReport rep = verify_ros_inequality(cl, vg, tg);

  std::ostringstream os;
  write_ros_sweep_csv(os, rep);
  std::istringstream is(os.str());
  std::string line;
  REQUIRE(std::getline(is, line));
  REQUIRE(line == "v1,v2,v3,v4,t,bound,rhs,slack");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double v1, v2, v3, v4, t, bound, rhs, slack;
    REQUIRE((ls >> v1 >> v2 >> v3 >> v4 >> t >> bound >> rhs >> slack));
    REQUIRE(slack == Approx(rhs - bound).margin(1e-9));
    ++rows;
  }
  REQUIRE(rows == rep.entries.size());
  REQUIRE(rows == 10);
}

TEST_CASE("signed distance is positive toward the normal side") {
  SpherePoint c(Vec4(1, 0, 0, 0));
  SurfaceMesh sp = make_geodesic_sphere(c, 0.8, 96);
  SignedDistance sd(sp);

  // the normals of a distance sphere point at its center
  REQUIRE(sd(c) == Approx(0.8).margin(5e-3));
  REQUIRE(sd(SpherePoint(Vec4(-1, 0, 0, 0))) == Approx(0.8 - kPi).margin(5e-3));

  auto pts = uniform_sample_s3(200, 9001);
  for (const SpherePoint& x : pts)
    REQUIRE(sd(x) == Approx(0.8 - geodesic_distance(x, c)).margin(2e-3));

  // mesh vertices are at distance zero exactly
  REQUIRE(sd(sp.vertices[5]) == 0.0);

  SurfaceMesh broken = make_geodesic_sphere(c, 0.8, 12);
  broken.a_star_ref.reset();
  REQUIRE_THROWS_AS(SignedDistance(std::move(broken)), InvalidInputError);
}

TEST_CASE("signed distance tracks normal offsets on a torus") {
  SurfaceMesh cl = make_flat_torus(std::sqrt(0.5), 128);
  SignedDistance sd(cl);
  std::mt19937_64 g(77);
  std::uniform_int_distribution<std::size_t> pick(0, cl.size() - 1);
  for (int i = 0; i < 30; ++i) {
    std::size_t j = pick(g);
    for (double t : {0.08, -0.08}) {
      SpherePoint x = exp_point(cl.vertices[j], cl.normals[j], t);
      REQUIRE(sd(x) == Approx(t).margin(2e-3));
    }
  }
}

TEST_CASE("region volumes match closed-form ball volumes") {
  SpherePoint c(Vec4(0, 0, 0, 1));
  SurfaceMesh hemi = make_geodesic_sphere(c, kPi / 2, 64);
  RegionSample rs = region_volume(hemi, 0.0, 40000, 12345);
  REQUIRE(rs.n_samples == 40000);
  REQUIRE(rs.n_ties == 0);
  REQUIRE(rs.std_error ==
          Approx(kTwoPi2 * std::sqrt(0.25 / 40000.0)).epsilon(0.05));
  REQUIRE(rs.volume == Approx(kPi * kPi).margin(4.0 * rs.std_error));
  REQUIRE(rs.volume + rs.complement_volume == Approx(kTwoPi2).margin(1e-9));

  // worker count changes nothing
  RegionSample rw = region_volume(hemi, 0.0, 40000, 12345, 3);
  REQUIRE(rw.volume == rs.volume);
  REQUIRE(rw.complement_volume == rs.complement_volume);

  // the extreme levels are exact for any sample set
  REQUIRE(region_volume(hemi, -kPi, 4000, 7).volume == 0.0);
  REQUIRE(region_volume(hemi, kPi, 4000, 7).volume == Approx(kTwoPi2).margin(1e-12));

  // sublevel sets of a small sphere are complements of shrunken balls
  SurfaceMesh sp = make_geodesic_sphere(SpherePoint(Vec4(1, 0, 0, 0)), 0.8, 64);
  RegionSample r2 = region_volume(sp, 0.1, 40000, 99);
  double expect = kTwoPi2 - ball_volume(0.7);
  REQUIRE(r2.volume == Approx(expect).margin(4.0 * r2.std_error + 0.05));

  double prev = -1.0;
  for (double t : {-0.5, -0.1, 0.2, 0.6}) {
    double vol = region_volume(sp, t, 20000, 31).volume;
    REQUIRE(vol >= prev);
    prev = vol;
  }

  REQUIRE_THROWS_AS(region_volume(sp, 0.0, 0, 1), InvalidInputError);
}

TEST_CASE("extended gauss map endpoints, frozen value, and continuity") {
  const double inf = std::numeric_limits<double>::infinity();
  SpherePoint p(Vec4(1, 0, 0, 0));
  Vec4 n(0, 0, 1, 0);

  REQUIRE((Vec4(extended_gauss(p, n, 0.0)) + n).norm() <= 1e-12);
  REQUIRE((Vec4(extended_gauss(p, n, inf)) + Vec4(p)).norm() <= 1e-12);
  REQUIRE((Vec4(extended_gauss(p, n, -inf)) - Vec4(p)).norm() <= 1e-12);
  Vec4 expect = -(Vec4(1, 0, 0, 0) + Vec4(0, 0, 1, 0)) / std::sqrt(2.0);
  REQUIRE((Vec4(extended_gauss(p, n, 1.0)) - expect).norm() <= 1e-12);

  REQUIRE(rbar(0.0) == Approx(kPi / 2).margin(1e-15));
  REQUIRE(rbar(1.0) == Approx(kPi / 4).margin(1e-15));
  REQUIRE(rbar(inf) == Approx(0.0).margin(1e-12));
  REQUIRE(rbar(-inf) == Approx(kPi).margin(1e-12));

  Vec4 prev = Vec4::Zero();
  double prev_theta = 0.0;
  for (int i = 0; i <= 400; ++i) {
    double theta = -kPi / 2 + kPi * i / 400.0;
    Vec4 q = Vec4(extended_gauss_theta(p, n, theta));
    if (i > 0)
      REQUIRE((q - prev).norm() <= 2.0 * std::abs(theta - prev_theta) + 1e-12);
    prev = q;
    prev_theta = theta;
  }

  REQUIRE_THROWS_AS(extended_gauss(p, Vec4(1, 0, 0, 0), 0.0), InvalidInputError);
  REQUIRE_THROWS_AS(extended_gauss(p, n, std::nan("")), InvalidInputError);
}

TEST_CASE("blow-up residuals shrink toward the predicted balls") {
  const double inf = std::numeric_limits<double>::infinity();
  SpherePoint c(Vec4(0, 0, 0, 1));
  SurfaceMesh gs = make_geodesic_sphere(c, kPi / 2, 48);
  SpherePoint p(Vec4(1, 0, 0, 0));  // on the equatorial surface
  Vec4 n(0, 0, 0, 1);               // every normal of a great sphere is its center

  std::vector<double> ss = {0.1, 0.02};

  // Perpendicular approach: the conformal factor stays bounded, so the mesh
  // image keeps its quality and the residual tracks the true O(s) decay.
  BlowupApproach ainf(p, n, inf, ss);
  std::vector<double> res = blowup_residual(gs, ainf, 0.3, 40000, 778);
  REQUIRE(res.size() == 2);
  REQUIRE(res[1] <= res[0] + 1e-12);
  REQUIRE(res[0] <= 0.35);
  REQUIRE(res[1] <= 0.05);

  // Radial approach to a surface point: the conformal factor near p grows
  // like 2/s, so small s values exaggerate the fixed mesh facets. A great
  // sphere through the approach axis is setwise invariant, hence the true
  // residual vanishes and the measurement is pure discretization error.
  BlowupApproach a0(p, n, 0.0, {0.5, 0.2});
  std::vector<double> res0 = blowup_residual(gs, a0, 0.25, 40000, 777);
  REQUIRE(res0[0] <= 0.12);
  REQUIRE(res0[1] <= 0.12);

  // Slanted approach: the limit ball differs from the surface at finite s,
  // so the true decay dominates the discretization error at moderate s.
  BlowupApproach a1(p, n, 1.0, {0.5, 0.2});
  std::vector<double> res1 = blowup_residual(gs, a1, 0.25, 40000, 777);
  REQUIRE(res1[1] <= res1[0] + 1e-12);
  REQUIRE(res1[0] <= 3.0);
  REQUIRE(res1[1] <= 1.1);

  // radial approach to an interior point, assembled from the region primitives
  SpherePoint q(Vec4(0, 0, 0, -1));  // deep inside the far component
  double prev = std::numeric_limits<double>::infinity();
  for (double s : ss) {
    ConformalParameter v((1.0 - s) * Vec4(q));
    double sym = symmetric_difference_volume(region_indicator(gs, v, -0.3),
                                             ball_indicator(q, kPi - 0.3),
                                             40000, 779);
    REQUIRE(sym <= prev + 1e-12);
    prev = sym;
  }
  REQUIRE(prev <= 0.08);

  REQUIRE_THROWS_AS(BlowupApproach(p, n, 0.0, {0.1, 0.2}), InvalidInputError);
  REQUIRE_THROWS_AS(BlowupApproach(p, n, 0.0, {}), InvalidInputError);
  REQUIRE_THROWS_AS(BlowupApproach(p, n, std::nan(""), ss), InvalidInputError);
}

TEST_CASE("symmetric difference of identical regions vanishes") {
  SurfaceMesh gs = make_geodesic_sphere(SpherePoint(Vec4(0, 1, 0, 0)), kPi / 2, 32);
  auto f = region_indicator(gs, ConformalParameter(Vec4(0.2, 0, 0, 0)), 0.15);
  REQUIRE(symmetric_difference_volume(f, f, 5000, 5) == 0.0);

  auto full = region_indicator(gs, ConformalParameter(Vec4::Zero()), kPi);
  auto ball = ball_indicator(SpherePoint(Vec4(0, 0, 1, 0)), kPi + 0.1);
  REQUIRE(symmetric_difference_volume(full, ball, 5000, 6) == 0.0);
}

TEST_CASE("gauss map degree recovers the genus") {
  SurfaceMesh cl = make_flat_torus(std::sqrt(0.5), 64);
  REQUIRE(degree_gauss_map(cl, 0.2, 60000, 4242) == Approx(1.0).margin(1e-9));

  SurfaceMesh sp3 = make_geodesic_sphere(SpherePoint(Vec4(0, 1, 0, 0)), kPi / 3, 48);
  REQUIRE(degree_gauss_map(sp3, 0.2, 60000, 4242) == Approx(0.0).margin(0.02));
  SurfaceMesh gs = make_geodesic_sphere(SpherePoint(Vec4(0, 0, 1, 0)), kPi / 2, 48);
  REQUIRE(degree_gauss_map(gs, 0.3, 60000, 4243) == Approx(0.0).margin(0.02));

  SurfaceMesh rev = make_revolution_torus(std::sqrt(2.0), 1.0, 64);
  REQUIRE(degree_gauss_map(rev, 0.1, 60000, 4244) == Approx(1.0).margin(0.03));

  for (const SurfaceMesh* m : {&cl, &sp3, &gs, &rev}) {
    double quad = tube_degree_integral(*m);
    double closed = tube_degree_integral_closed_form(*m);
    REQUIRE(quad == Approx(closed).margin(1e-8 * (1.0 + std::abs(closed))));
    double chi = 2.0 - 2.0 * m->genus;
    REQUIRE(quad == Approx(-kPi * kPi * chi).margin(0.01 * kTwoPi2));
  }

  for (int genus = 0; genus < 4; ++genus)
    REQUIRE((kTwoPi2 + kPi * kPi * (2.0 * genus - 2.0)) / kTwoPi2 ==
            Approx(double(genus)).margin(1e-12));

  SurfaceMesh bad = make_geodesic_sphere(SpherePoint(Vec4(1, 0, 0, 0)), kPi / 3, 24);
  for (double& k : bad.k1) k += 0.8;
  REQUIRE_THROWS_AS(degree_gauss_map(bad, 0.2, 2000, 1), InconsistentCurvatureError);
  REQUIRE_THROWS_AS(degree_gauss_map(cl, -0.1, 2000, 1), InvalidInputError);
}

TEST_CASE("mass concentration decreases with radius and respects totals") {
  SurfaceMesh cl = make_flat_torus(std::sqrt(0.5), 48);
  std::vector<Vec4> vg = {Vec4::Zero(), Vec4(0.2, 0, 0, 0)};
  std::vector<double> tg = {0.0, 0.4};
  std::vector<double> radii = {0.4, 0.2, 0.1, 0.05};

  std::vector<double> prof = mass_concentration_profile(cl, vg, tg, radii);
  REQUIRE(prof.size() == 4);
  for (std::size_t i = 1; i < prof.size(); ++i)
    REQUIRE(prof[i] <= prof[i - 1] + 1e-12);

  // a whole-sphere radius collects the entire mass, maximized at (0, 0)
  double total = mass_concentration(cl, vg, tg, kPi + 0.1);
  REQUIRE(total == Approx(willmore_energy(cl).area).epsilon(1e-9));

  // deterministic: repeated calls agree bit for bit
  REQUIRE(mass_concentration(cl, vg, tg, 0.2) == prof[1]);

  REQUIRE_THROWS_AS(mass_concentration(cl, {}, tg, 0.2), InvalidInputError);
  REQUIRE_THROWS_AS(mass_concentration(cl, vg, {}, 0.2), InvalidInputError);
  REQUIRE_THROWS_AS(mass_concentration(cl, vg, tg, 0.0), InvalidInputError);
}

TEST_CASE("mass concentration matches small cap areas on a sphere") {
  SurfaceMesh gs = make_geodesic_sphere(SpherePoint(Vec4(0, 0, 0, 1)), kPi / 2, 256);
  double val = mass_concentration(gs, {Vec4::Zero()}, {0.0}, 0.1);
  REQUIRE(val <= 1.2 * kPi * 0.01);
  REQUIRE(val >= 0.7 * kPi * 0.01);
}
