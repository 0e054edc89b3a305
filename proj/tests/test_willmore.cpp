#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "wlab/willmore.hpp"

using namespace wlab;
using Catch::Approx;

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi2 = 2.0 * kPi * kPi;
}  // namespace

TEST_CASE("energy report hits the classical values") {
  for (double r : {kPi / 6.0, kPi / 4.0, kPi / 2.0}) {
    SurfaceMesh s = make_geodesic_sphere(SpherePoint(Vec4(0, 1, 0, 0)), r, 64);
    EnergyReport e = willmore_energy(s);
    REQUIRE(e.willmore == Approx(4.0 * kPi).epsilon(0.01));
    REQUIRE(e.area == Approx(4.0 * kPi * std::sin(r) * std::sin(r)).epsilon(0.01));
    REQUIRE(e.willmore >= e.area);
    REQUIRE(e.traceless_sq_integral >= 0.0);
    // geodesic spheres are umbilic
    REQUIRE(e.traceless_sq_integral <= 1e-18);
    REQUIRE(e.max_H == Approx(std::abs(1.0 / std::tan(r))).margin(1e-12));
  }

  SurfaceMesh cl = make_flat_torus(std::sqrt(0.5), 128);
  EnergyReport e = willmore_energy(cl);
  REQUIRE(e.willmore == Approx(kTwoPi2).epsilon(0.005));
  REQUIRE(e.max_H <= 1e-12);
  REQUIRE(e.willmore == Approx(e.area).epsilon(1e-12));

  SurfaceMesh t6 = make_flat_torus(0.6, 128);
  EnergyReport e6 = willmore_energy(t6);
  REQUIRE(e6.willmore == Approx(kPi * kPi / 0.48).epsilon(0.005));

  // the trace-free integral of a flat torus has a closed form too:
  // (k1 - k2)^2 / 2 = (1/(ab))^2 / 2 over area 4 pi^2 ab
  REQUIRE(e6.traceless_sq_integral ==
          Approx(4.0 * kPi * kPi / (2.0 * 0.48)).epsilon(0.005));
}

TEST_CASE("willmore_energy rejects meshes without curvature data") {
  SurfaceMesh m = make_flat_torus(0.5, 8);
  m.k1.clear();
  REQUIRE_THROWS_AS(willmore_energy(m), InvalidInputError);
}

TEST_CASE("minimal surfaces have energy equal to area") {
  SurfaceMesh great = make_geodesic_sphere(SpherePoint(Vec4(0, 0, 1, 0)), kPi / 2, 48);
  EnergyReport eg = willmore_energy(great);
  REQUIRE(eg.willmore == Approx(eg.area).epsilon(0.01));
  REQUIRE(eg.max_H <= 1e-12);

  SurfaceMesh cl = make_flat_torus(std::sqrt(0.5), 96);
  EnergyReport ec = willmore_energy(cl);
  REQUIRE(ec.willmore == Approx(ec.area).epsilon(0.01));
}

TEST_CASE("flat torus closed form") {
  REQUIRE(flat_torus_energy_closed_form(std::sqrt(0.5)) ==
          Approx(kTwoPi2).margin(1e-12));
  REQUIRE(flat_torus_energy_closed_form(0.6) ==
          Approx(kPi * kPi / 0.48).margin(1e-12));

  REQUIRE_THROWS_AS(flat_torus_energy_closed_form(0.0), InvalidInputError);
  REQUIRE_THROWS_AS(flat_torus_energy_closed_form(1.0), InvalidInputError);
  REQUIRE_THROWS_AS(flat_torus_energy_closed_form(-0.3), InvalidInputError);

  std::mt19937_64 g(42);
  std::uniform_real_distribution<double> ud(0.01, 0.99);
  for (int i = 0; i < 50; ++i) {
    double a = ud(g);
    double b = std::sqrt(1.0 - a * a);
    REQUIRE(flat_torus_energy_closed_form(a) ==
            Approx(flat_torus_energy_closed_form(b)).epsilon(1e-10));
  }

  // grid check: 2 pi^2 is the strict minimum, attained only at 1/sqrt(2)
  double root = std::sqrt(0.5);
  for (int i = 1; i < 10000; ++i) {
    double a = i / 10000.0;
    double w = flat_torus_energy_closed_form(a);
    REQUIRE(w >= kTwoPi2 - 1e-9);
    if (std::abs(a - root) >= 0.01) REQUIRE(w >= kTwoPi2 + 5e-3);
  }
}

TEST_CASE("closed form agrees with fine-mesh quadrature") {
  SurfaceMesh m = make_flat_torus(0.6, 256);
  REQUIRE(willmore_energy(m).willmore ==
          Approx(flat_torus_energy_closed_form(0.6)).epsilon(0.005));
}

TEST_CASE("conformal invariance residual vanishes and decays under refinement") {
  SurfaceMesh m128 = make_flat_torus(std::sqrt(0.5), 128);
  REQUIRE(conformal_invariance_residual(m128, ConformalParameter(Vec4::Zero())) ==
          0.0);

  ConformalParameter v(Vec4(0.5, 0, 0, 0));
  double r128 = conformal_invariance_residual(m128, v);
  REQUIRE(r128 <= 0.01 * kTwoPi2);

  SurfaceMesh m256 = make_flat_torus(std::sqrt(0.5), 256);
  double r256 = conformal_invariance_residual(m256, v);
  REQUIRE(r256 <= 0.5 * r128);
}

TEST_CASE("parametric descent finds the square flat torus") {
  OptimizerConfig cfg;
  cfg.step = 5e-3;
  cfg.max_iters = 200;
  cfg.grad_tol = 0.05;
  cfg.mode = OptimizerConfig::Mode::parametric;

  OptimizeResult res = optimize_willmore(flat_torus_family(48), 0.3, cfg);
  REQUIRE(res.parameter == Approx(std::sqrt(0.5)).margin(1e-3));
  REQUIRE(res.trajectory.back().willmore == Approx(kTwoPi2).epsilon(0.005));
  for (std::size_t i = 1; i < res.trajectory.size(); ++i)
    REQUIRE(res.trajectory[i].willmore <=
            res.trajectory[i - 1].willmore + 1e-12);
  REQUIRE(res.grad_norms.back() <= cfg.grad_tol);
}

TEST_CASE("parametric descent recovers the conformally square revolution torus") {
  OptimizerConfig cfg;
  cfg.step = 5e-3;
  cfg.max_iters = 300;
  cfg.grad_tol = 0.05;
  cfg.mode = OptimizerConfig::Mode::parametric;

  OptimizeResult res = optimize_willmore(revolution_torus_family(1.0, 96), 3.0, cfg);
  REQUIRE(res.parameter == Approx(std::sqrt(2.0)).margin(5e-3));
  REQUIRE(res.trajectory.back().willmore == Approx(kTwoPi2).epsilon(0.01));
  for (std::size_t i = 1; i < res.trajectory.size(); ++i)
    REQUIRE(res.trajectory[i].willmore <=
            res.trajectory[i - 1].willmore + 1e-12);
}

TEST_CASE("mesh descent smooths a perturbed Clifford torus back to 2 pi^2") {
  SurfaceMesh m = make_flat_torus(std::sqrt(0.5), 48);
  std::mt19937_64 g(20240817);
  std::uniform_real_distribution<double> ud(-0.01, 0.01);
  for (std::size_t i = 0; i < m.size(); ++i) {
    double d = ud(g);
    m.vertices[i] = SpherePoint(std::cos(d) * Vec4(m.vertices[i]) +
                                std::sin(d) * m.normals[i]);
  }
  m.analytic_curvature = false;
  m.chart.reset();
  refresh_mesh_geometry(m);
  double start = willmore_energy(m).willmore;

  OptimizerConfig cfg;
  cfg.step = 1e-3;
  cfg.max_iters = 60;
  cfg.grad_tol = 1e-4;
  cfg.mode = OptimizerConfig::Mode::mesh;

  OptimizeResult res = optimize_willmore(m, cfg);
  double final = res.trajectory.back().willmore;
  REQUIRE(final < start);
  REQUIRE(final == Approx(kTwoPi2).epsilon(0.005));
  for (std::size_t i = 1; i < res.trajectory.size(); ++i)
    REQUIRE(res.trajectory[i].willmore <=
            res.trajectory[i - 1].willmore + 1e-12);
}

TEST_CASE("an absurd step size stalls the optimizer with its trajectory attached") {
  SurfaceMesh m = make_flat_torus(std::sqrt(0.5), 12);
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> ud(-0.01, 0.01);
  for (std::size_t i = 0; i < m.size(); ++i) {
    double d = ud(g);
    m.vertices[i] = SpherePoint(std::cos(d) * Vec4(m.vertices[i]) +
                                std::sin(d) * m.normals[i]);
  }
  m.analytic_curvature = false;
  m.chart.reset();
  refresh_mesh_geometry(m);

  // even after 30 halvings the line-search step is still macroscopic, so
  // every trial wrecks the mesh and no decrease is ever accepted
  OptimizerConfig cfg;
  cfg.step = 1e12;
  cfg.max_iters = 2;
  cfg.grad_tol = 1e-12;
  cfg.mode = OptimizerConfig::Mode::mesh;

  bool threw = false;
  try {
    optimize_willmore(m, cfg);
  } catch (const OptimizerStallError& e) {
    threw = true;
    REQUIRE(!e.trajectory.empty());
    REQUIRE(std::string(e.what()).find("stall") != std::string::npos);
  }
  REQUIRE(threw);
}

TEST_CASE("optimizer config validation") {
  SurfaceMesh m = make_flat_torus(0.5, 8);
  OptimizerConfig bad;
  bad.step = 0.0;
  bad.max_iters = 5;
  bad.grad_tol = 1e-3;
  bad.mode = OptimizerConfig::Mode::mesh;
  REQUIRE_THROWS_AS(optimize_willmore(m, bad), InvalidInputError);
  bad.step = 1e-3;
  bad.grad_tol = 0.0;
  REQUIRE_THROWS_AS(optimize_willmore(m, bad), InvalidInputError);
}

TEST_CASE("trajectory serializes to csv") {
  OptimizerConfig cfg;
  cfg.step = 5e-3;
  cfg.max_iters = 40;
  cfg.grad_tol = 0.5;
  cfg.mode = OptimizerConfig::Mode::parametric;
  OptimizeResult res = optimize_willmore(flat_torus_family(16), 0.45, cfg);

  std::ostringstream os;
  write_trajectory_csv(os, res);
  std::istringstream is(os.str());
  std::string line;
  REQUIRE(std::getline(is, line));
  REQUIRE(line == "iter,area,willmore,traceless_sq,max_H,grad_norm");
  std::size_t rows = 0;
  double prev_w = std::numeric_limits<double>::infinity();
  while (std::getline(is, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double it, area, wil, tr, mh, gn;
    REQUIRE((ls >> it >> area >> wil >> tr >> mh >> gn));
    REQUIRE(it == Approx(static_cast<double>(rows)));
    REQUIRE(wil <= prev_w + 1e-12);
    REQUIRE(wil >= area - 1e-12);
    REQUIRE(std::isfinite(gn));
    prev_w = wil;
    ++rows;
  }
  REQUIRE(rows == res.trajectory.size());
}
