// Batch front end for the library: mesh generation, energy reports, bound
// sweeps, Gauss-map degrees, sphere-image audits, blow-up residuals, energy
// optimization, and grid-complex audits.  Every command emits one JSON
// document (stdout or --out) whose bytes depend only on the configuration
// and seed; --workers changes scheduling, never results.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wlab/cubical.hpp"
#include "wlab/family.hpp"
#include "wlab/mesh_io.hpp"
#include "wlab/sphere_images.hpp"
#include "wlab/willmore.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace wlab;

constexpr double kPi = 3.14159265358979323846;
constexpr double kInvSqrt2 = 0.70710678118654752440;

// All floating output carries 12 significant digits: round through the
// shortest decimal so the JSON serializer cannot print more.
double sig12(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

json vec_json(const Vec4& v) {
  return json::array({sig12(v[0]), sig12(v[1]), sig12(v[2]), sig12(v[3])});
}

struct CheckList {
  json records = json::array();
  bool all_pass = true;

  void add(const std::string& name, const std::string& tag, double value,
           double target, double tol, bool pass) {
    records.push_back({{"name", name},
                       {"tag", tag},
                       {"value", sig12(value)},
                       {"target", sig12(target)},
                       {"tol", sig12(tol)},
                       {"pass", pass}});
    all_pass = all_pass && pass;
  }

  // two-sided default: pass when |value - target| <= tol
  void add(const std::string& name, const std::string& tag, double value,
           double target, double tol) {
    add(name, tag, value, target, tol, std::abs(value - target) <= tol);
  }
};

int emit(json& doc, const CheckList& checks, const std::string& out_path,
         bool timestamp) {
  doc["checks"] = checks.records;
  doc["pass"] = checks.all_pass;
  if (timestamp) {
    char stamp[32];
    std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    doc["generated_at"] = stamp;
  }
  std::string text = doc.dump(2);
  text += '\n';
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw InvalidInputError("cannot open output file " + out_path);
    os << text;
  }
  return checks.all_pass ? 0 : 1;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out;
  out.reserve((std::size_t)n);
  if (n == 1) {
    out.push_back(0.5 * (lo + hi));
    return out;
  }
  for (int i = 0; i < n; ++i)
    out.push_back(lo + (hi - lo) * double(i) / double(n - 1));
  return out;
}

// per-axis values spanning [-vmax, vmax]; keep points inside the closed ball
std::vector<Vec4> build_v_grid(int per_axis, double vmax) {
  if (per_axis < 1) throw InvalidInputError("v-grid needs at least one point per axis");
  if (!(vmax >= 0.0 && vmax < 1.0))
    throw InvalidInputError("v-grid radius must lie in [0, 1)");
  std::vector<double> axis = linspace(-vmax, vmax, per_axis);
  if (per_axis == 1) axis = {0.0};
  std::vector<Vec4> grid;
  for (double a : axis)
    for (double b : axis)
      for (double c : axis)
        for (double d : axis) {
          Vec4 v(a, b, c, d);
          if (v.squaredNorm() <= vmax * vmax + 1e-12) grid.push_back(v);
        }
  return grid;
}

std::vector<Vec4> random_unit4(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vec4> out;
  out.reserve((std::size_t)n);
  while ((int)out.size() < n) {
    Vec4 w(g(rng), g(rng), g(rng), g(rng));
    if (w.norm() > 1e-9) out.push_back(w.normalized());
  }
  return out;
}

// ------------------------------------------------------------------ gen

int run_gen(const std::string& surface, int res, double a, double r, double R,
            const std::string& out_mesh, const std::string& out_json,
            bool timestamp) {
  if (out_mesh.empty()) throw InvalidInputError("gen: --out mesh path is required");
  SurfaceMesh mesh;
  json params;
  if (surface == "clifford") {
    mesh = make_flat_torus(kInvSqrt2, res);
    params["a"] = sig12(kInvSqrt2);
  } else if (surface == "flat") {
    mesh = make_flat_torus(a, res);
    params["a"] = sig12(a);
  } else if (surface == "gsphere") {
    mesh = make_geodesic_sphere(SpherePoint(Vec4(0, 0, 0, 1)), r, res);
    params["r"] = sig12(r);
    params["center"] = vec_json(Vec4(0, 0, 0, 1));
  } else if (surface == "revolution") {
    mesh = make_revolution_torus(R, r, res);
    params["R"] = sig12(R);
    params["r"] = sig12(r);
  } else {
    throw InvalidInputError("gen: unknown surface kind " + surface);
  }
  write_s3mesh_file(out_mesh, mesh);

  json doc;
  doc["command"] = "gen";
  doc["inputs"] = {{"surface", surface}, {"res", res}, {"params", params}};
  doc["results"] = {{"vertices", mesh.vertices.size()},
                    {"faces", mesh.faces.size()},
                    {"genus", mesh.genus},
                    {"mesh_file", out_mesh}};
  CheckList checks;
  return emit(doc, checks, out_json, timestamp);
}

// ---------------------------------------------------------------- energy

int run_energy(const std::string& in, std::optional<double> target, double tol,
               const std::string& out_json, bool timestamp) {
  SurfaceMesh mesh = read_s3mesh_file(in);
  EnergyReport e = willmore_energy(mesh);

  json doc;
  doc["command"] = "energy";
  doc["inputs"] = {{"in", in}, {"tol", sig12(tol)}};
  if (target) doc["inputs"]["target"] = sig12(*target);
  doc["results"] = {{"area", sig12(e.area)},
                    {"willmore", sig12(e.willmore)},
                    {"traceless_sq_integral", sig12(e.traceless_sq_integral)},
                    {"max_mean_curvature", sig12(e.max_H)},
                    {"genus", mesh.genus},
                    {"vertices", mesh.vertices.size()},
                    {"faces", mesh.faces.size()}};
  CheckList checks;
  if (target)
    checks.add("energy matches the requested target", "energy-target",
               e.willmore, *target, tol * std::abs(*target));
  return emit(doc, checks, out_json, timestamp);
}

// ----------------------------------------------------------------- sweep

int run_sweep(const std::string& in, int vgrid, double vmax, int tgrid,
              double tol_frac, const std::string& csv,
              const std::string& out_json, int workers, bool timestamp) {
  SurfaceMesh mesh = read_s3mesh_file(in);
  std::vector<Vec4> vs = build_v_grid(vgrid, vmax);
  std::vector<double> ts = linspace(-kPi, kPi, tgrid);
  double w = willmore_energy(mesh).willmore;
  RosReport rep = verify_ros_inequality(mesh, vs, ts, tol_frac * w, workers);

  if (!csv.empty()) {
    std::ofstream os(csv, std::ios::binary);
    if (!os) throw InvalidInputError("sweep: cannot open CSV file " + csv);
    write_ros_sweep_csv(os, rep);
  }

  json doc;
  doc["command"] = "sweep";
  doc["inputs"] = {{"in", in},          {"vgrid", vgrid},
                   {"vmax", sig12(vmax)}, {"v_points", vs.size()},
                   {"tgrid", tgrid},    {"tol", sig12(tol_frac)}};
  doc["results"] = {{"willmore", sig12(rep.willmore)},
                    {"traceless_sq_integral", sig12(rep.traceless_sq_integral)},
                    {"min_slack", sig12(rep.min_slack)},
                    {"argmin_v", vec_json(rep.argmin_v)},
                    {"argmin_t", sig12(rep.argmin_t)},
                    {"entries", rep.entries.size()}};
  if (!csv.empty()) doc["results"]["csv_file"] = csv;

  CheckList checks;
  checks.add("offset-area bound holds up to the slack tolerance", "ros-min-slack",
             rep.min_slack, 0.0, rep.tol, rep.min_slack >= -rep.tol);
  return emit(doc, checks, out_json, timestamp);
}

// ---------------------------------------------------------------- degree

int run_degree(const std::string& in, double eps, std::size_t samples,
               std::uint64_t seed, const std::string& out_json, int workers,
               bool timestamp) {
  SurfaceMesh mesh = read_s3mesh_file(in);
  if (eps <= 0.0) {
    Bvh bvh(mesh);
    eps = default_tube_epsilon(mesh, bvh);
  }
  double deg = degree_gauss_map(mesh, eps, samples, seed, workers);
  double quad = tube_degree_integral(mesh);
  int chi = 2 - 2 * mesh.genus;
  double closed = -kPi * kPi * chi;

  json doc;
  doc["command"] = "degree";
  doc["inputs"] = {{"in", in},
                   {"eps", sig12(eps)},
                   {"samples", samples},
                   {"seed", seed}};
  doc["results"] = {{"degree", sig12(deg)},
                    {"tube_integral", sig12(quad)},
                    {"tube_integral_target", sig12(closed)},
                    {"genus", mesh.genus},
                    {"euler_characteristic", chi}};
  CheckList checks;
  checks.add("Gauss-map degree equals the genus", "gauss-map-degree", deg,
             double(mesh.genus), 0.05);
  checks.add("tube quadrature matches the Gauss-Bonnet value",
             "tube-integral-euler", quad, closed,
             0.01 * std::max(1.0, std::abs(closed)));
  return emit(doc, checks, out_json, timestamp);
}

// ----------------------------------------------------------- sphere-check

SpherePoint cap_point(const SpherePoint& u, double rho, const Vec4& w) {
  Vec4 t = w - w.dot(Vec4(u)) * Vec4(u);
  if (t.norm() < 1e-12) throw InvalidInputError("cap boundary direction degenerate");
  t.normalize();
  return SpherePoint(std::cos(rho) * Vec4(u) + std::sin(rho) * t);
}

int run_sphere_check(int pairs, int dirs, std::uint64_t seed,
                     const std::string& out_json, bool timestamp) {
  if (pairs < 1 || dirs < 1)
    throw InvalidInputError("sphere-check: need positive pair and direction counts");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> vmag(0.0, 0.85);
  std::uniform_real_distribution<double> rad(0.3, kPi / 2 - 0.1);

  double max_boundary = 0.0, max_roundtrip = 0.0, max_composition = 0.0;
  for (int k = 0; k < pairs; ++k) {
    std::vector<Vec4> w = random_unit4(dirs + 3, rng);
    ConformalParameter v(vmag(rng) * w[0]);
    SpherePoint u(w[1]);
    double rho = rad(rng);
    double c = 1.0 - v.v().squaredNorm();

    GeodesicBall cap_img = image_of_cap(v, CapSpec{std::cos(rho) * Vec4(u)});
    SpherePoint hemi_axis(w[2]);
    GeodesicBall hemi_img = image_of_geodesic_ball(v, hemi_axis);

    for (int d = 0; d < dirs; ++d) {
      SpherePoint y = cap_point(u, rho, w[(std::size_t)(3 + d)]);
      double res = std::abs(
          geodesic_distance(apply_F(v, y), cap_img.center) - cap_img.radius);
      max_boundary = std::max(max_boundary, res);

      SpherePoint z = cap_point(hemi_axis, kPi / 2, w[(std::size_t)(3 + d)]);
      res = std::abs(
          geodesic_distance(apply_F(v, z), hemi_img.center) - hemi_img.radius);
      max_boundary = std::max(max_boundary, res);

      // factored map: translate, invert, translate, dilate
      Vec4 img = Vec4(y) - v.v();
      img = img / img.squaredNorm();
      img = img - v.v() / c;
      img = c * img;
      max_composition =
          std::max(max_composition, (img - Vec4(apply_F(v, y))).norm());
    }

    auto round = euclidean_to_geodesic_cap(EuclideanBall4{Vec4(u), chord_radius(rho)});
    if (!round) throw DegenerateImageError("sphere-check: round trip lost the cap");
    max_roundtrip = std::max(max_roundtrip, geodesic_distance(round->center, u));
    max_roundtrip = std::max(max_roundtrip, std::abs(round->radius - rho));
  }

  json doc;
  doc["command"] = "sphere-check";
  doc["inputs"] = {{"pairs", pairs}, {"dirs", dirs}, {"seed", seed}};
  doc["results"] = {{"max_boundary_residual", sig12(max_boundary)},
                    {"max_roundtrip_residual", sig12(max_roundtrip)},
                    {"max_composition_residual", sig12(max_composition)}};

  CheckList checks;
  checks.add("cap and hemisphere images reproduce boundary samples",
             "image-boundary-residual", max_boundary, 0.0, 1e-9);
  checks.add("cap data round-trips through euclidean form",
             "cap-roundtrip-residual", max_roundtrip, 0.0, 1e-12);
  checks.add("conformal map agrees with its inversion factorization",
             "map-factorization-residual", max_composition, 0.0, 1e-10);

  // shrinking-sphere deviation rates toward the boundary of the parameter ball
  SpherePoint p(Vec4(1, 0, 0, 0));
  Vec4 n(0, 1, 0, 0);
  std::vector<double> s_list = {0.1, 0.05, 0.025, 0.0125};
  json fits = json::array();
  for (double theta : {0.0, kPi / 4, -kPi / 4, kPi / 2 - 0.1, -(kPi / 2 - 0.1)}) {
    AsymptoticImageFit fit =
        asymptotic_image_bounds(p, n, theta, 0.2, s_list, 500, 500, seed);
    fits.push_back({{"theta", sig12(theta)},
                    {"exponent", sig12(fit.exponent)},
                    {"amplitude", sig12(fit.amplitude)},
                    {"exact", fit.exact},
                    {"final_deviation", sig12(fit.deviations.back())}});
    char name[96];
    std::snprintf(name, sizeof name,
                  "deviation shrinks at least like sqrt(s) at slope angle %.4g",
                  theta);
    checks.add(name, "image-deviation-rate", fit.exponent, 1.0,
               std::numeric_limits<double>::infinity(), fit.pass);
  }
  doc["results"]["rate_fits"] = fits;
  return emit(doc, checks, out_json, timestamp);
}

// ---------------------------------------------------------------- blowup

int run_blowup(const std::string& in, int vertex, const std::string& slope_text,
               double t, std::vector<double> s_list, std::size_t samples,
               std::uint64_t seed, double floor_mult, const std::string& csv,
               const std::string& out_json, int workers, bool timestamp) {
  SurfaceMesh mesh = read_s3mesh_file(in);
  if (vertex < 0 || (std::size_t)vertex >= mesh.size())
    throw InvalidInputError("blowup: vertex index out of range");
  double slope;
  if (slope_text == "inf" || slope_text == "+inf") {
    slope = std::numeric_limits<double>::infinity();
  } else if (slope_text == "-inf") {
    slope = -std::numeric_limits<double>::infinity();
  } else {
    char* end = nullptr;
    slope = std::strtod(slope_text.c_str(), &end);
    if (end == slope_text.c_str() || *end != '\0')
      throw InvalidInputError("blowup: cannot parse slope " + slope_text);
  }
  if (s_list.empty()) s_list = {0.1, 0.05, 0.02};

  BlowupApproach approach(mesh.vertices[(std::size_t)vertex],
                          mesh.normals[(std::size_t)vertex], slope, s_list);
  std::vector<double> residuals =
      blowup_residual(mesh, approach, t, samples, seed, workers);
  double noise_floor = kVolumeS3 / std::sqrt(double(samples));

  if (!csv.empty()) {
    std::ofstream os(csv, std::ios::binary);
    if (!os) throw InvalidInputError("blowup: cannot open CSV file " + csv);
    os << "s,residual\n";
    char buf[80];
    for (std::size_t i = 0; i < s_list.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", s_list[i], residuals[i]);
      os << buf;
    }
  }

  json doc;
  doc["command"] = "blowup";
  doc["inputs"] = {{"in", in},     {"vertex", vertex}, {"slope", slope_text},
                   {"t", sig12(t)}, {"samples", samples}, {"seed", seed},
                   {"floor_mult", sig12(floor_mult)}};
  json s_json = json::array(), r_json = json::array();
  for (double s : s_list) s_json.push_back(sig12(s));
  for (double r : residuals) r_json.push_back(sig12(r));
  doc["results"] = {{"s", s_json},
                    {"residuals", r_json},
                    {"noise_floor", sig12(noise_floor)}};
  if (!csv.empty()) doc["results"]["csv_file"] = csv;

  CheckList checks;
  double worst_increase = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < residuals.size(); ++i)
    worst_increase = std::max(worst_increase, residuals[i + 1] - residuals[i]);
  if (residuals.size() > 1)
    checks.add("residuals decrease along the approach", "blowup-monotone",
               worst_increase, 0.0, 1e-12, worst_increase <= 1e-12);
  checks.add("final residual sits at the sampling noise floor", "blowup-floor",
             residuals.back(), floor_mult * noise_floor, 0.0,
             residuals.back() <= floor_mult * noise_floor);
  return emit(doc, checks, out_json, timestamp);
}

// -------------------------------------------------------------- optimize

int run_optimize(const std::string& family, int res, int grid, double start,
                 double minor, double tol_closed, double tol_opt,
                 const std::string& csv, const std::string& out_json,
                 bool timestamp) {
  json doc;
  doc["command"] = "optimize";
  doc["inputs"] = {{"family", family},   {"res", res},
                   {"grid", grid},       {"start", sig12(start)},
                   {"tol_closed", sig12(tol_closed)}, {"tol_opt", sig12(tol_opt)}};
  CheckList checks;

  OptimizerConfig cfg;
  cfg.mode = OptimizerConfig::Mode::parametric;

  OptimizeResult opt;
  if (family == "flat") {
    // closed form against mesh quadrature across the landscape
    double worst_rel = 0.0;
    json landscape = json::array();
    for (double a : {0.4, 0.5, 0.6, kInvSqrt2, 0.75}) {
      double wm = willmore_energy(make_flat_torus(a, res)).willmore;
      double wc = flat_torus_energy_closed_form(a);
      worst_rel = std::max(worst_rel, std::abs(wm - wc) / wc);
      landscape.push_back(
          {{"a", sig12(a)}, {"mesh", sig12(wm)}, {"closed_form", sig12(wc)}});
    }
    checks.add("mesh energy matches the closed form across the landscape",
               "flat-landscape-closed-form", worst_rel, 0.0, tol_closed);

    // grid minimum of the closed form lands on the grid point nearest the
    // square torus
    if (grid < 2) throw InvalidInputError("optimize: grid needs at least two points");
    std::vector<double> as = linspace(0.05, 0.95, grid);
    std::size_t argmin = 0, nearest = 0;
    for (std::size_t i = 1; i < as.size(); ++i) {
      if (flat_torus_energy_closed_form(as[i]) <
          flat_torus_energy_closed_form(as[argmin]))
        argmin = i;
      if (std::abs(as[i] - kInvSqrt2) < std::abs(as[nearest] - kInvSqrt2))
        nearest = i;
    }
    checks.add("grid minimum sits at the grid point nearest the square torus",
               "flat-grid-argmin", as[argmin], as[nearest], 0.0,
               argmin == nearest);

    opt = optimize_willmore(flat_torus_family(res), start, cfg);
    checks.add("optimizer converges to the square torus", "flat-optimizer",
               opt.parameter, kInvSqrt2, tol_opt);
    doc["results"] = {{"landscape", landscape},
                      {"grid_argmin", sig12(as[argmin])},
                      {"optimum", sig12(opt.parameter)},
                      {"optimum_energy",
                       sig12(opt.trajectory.back().willmore)},
                      {"iterations", opt.trajectory.size()}};
  } else if (family == "revolution") {
    opt = optimize_willmore(revolution_torus_family(minor, res), start, cfg);
    double target = std::sqrt(2.0) * minor;
    checks.add("optimizer converges to the balanced revolution torus",
               "revolution-optimizer", opt.parameter, target, tol_opt);
    doc["inputs"]["minor"] = sig12(minor);
    doc["results"] = {{"optimum", sig12(opt.parameter)},
                      {"optimum_energy",
                       sig12(opt.trajectory.back().willmore)},
                      {"iterations", opt.trajectory.size()}};
  } else {
    throw InvalidInputError("optimize: unknown family " + family);
  }

  if (!csv.empty()) {
    std::ofstream os(csv, std::ios::binary);
    if (!os) throw InvalidInputError("optimize: cannot open CSV file " + csv);
    write_trajectory_csv(os, opt);
    doc["results"]["csv_file"] = csv;
  }
  return emit(doc, checks, out_json, timestamp);
}

// --------------------------------------------------------------- cubical

int run_cubical(const std::string& audit, std::uint64_t seed,
                const std::string& out_json, bool timestamp) {
  bool all = audit == "all";
  if (!all && audit != "boundary" && audit != "nearest" && audit != "fineness" &&
      audit != "restriction" && audit != "counts")
    throw InvalidInputError("cubical: unknown audit " + audit);

  json doc;
  doc["command"] = "cubical";
  doc["inputs"] = {{"audit", audit}, {"seed", seed}};
  doc["results"] = json::object();
  CheckList checks;

  if (all || audit == "counts") {
    long long bad = 0;
    for (int n = 1; n <= 4; ++n)
      for (int j = 0; j <= 2; ++j)
        for (int p = 0; p <= n; ++p) {
          long long binom = 1;
          for (int i = 0; i < p; ++i) binom = binom * (n - i) / (i + 1);
          long long cells = binom;
          for (int i = 0; i < j * p; ++i) cells *= 3;
          long long per = 1;
          for (int i = 0; i < j; ++i) per *= 3;
          for (int i = 0; i < n - p; ++i) cells *= per + 1;
          if ((long long)enumerate_cells(n, j, p).size() != cells) ++bad;
        }
    checks.add("cell counts match the closed form", "cell-count-formula",
               double(bad), 0.0, 0.0, bad == 0);
  }

  if (all || audit == "boundary") {
    long long bad = 0;
    for (int n = 1; n <= 3; ++n)
      for (int p = 0; p <= n; ++p)
        for (const Cell& c : enumerate_cells(n, 1, p))
          if (!boundary(boundary(Chain::single(c))).terms.empty()) ++bad;
    checks.add("boundary of boundary vanishes on every low grid cell",
               "chain-complex-identity", double(bad), 0.0, 0.0, bad == 0);
  }

  if (all || audit == "nearest") {
    long long bad = 0;
    for (int cx = 0; cx <= 9; ++cx)
      for (int cy = 0; cy <= 9; ++cy) {
        GridVertex v(2, 2, {cx, cy});
        GridVertex direct = nearest_map(v, 0);
        GridVertex stepped = nearest_map(nearest_map(v, 1), 0);
        if (direct.coords != stepped.coords) ++bad;
        GridVertex once = nearest_map(v, 1);
        if (nearest_map(once, 1).coords != once.coords) ++bad;
      }
    checks.add("level rounding composes across levels", "nearest-composition",
               double(bad), 0.0, 0.0, bad == 0);
  }

  if (all || audit == "fineness") {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    auto absdiff = [](double a, double b) { return std::abs(a - b); };
    long long bad = 0;
    for (int trial = 0; trial < 200; ++trial) {
      DiscreteMap<double> phi{2, 1, {}};
      for (std::size_t k = 0; k < vertex_count(2, 1); ++k)
        phi.values.push_back(val(rng));
      if (fineness(phi, absdiff) != fineness_brute(phi, absdiff)) ++bad;
    }
    checks.add("adjacent-pair fineness equals all-pair fineness",
               "fineness-adjacency", double(bad), 0.0, 0.0, bad == 0);
  }

  if (all || audit == "restriction") {
    json maps = json::array();
    for (auto [m, j] : {std::pair<int, int>{1, 1}, {2, 1}, {1, 2}}) {
      RestrictionMap r = make_restriction_map(m, j);
      long long side = detail::pow3ll(j + r.q);
      long long bad_boundary = 0, bad_adjacent = 0;

      std::vector<GridVertex> images;
      std::size_t total = vertex_count(m, j + r.q);
      images.reserve(total);
      for (std::size_t rank = 0; rank < total; ++rank) {
        GridVertex x = vertex_at(m, j + r.q, rank);
        GridVertex y = r(x);
        bool on_boundary = false;
        for (int a = 0; a < m; ++a)
          on_boundary =
              on_boundary || x.coords[a] == 0 || x.coords[a] == (int)side;
        if (on_boundary) {
          GridVertex want = nearest_map(x, j);
          bool ok = y.coords[(std::size_t)m] == 0;
          for (int a = 0; a < m; ++a) ok = ok && y.coords[a] == want.coords[a];
          if (!ok) ++bad_boundary;
        }
        images.push_back(std::move(y));
      }
      std::size_t per = (std::size_t)(side + 1);
      std::vector<std::size_t> stride((std::size_t)m, 1);
      for (int a = m - 2; a >= 0; --a) stride[(std::size_t)a] = stride[(std::size_t)a + 1] * per;
      for (std::size_t rank = 0; rank < total; ++rank) {
        GridVertex x = vertex_at(m, j + r.q, rank);
        for (int a = 0; a < m; ++a) {
          if (x.coords[a] == (int)side) continue;
          if (vertex_distance(images[rank], images[rank + stride[(std::size_t)a]]) > m)
            ++bad_adjacent;
        }
      }
      maps.push_back({{"m", m},
                      {"j", j},
                      {"q", r.q},
                      {"lipschitz", sig12(r.lipschitz)},
                      {"vertices", total}});
      char name[96];
      std::snprintf(name, sizeof name,
                    "restriction keeps adjacency within distance %d at (m=%d, j=%d)",
                    m, m, j);
      checks.add(name, "restriction-adjacency", double(bad_adjacent), 0.0, 0.0,
                 bad_adjacent == 0);
      std::snprintf(name, sizeof name,
                    "restriction pins boundary vertices at (m=%d, j=%d)", m, j);
      checks.add(name, "restriction-boundary", double(bad_boundary), 0.0, 0.0,
                 bad_boundary == 0);
    }
    doc["results"]["restriction_maps"] = maps;
  }

  return emit(doc, checks, out_json, timestamp);
}

std::string classify_error(const std::exception& e) {
  if (dynamic_cast<const SelfIntersectingInputError*>(&e)) return "self-intersecting-input";
  if (dynamic_cast<const InvalidInputError*>(&e)) return "invalid-input";
  if (dynamic_cast<const PoleError*>(&e)) return "pole";
  if (dynamic_cast<const OutOfTubeError*>(&e)) return "out-of-tube";
  if (dynamic_cast<const UnderDeterminedFitError*>(&e)) return "under-determined-fit";
  if (dynamic_cast<const DegenerateImageError*>(&e)) return "degenerate-image";
  if (dynamic_cast<const InconsistentCurvatureError*>(&e)) return "inconsistent-curvature";
  if (dynamic_cast<const OptimizerStallError*>(&e)) return "optimizer-stall";
  return "runtime-error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"willmore-lab batch tool"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key-value config file; command-line flags win");

  bool timestamp = false;
  app.add_flag("--timestamp", timestamp,
               "add a generated_at field (the only run-dependent output)");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a mesh file");
  std::string gen_surface = "clifford", gen_out, gen_json;
  int gen_res = 128;
  double gen_a = kInvSqrt2, gen_r = 1.0, gen_R = 2.0;
  gen->add_option("--surface", gen_surface, "clifford | flat | gsphere | revolution");
  gen->add_option("--res", gen_res, "grid resolution");
  gen->add_option("--a", gen_a, "flat torus first radius");
  gen->add_option("--r", gen_r, "sphere radius / revolution minor radius");
  gen->add_option("--R", gen_R, "revolution major radius");
  gen->add_option("--out", gen_out, "mesh output path")->required();
  gen->add_option("--json", gen_json, "JSON summary path (default stdout)");

  // energy
  auto* energy = app.add_subcommand("energy", "area and bending energy of a mesh");
  std::string en_in, en_json;
  double en_tol = 0.005;
  std::optional<double> en_target;
  double en_target_raw = std::numeric_limits<double>::quiet_NaN();
  energy->add_option("--in", en_in, "mesh file")->required();
  energy->add_option("--target", en_target_raw, "expected energy for a pass/fail check");
  energy->add_option("--tol", en_tol, "relative tolerance for the target check");
  energy->add_option("--out", en_json, "JSON output path (default stdout)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "offset-area bound over a (v,t) grid");
  std::string sw_in, sw_csv, sw_json;
  int sw_vgrid = 3, sw_tgrid = 17, sw_workers = 0;
  double sw_vmax = 0.5, sw_tol = 0.01;
  sweep->add_option("--in", sw_in, "mesh file")->required();
  sweep->add_option("--vgrid", sw_vgrid, "points per parameter axis");
  sweep->add_option("--vmax", sw_vmax, "parameter ball radius");
  sweep->add_option("--tgrid", sw_tgrid, "offset samples across [-pi, pi]");
  sweep->add_option("--tol", sw_tol, "slack tolerance as a fraction of the energy");
  sweep->add_option("--csv", sw_csv, "per-point CSV output path");
  sweep->add_option("--out", sw_json, "JSON output path (default stdout)");
  sweep->add_option("--workers", sw_workers, "worker threads (0 = machine)");

  // degree
  auto* degree = app.add_subcommand("degree", "degree of the extended Gauss map");
  std::string dg_in, dg_json;
  double dg_eps = -1.0;
  std::size_t dg_samples = 200000;
  std::uint64_t dg_seed = kDefaultMcSeed;
  int dg_workers = 0;
  degree->add_option("--in", dg_in, "mesh file")->required();
  degree->add_option("--eps", dg_eps, "tube half-width (default: derived from the mesh)");
  degree->add_option("--samples", dg_samples, "volume samples");
  degree->add_option("--seed", dg_seed, "sampling seed");
  degree->add_option("--out", dg_json, "JSON output path (default stdout)");
  degree->add_option("--workers", dg_workers, "worker threads (0 = machine)");

  // sphere-check
  auto* sphere = app.add_subcommand("sphere-check",
                                    "sphere-image identities and shrink rates");
  int sc_pairs = 100, sc_dirs = 5;
  std::uint64_t sc_seed = kDefaultMcSeed;
  std::string sc_json;
  sphere->add_option("--pairs", sc_pairs, "random parameter/cap pairs");
  sphere->add_option("--dirs", sc_dirs, "boundary sample directions per pair");
  sphere->add_option("--seed", sc_seed, "sampling seed");
  sphere->add_option("--out", sc_json, "JSON output path (default stdout)");

  // blowup
  auto* blowup = app.add_subcommand("blowup",
                                    "volume residual along a boundary approach");
  std::string bl_in, bl_slope = "1", bl_csv, bl_json;
  int bl_vertex = 0, bl_workers = 0;
  double bl_t = 0.3, bl_floor_mult = 3.0;
  std::vector<double> bl_slist;
  std::size_t bl_samples = 200000;
  std::uint64_t bl_seed = kDefaultMcSeed;
  blowup->add_option("--in", bl_in, "mesh file")->required();
  blowup->add_option("--vertex", bl_vertex, "surface vertex fixing the approach point");
  blowup->add_option("--slope", bl_slope, "approach slope (number, inf, or -inf)");
  blowup->add_option("--t", bl_t, "offset of the compared region");
  blowup->add_option("--slist", bl_slist, "decreasing approach scales")
      ->delimiter(',');
  blowup->add_option("--samples", bl_samples, "volume samples per scale");
  blowup->add_option("--seed", bl_seed, "sampling seed");
  blowup->add_option("--floor-mult", bl_floor_mult, "pass threshold in noise floors");
  blowup->add_option("--csv", bl_csv, "scale/residual CSV output path");
  blowup->add_option("--out", bl_json, "JSON output path (default stdout)");
  blowup->add_option("--workers", bl_workers, "worker threads (0 = machine)");

  // optimize
  auto* optimize = app.add_subcommand("optimize", "energy descent over torus families");
  std::string op_family = "flat", op_csv, op_json;
  int op_res = 64, op_grid = 10000;
  double op_start = 0.4, op_minor = 1.0, op_tol_closed = 0.005, op_tol_opt = 1e-3;
  optimize->add_option("--family", op_family, "flat | revolution");
  optimize->add_option("--res", op_res, "mesh resolution for energies");
  optimize->add_option("--grid", op_grid, "landscape grid size");
  optimize->add_option("--start", op_start, "starting parameter");
  optimize->add_option("--minor", op_minor, "revolution minor radius");
  optimize->add_option("--tol-closed", op_tol_closed, "closed-form match tolerance");
  optimize->add_option("--tol-opt", op_tol_opt, "optimizer convergence tolerance");
  optimize->add_option("--csv", op_csv, "trajectory CSV output path");
  optimize->add_option("--out", op_json, "JSON output path (default stdout)");

  // cubical
  auto* cubical = app.add_subcommand("cubical", "grid-complex identity audits");
  std::string cu_audit = "all", cu_json;
  std::uint64_t cu_seed = kDefaultMcSeed;
  cubical->add_option("--audit", cu_audit,
                      "all | counts | boundary | nearest | fineness | restriction");
  cubical->add_option("--seed", cu_seed, "seed for the random-map audit");
  cubical->add_option("--out", cu_json, "JSON output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen)
      return run_gen(gen_surface, gen_res, gen_a, gen_r, gen_R, gen_out,
                     gen_json, timestamp);
    if (*energy) {
      if (!std::isnan(en_target_raw)) en_target = en_target_raw;
      return run_energy(en_in, en_target, en_tol, en_json, timestamp);
    }
    if (*sweep)
      return run_sweep(sw_in, sw_vgrid, sw_vmax, sw_tgrid, sw_tol, sw_csv,
                       sw_json, resolve_workers(sw_workers > 0
                                                    ? std::optional<int>(sw_workers)
                                                    : std::nullopt),
                       timestamp);
    if (*degree)
      return run_degree(dg_in, dg_eps, dg_samples, dg_seed, dg_json,
                        resolve_workers(dg_workers > 0
                                            ? std::optional<int>(dg_workers)
                                            : std::nullopt),
                        timestamp);
    if (*sphere)
      return run_sphere_check(sc_pairs, sc_dirs, sc_seed, sc_json, timestamp);
    if (*blowup)
      return run_blowup(bl_in, bl_vertex, bl_slope, bl_t, bl_slist, bl_samples,
                        bl_seed, bl_floor_mult, bl_csv, bl_json,
                        resolve_workers(bl_workers > 0
                                            ? std::optional<int>(bl_workers)
                                            : std::nullopt),
                        timestamp);
    if (*optimize)
      return run_optimize(op_family, op_res, op_grid, op_start, op_minor,
                          op_tol_closed, op_tol_opt, op_csv, op_json, timestamp);
    if (*cubical) return run_cubical(cu_audit, cu_seed, cu_json, timestamp);
  } catch (const std::exception& e) {
    json err;
    err["error"] = {{"type", classify_error(e)}, {"message", e.what()}};
    std::string text = err.dump(2);
    text += '\n';
    std::fputs(text.c_str(), stdout);
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
