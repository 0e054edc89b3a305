#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wlab/mesh_io.hpp"

using namespace wlab;
using Catch::Approx;

TEST_CASE("meshes round-trip through the text format") {
  auto m = make_flat_torus(0.6, 32);
  std::stringstream buf;
  write_s3mesh(buf, m);

  std::string header;
  std::getline(buf, header);
  REQUIRE(header == "S3MESH 1");
  buf.seekg(0);

  SurfaceMesh r = read_s3mesh(buf);
  REQUIRE(r.vertices.size() == m.vertices.size());
  REQUIRE(r.faces == m.faces);
  REQUIRE(r.genus == 1);
  for (size_t i = 0; i < m.vertices.size(); ++i) {
    REQUIRE((r.vertices[i].p() - m.vertices[i].p()).norm() <= 1e-14);
    REQUIRE((r.normals[i] - m.normals[i]).norm() <= 1e-12);
  }
  // areas recomputed on load
  REQUIRE(integrate(r, std::vector<double>(r.size(), 1.0)) ==
          Approx(mesh_area(m)).epsilon(1e-12));
  // loaded meshes carry estimated curvatures: near-minimal here
  REQUIRE(r.analytic_curvature == false);
  for (size_t i = 0; i < r.size(); ++i) {
    REQUIRE(r.k1[i] == Approx(0.8 / 0.6).margin(8e-2));
    REQUIRE(r.k2[i] == Approx(-0.6 / 0.8).margin(8e-2));
  }
  REQUIRE(r.a_star_ref.has_value());
}

TEST_CASE("written files preserve 17 significant digits") {
  auto m = make_geodesic_sphere(SpherePoint(Vec4(0.3, 0.3, 0.8, -0.4)),
                                0.8, 12);
  std::stringstream buf;
  write_s3mesh(buf, m);
  SurfaceMesh r = read_s3mesh(buf);
  for (size_t i = 0; i < m.size(); ++i)
    for (int k = 0; k < 4; ++k)
      REQUIRE(r.vertices[i].p()[k] ==
              Approx(m.vertices[i].p()[k]).margin(5e-16));
}

TEST_CASE("reader renormalizes off-sphere vertices and skew normals") {
  std::stringstream buf;
  buf << "S3MESH 1\n4 4 0\n";
  buf << "2 0 0 0\n0 1 0 0\n0 0 1 0\n-0.6 -0.6 -0.5 0.1\n";
  // first normal has a radial component that must be projected away
  buf << "0.1 1 0 0\n1 0 0 0\n1 0 0 0\n0 0 0 1\n";
  buf << "0 1 2\n0 2 3\n0 3 1\n1 3 2\n";
  SurfaceMesh r = read_s3mesh(buf, false);
  REQUIRE(r.vertices[0].p().norm() == Approx(1.0).margin(1e-12));
  REQUIRE(r.vertices[0].p()[0] == Approx(1.0).margin(1e-12));
  REQUIRE(std::abs(r.normals[0].dot(r.vertices[0].p())) <= 1e-12);
  REQUIRE(r.normals[0].norm() == Approx(1.0).margin(1e-12));
}

TEST_CASE("reader rejects malformed input") {
  auto feed = [](const std::string& s) {
    std::stringstream buf(s);
    return read_s3mesh(buf, false);
  };
  REQUIRE_THROWS_AS(feed("NOPE 1\n1 1 0\n"), InvalidInputError);
  REQUIRE_THROWS_AS(feed("S3MESH 2\n1 1 0\n"), InvalidInputError);
  REQUIRE_THROWS_AS(feed("S3MESH 1\n2 1\n"), InvalidInputError);
  // face index out of range
  REQUIRE_THROWS_AS(
      feed("S3MESH 1\n3 1 0\n1 0 0 0\n0 1 0 0\n0 0 1 0\n"
           "0 1 0 0\n1 0 0 0\n1 0 0 0\n0 1 7\n"),
      InvalidInputError);
  // truncated vertex block
  REQUIRE_THROWS_AS(feed("S3MESH 1\n2 1 0\n1 0 0 0\n"), InvalidInputError);
  // genus inconsistent with the face graph
  auto m = make_flat_torus(0.5, 8);
  std::stringstream buf;
  write_s3mesh(buf, m);
  std::string text = buf.str();
  text.replace(text.find("64 128 1"), 8, "64 128 0");
  std::stringstream bad(text);
  REQUIRE_THROWS_AS(read_s3mesh(bad, false), InvalidInputError);
}

TEST_CASE("file based round trip") {
  namespace fs = std::filesystem;
  auto m = make_revolution_torus(2.0, 0.9, 16);
  fs::path tmp = fs::temp_directory_path() / "wlab_io_test.s3m";
  write_s3mesh_file(tmp.string(), m);
  SurfaceMesh r = read_s3mesh_file(tmp.string(), false);
  REQUIRE(r.size() == m.size());
  REQUIRE(r.genus == 1);
  fs::remove(tmp);
}
