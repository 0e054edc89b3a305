#pragma once

// Bounding-volume tree over mesh triangles with R^4 axis-aligned boxes.
// Used for closest-point queries (tube coordinates, self-distance) and built
// once per mesh; queries are read-only and safe to run concurrently.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "wlab/errors.hpp"
#include "wlab/mesh.hpp"

namespace wlab {

struct ClosestHit {
  double dist2 = std::numeric_limits<double>::infinity();
  Vec4 point = Vec4::Zero();
  int face = -1;
  Eigen::Vector3d bary = Eigen::Vector3d::Zero();
};

namespace detail {

// Closest point on triangle abc to q (Ericson's region walk; only dot
// products, so it works unchanged in R^4).
inline Vec4 closest_point_triangle(const Vec4& q, const Vec4& a, const Vec4& b,
                                   const Vec4& c, Eigen::Vector3d* bary) {
  Vec4 ab = b - a, ac = c - a, aq = q - a;
  double d1 = ab.dot(aq), d2 = ac.dot(aq);
  if (d1 <= 0.0 && d2 <= 0.0) {
    *bary = {1, 0, 0};
    return a;
  }
  Vec4 bq = q - b;
  double d3 = ab.dot(bq), d4 = ac.dot(bq);
  if (d3 >= 0.0 && d4 <= d3) {
    *bary = {0, 1, 0};
    return b;
  }
  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    double t = d1 / (d1 - d3);
    *bary = {1.0 - t, t, 0};
    return a + t * ab;
  }
  Vec4 cq = q - c;
  double d5 = ab.dot(cq), d6 = ac.dot(cq);
  if (d6 >= 0.0 && d5 <= d6) {
    *bary = {0, 0, 1};
    return c;
  }
  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    double t = d2 / (d2 - d6);
    *bary = {1.0 - t, 0, t};
    return a + t * ac;
  }
  double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0) {
    double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    *bary = {0, 1.0 - t, t};
    return b + t * (c - b);
  }
  double denom = 1.0 / (va + vb + vc);
  double v = vb * denom, w = vc * denom;
  *bary = {1.0 - v - w, v, w};
  return a + v * ab + w * ac;
}

}  // namespace detail

class Bvh {
 public:
  Bvh() = default;

  explicit Bvh(const SurfaceMesh& m) {
    if (m.faces.empty()) throw InvalidInputError("Bvh: mesh has no faces");
    tris_.reserve(m.faces.size());
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
      const auto& fc = m.faces[f];
      tris_.push_back(Tri{Vec4(m.vertices[fc[0]]), Vec4(m.vertices[fc[1]]),
                          Vec4(m.vertices[fc[2]]), static_cast<int>(f)});
    }
    nodes_.reserve(2 * tris_.size() / kLeafSize + 2);
    build_range(0, static_cast<int>(tris_.size()));
  }

  bool empty() const { return nodes_.empty(); }

  // Visits every triangle whose box can meet the 2-plane {<p,z1> = <p,z2> = 0}
  // through the origin.  Any triangle whose radial cone meets a great circle
  // inside that plane also meets the plane itself, so this enumeration is a
  // safe superset for arc-crossing counts.  f receives (a, b, c, face).
  template <class F>
  void for_each_near_plane(const Vec4& z1, const Vec4& z2, F&& f) const {
    if (nodes_.empty()) return;
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& n = nodes_[stack[--top]];
      if (!box_meets_plane(n, z1) || !box_meets_plane(n, z2)) continue;
      if (n.left < 0) {
        for (int t = n.begin; t < n.end; ++t) {
          const Tri& tr = tris_[t];
          f(tr.a, tr.b, tr.c, tr.face);
        }
      } else {
        stack[top++] = n.right;
        stack[top++] = n.left;
      }
    }
  }

  ClosestHit closest(const Vec4& q) const {
    ClosestHit best;
    if (nodes_.empty()) return best;
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    Eigen::Vector3d bary;
    while (top > 0) {
      int ni = stack[--top];
      const Node& n = nodes_[ni];
      if (box_dist2(n, q) > best.dist2) continue;
      if (n.left < 0) {
        for (int t = n.begin; t < n.end; ++t) {
          const Tri& tr = tris_[t];
          Vec4 cp = detail::closest_point_triangle(q, tr.a, tr.b, tr.c, &bary);
          double d2 = (cp - q).squaredNorm();
          if (d2 < best.dist2 || (d2 == best.dist2 && tr.face < best.face)) {
            best = ClosestHit{d2, cp, tr.face, bary};
          }
        }
      } else {
        double dl = box_dist2(nodes_[n.left], q);
        double dr = box_dist2(nodes_[n.right], q);
        // push the farther child first so the nearer is explored next
        if (dl <= dr) {
          stack[top++] = n.right;
          stack[top++] = n.left;
        } else {
          stack[top++] = n.left;
          stack[top++] = n.right;
        }
      }
    }
    return best;
  }

 private:
  static constexpr int kLeafSize = 8;

  struct Tri {
    Vec4 a, b, c;
    int face;
    Vec4 centroid() const { return (a + b + c) / 3.0; }
  };
  struct Node {
    Vec4 lo, hi;
    std::int32_t left = -1, right = -1;
    std::int32_t begin = 0, end = 0;
  };

  // interval of <p, z> over the box straddles zero (with slack for ties)
  static bool box_meets_plane(const Node& n, const Vec4& z) {
    double center = 0.0, radius = 0.0;
    for (int k = 0; k < 4; ++k) {
      center += 0.5 * (n.lo[k] + n.hi[k]) * z[k];
      radius += 0.5 * (n.hi[k] - n.lo[k]) * std::abs(z[k]);
    }
    return std::abs(center) <= radius + 1e-12;
  }

  static double box_dist2(const Node& n, const Vec4& q) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) {
      double d = std::max({n.lo[k] - q[k], 0.0, q[k] - n.hi[k]});
      s += d * d;
    }
    return s;
  }

  int build_range(int begin, int end) {
    int idx = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Vec4 lo = Vec4::Constant(std::numeric_limits<double>::infinity());
    Vec4 hi = -lo;
    Vec4 clo = lo, chi = hi;
    for (int t = begin; t < end; ++t) {
      const Tri& tr = tris_[t];
      for (const Vec4* p : {&tr.a, &tr.b, &tr.c}) {
        lo = lo.cwiseMin(*p);
        hi = hi.cwiseMax(*p);
      }
      Vec4 c = tr.centroid();
      clo = clo.cwiseMin(c);
      chi = chi.cwiseMax(c);
    }
    nodes_[idx].lo = lo;
    nodes_[idx].hi = hi;
    if (end - begin <= kLeafSize) {
      nodes_[idx].begin = begin;
      nodes_[idx].end = end;
      return idx;
    }
    int axis = 0;
    (chi - clo).maxCoeff(&axis);
    int mid = (begin + end) / 2;
    std::nth_element(tris_.begin() + begin, tris_.begin() + mid,
                     tris_.begin() + end, [axis](const Tri& x, const Tri& y) {
                       double cx = x.centroid()[axis], cy = y.centroid()[axis];
                       if (cx != cy) return cx < cy;
                       return x.face < y.face;
                     });
    int l = build_range(begin, mid);
    int r = build_range(mid, end);
    nodes_[idx].left = l;
    nodes_[idx].right = r;
    return idx;
  }

  std::vector<Node> nodes_;
  std::vector<Tri> tris_;
};

}  // namespace wlab
