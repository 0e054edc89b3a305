#pragma once

// Cubical grid complexes on [0,1]^n at mesh 3^-j: cells, signed boundary,
// the grid metric, level-change rounding maps, map fineness, and the
// boundary-restriction map built from an open-box unfolding of the cube.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wlab/errors.hpp"

namespace wlab {

namespace detail {

inline long long pow3ll(int e) {
  long long r = 1;
  while (e-- > 0) r *= 3;
  return r;
}

inline void check_grid_shape(int n, int j, const char* who) {
  if (n < 1 || n > 16) throw InvalidInputError(std::string(who) + ": dimension out of range");
  if (j < 0 || j > 18) throw InvalidInputError(std::string(who) + ": level out of range");
}

}  // namespace detail

// Vertex of the level-j grid on [0,1]^n, stored as integer coordinates
// in [0, 3^j]; the embedded point is coords / 3^j.
struct GridVertex {
  int n = 0;
  int j = 0;
  std::vector<int> coords;

  GridVertex(int n_, int j_, std::vector<int> coords_)
      : n(n_), j(j_), coords(std::move(coords_)) {
    detail::check_grid_shape(n, j, "GridVertex");
    if ((int)coords.size() != n)
      throw InvalidInputError("GridVertex: coordinate count mismatch");
    long long side = detail::pow3ll(j);
    for (int c : coords)
      if (c < 0 || c > side) throw InvalidInputError("GridVertex: coordinate out of range");
  }
};

// Grid metric: 3^j times the L1 distance of the embedded points, always an
// integer; adjacent vertices are exactly the pairs at distance one.
inline long long vertex_distance(const GridVertex& x, const GridVertex& y) {
  if (x.n != y.n || x.j != y.j)
    throw InvalidInputError("vertex_distance: vertices live on different grids");
  long long d = 0;
  for (int a = 0; a < x.n; ++a) d += std::abs((long long)x.coords[a] - y.coords[a]);
  return d;
}

// One tensor factor of a cell: either the vertex [lo] or the unit-step
// interval [lo, lo+1] of the level-j subdivision.
struct CellAxis {
  int lo = 0;
  bool interval = false;

  static CellAxis vertex(int k) { return {k, false}; }
  static CellAxis span(int lo) { return {lo, true}; }

  friend bool operator==(const CellAxis& a, const CellAxis& b) {
    return a.lo == b.lo && a.interval == b.interval;
  }
  friend bool operator<(const CellAxis& a, const CellAxis& b) {
    if (a.interval != b.interval) return a.interval < b.interval;
    return a.lo < b.lo;
  }
};

// Product cell of the level-j grid complex on [0,1]^n; its dimension is the
// number of interval factors.
struct Cell {
  int n = 0;
  int j = 0;
  std::vector<CellAxis> axes;

  Cell(int n_, int j_, std::vector<CellAxis> axes_)
      : n(n_), j(j_), axes(std::move(axes_)) {
    detail::check_grid_shape(n, j, "Cell");
    if ((int)axes.size() != n) throw InvalidInputError("Cell: axis count mismatch");
    long long side = detail::pow3ll(j);
    for (const CellAxis& ax : axes) {
      long long hi = ax.interval ? side - 1 : side;
      if (ax.lo < 0 || ax.lo > hi) throw InvalidInputError("Cell: axis out of range");
    }
  }

  int dim() const {
    int p = 0;
    for (const CellAxis& ax : axes) p += ax.interval ? 1 : 0;
    return p;
  }

  friend bool operator==(const Cell& a, const Cell& b) {
    return a.n == b.n && a.j == b.j && a.axes == b.axes;
  }
  friend bool operator<(const Cell& a, const Cell& b) {
    if (a.n != b.n) return a.n < b.n;
    if (a.j != b.j) return a.j < b.j;
    return a.axes < b.axes;
  }
};

// Integer combination of cells of one fixed dimension, stored sparsely in
// canonical cell order so equality of chains is structural.
struct Chain {
  int n = 0;
  int j = 0;
  int dim = 0;
  std::map<Cell, long long> terms;

  Chain(int n_, int j_, int dim_) : n(n_), j(j_), dim(dim_) {
    detail::check_grid_shape(n, j, "Chain");
    if (dim < -1 || dim > n) throw InvalidInputError("Chain: dimension out of range");
  }

  static Chain single(const Cell& c, long long coeff = 1) {
    Chain ch(c.n, c.j, c.dim());
    ch.add(c, coeff);
    return ch;
  }

  void add(const Cell& c, long long coeff) {
    if (c.n != n || c.j != j) throw InvalidInputError("Chain::add: wrong grid");
    if (c.dim() != dim) throw InvalidInputError("Chain::add: wrong cell dimension");
    if (coeff == 0) return;
    long long& slot = terms[c];
    slot += coeff;
    if (slot == 0) terms.erase(c);
  }
};

// Boundary homomorphism: each interval factor is replaced by its endpoint
// difference, weighted by the parity of the interval factors before it.
// Applying it twice gives zero.
inline Chain boundary(const Chain& ch) {
  Chain out(ch.n, ch.j, ch.dim > 0 ? ch.dim - 1 : -1);
  if (ch.dim <= 0) return out;
  for (const auto& [cell, coeff] : ch.terms) {
    int sigma = 0;
    for (int a = 0; a < cell.n; ++a) {
      if (!cell.axes[a].interval) continue;
      long long sign = (sigma % 2 == 0) ? 1 : -1;
      Cell upper = cell;
      upper.axes[a] = CellAxis::vertex(cell.axes[a].lo + 1);
      Cell lower = cell;
      lower.axes[a] = CellAxis::vertex(cell.axes[a].lo);
      out.add(upper, sign * coeff);
      out.add(lower, -sign * coeff);
      ++sigma;
    }
  }
  return out;
}

// All p-cells of the level-j complex on [0,1]^n, in a fixed deterministic
// order; the count is C(n,p) 3^(jp) (3^j+1)^(n-p).
inline std::vector<Cell> enumerate_cells(int n, int j, int p) {
  detail::check_grid_shape(n, j, "enumerate_cells");
  if (p < 0 || p > n) throw InvalidInputError("enumerate_cells: bad cell dimension");
  long long side = detail::pow3ll(j);
  std::vector<Cell> out;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != p) continue;
    std::vector<int> radix((std::size_t)n, 0);
    while (true) {
      std::vector<CellAxis> axes;
      axes.reserve((std::size_t)n);
      for (int a = 0; a < n; ++a)
        axes.push_back((mask >> a) & 1u ? CellAxis::span(radix[(std::size_t)a])
                                        : CellAxis::vertex(radix[(std::size_t)a]));
      out.emplace_back(n, j, std::move(axes));
      int a = n - 1;
      while (a >= 0) {
        long long hi = ((mask >> a) & 1u) ? side - 1 : side;
        if (radix[(std::size_t)a] < hi) break;
        radix[(std::size_t)a--] = 0;
      }
      if (a < 0) break;
      ++radix[(std::size_t)a];
    }
  }
  return out;
}

// Rounds a vertex to the grid at another level. Refining embeds exactly;
// coarsening rounds each coordinate to the nearest multiple of the coarse
// step. Ties are impossible: an exact half step would force an even number
// to equal an odd multiple of a power of three.
inline GridVertex nearest_map(const GridVertex& x, int to_level) {
  if (to_level < 0 || to_level > 18) throw InvalidInputError("nearest_map: level out of range");
  std::vector<int> coords((std::size_t)x.n, 0);
  if (x.j <= to_level) {
    long long scale = detail::pow3ll(to_level - x.j);
    for (int a = 0; a < x.n; ++a) coords[(std::size_t)a] = (int)(x.coords[a] * scale);
  } else {
    long long step = detail::pow3ll(x.j - to_level);
    for (int a = 0; a < x.n; ++a)
      coords[(std::size_t)a] = (int)((2ll * x.coords[a] + step) / (2ll * step));
  }
  return GridVertex(x.n, to_level, std::move(coords));
}

inline std::size_t vertex_count(int n, int j) {
  detail::check_grid_shape(n, j, "vertex_count");
  std::size_t per = (std::size_t)(detail::pow3ll(j) + 1);
  std::size_t total = 1;
  for (int a = 0; a < n; ++a) total *= per;
  return total;
}

// Row-major rank of a vertex, first coordinate slowest.
inline std::size_t vertex_index(const GridVertex& x) {
  std::size_t per = (std::size_t)(detail::pow3ll(x.j) + 1);
  std::size_t rank = 0;
  for (int a = 0; a < x.n; ++a) rank = rank * per + (std::size_t)x.coords[a];
  return rank;
}

inline GridVertex vertex_at(int n, int j, std::size_t rank) {
  std::size_t per = (std::size_t)(detail::pow3ll(j) + 1);
  std::vector<int> coords((std::size_t)n, 0);
  for (int a = n - 1; a >= 0; --a) {
    coords[(std::size_t)a] = (int)(rank % per);
    rank /= per;
  }
  if (rank != 0) throw InvalidInputError("vertex_at: rank out of range");
  return GridVertex(n, j, std::move(coords));
}

// Map defined on the vertices of the level-j grid on [0,1]^n, with values in
// an arbitrary normed target; values are indexed by vertex rank.
template <class T>
struct DiscreteMap {
  int n = 0;
  int j = 0;
  std::vector<T> values;
};

namespace detail {

template <class T>
void check_map_shape(const DiscreteMap<T>& phi, const char* who) {
  check_grid_shape(phi.n, phi.j, who);
  if (phi.values.size() != vertex_count(phi.n, phi.j))
    throw InvalidInputError(std::string(who) + ": value count mismatch");
}

}  // namespace detail

// Fineness of a discrete map: the largest difference norm per unit of grid
// distance. The supremum over all pairs is attained on an adjacent pair,
// because a far pair splits along a geodesic path of adjacent steps; so the
// fast path scans axis neighbors only.
template <class T, class DiffNorm>
double fineness(const DiscreteMap<T>& phi, DiffNorm&& diff_norm) {
  detail::check_map_shape(phi, "fineness");
  std::size_t per = (std::size_t)(detail::pow3ll(phi.j) + 1);
  std::vector<std::size_t> stride((std::size_t)phi.n, 1);
  for (int a = phi.n - 2; a >= 0; --a)
    stride[(std::size_t)a] = stride[(std::size_t)a + 1] * per;
  double best = 0.0;
  std::vector<std::size_t> radix((std::size_t)phi.n, 0);
  std::size_t rank = 0;
  while (true) {
    for (int a = 0; a < phi.n; ++a)
      if (radix[(std::size_t)a] + 1 < per)
        best = std::max(best, (double)diff_norm(phi.values[rank],
                                                phi.values[rank + stride[(std::size_t)a]]));
    int a = phi.n - 1;
    while (a >= 0 && radix[(std::size_t)a] + 1 == per) radix[(std::size_t)a--] = 0;
    if (a < 0) break;
    ++radix[(std::size_t)a];
    ++rank;
  }
  return best;
}

// Reference evaluation of fineness over every distinct vertex pair;
// quadratic in the vertex count, intended for audits.
template <class T, class DiffNorm>
double fineness_brute(const DiscreteMap<T>& phi, DiffNorm&& diff_norm) {
  detail::check_map_shape(phi, "fineness_brute");
  std::size_t count = phi.values.size();
  double best = 0.0;
  for (std::size_t k = 0; k + 1 < count; ++k) {
    GridVertex x = vertex_at(phi.n, phi.j, k);
    for (std::size_t l = k + 1; l < count; ++l) {
      GridVertex y = vertex_at(phi.n, phi.j, l);
      double ratio = (double)diff_norm(phi.values[k], phi.values[l]) /
                     (double)vertex_distance(x, y);
      best = std::max(best, ratio);
    }
  }
  return best;
}

// Open-box unfolding of [0,1]^m onto the shell (boundary x [0,1]) union
// (top face at height one): radial projection from the point one unit below
// the cube center. Boundary points are fixed at height zero, the center
// lands mid-top, and the map is a Lipschitz homeomorphism onto the shell.
inline std::vector<double> unfold_to_box(int m, const std::vector<double>& x) {
  if (m < 1 || m > 15) throw InvalidInputError("unfold_to_box: dimension out of range");
  if ((int)x.size() != m) throw InvalidInputError("unfold_to_box: coordinate count mismatch");
  double umax = 0.0;
  for (double c : x) {
    if (!(c >= -1e-9 && c <= 1.0 + 1e-9))
      throw InvalidInputError("unfold_to_box: point outside the unit cube");
    umax = std::max(umax, std::abs(c - 0.5));
  }
  std::vector<double> out((std::size_t)m + 1, 0.0);
  if (umax >= 0.25) {
    // ray hits a side wall at height 1/(2 umax) - 1
    double lambda = 1.0 / (2.0 * umax);
    for (int a = 0; a < m; ++a) out[(std::size_t)a] = 0.5 + lambda * (x[(std::size_t)a] - 0.5);
    out[(std::size_t)m] = lambda - 1.0;
  } else {
    // ray exits through the top face
    for (int a = 0; a < m; ++a) out[(std::size_t)a] = 2.0 * x[(std::size_t)a] - 0.5;
    out[(std::size_t)m] = 1.0;
  }
  return out;
}

// Restriction map r: vertices of the level-(j+q) grid on [0,1]^m to vertices
// of the level-j shell complex on [0,1]^(m+1) (side walls plus top face).
// It composes the box unfolding with nearest-shell-vertex rounding; q is the
// smallest integer with 3^(q-2) at least 1.1 times the measured Lipschitz
// constant of the unfolding, so grid neighbors land at grid distance <= m
// and boundary vertices map to their level-j rounding at height zero.
struct RestrictionMap {
  int m = 0;
  int j = 0;
  int q = 0;
  double lipschitz = 0.0;

  GridVertex operator()(const GridVertex& x) const {
    if (x.n != m || x.j != j + q)
      throw InvalidInputError("RestrictionMap: input must be a level-(j+q) vertex of the cube");
    double scale = 1.0 / (double)detail::pow3ll(j + q);
    std::vector<double> point((std::size_t)m, 0.0);
    for (int a = 0; a < m; ++a) point[(std::size_t)a] = x.coords[a] * scale;
    std::vector<double> image = unfold_to_box(m, point);

    // nearest shell vertex; strict comparison keeps the first, hence
    // lexicographically least, candidate on ties
    double best = -1.0;
    std::size_t pick = 0;
    for (std::size_t k = 0; k < shell_points_.size(); ++k) {
      double d2 = 0.0;
      for (int a = 0; a <= m; ++a) {
        double diff = image[(std::size_t)a] - shell_points_[k][(std::size_t)a];
        d2 += diff * diff;
      }
      if (best < 0.0 || d2 < best) {
        best = d2;
        pick = k;
      }
    }
    return GridVertex(m + 1, j, shell_coords_[pick]);
  }

  friend RestrictionMap make_restriction_map(int m, int j);

 private:
  std::vector<std::vector<int>> shell_coords_;     // lexicographic order
  std::vector<std::vector<double>> shell_points_;  // embedded at mesh 3^-j
};

inline RestrictionMap make_restriction_map(int m, int j) {
  if (m < 1 || m > 4) throw InvalidInputError("make_restriction_map: dimension out of range");
  detail::check_grid_shape(m + 1, j, "make_restriction_map");

  // measure the unfolding's Lipschitz constant by axis and diagonal secants
  // on a dense grid
  int density = (m == 1) ? 4096 : (m == 2) ? 512 : 48;
  double h = 1.0 / density;
  double lip = 0.0;
  std::vector<int> radix((std::size_t)m, 0);
  while (true) {
    std::vector<double> base((std::size_t)m, 0.0);
    for (int a = 0; a < m; ++a) base[(std::size_t)a] = radix[(std::size_t)a] * h;
    std::vector<double> at = unfold_to_box(m, base);
    for (int dir = 0; dir <= m; ++dir) {
      // dir < m: one axis step; dir == m: main diagonal step
      std::vector<double> moved = base;
      bool inside = true;
      double step2 = 0.0;
      for (int a = 0; a < m; ++a) {
        if (a == dir || dir == m) {
          moved[(std::size_t)a] += h;
          step2 += h * h;
          inside = inside && moved[(std::size_t)a] <= 1.0 + 1e-12;
        }
      }
      if (!inside) continue;
      std::vector<double> to = unfold_to_box(m, moved);
      double d2 = 0.0;
      for (int a = 0; a <= m; ++a) {
        double diff = to[(std::size_t)a] - at[(std::size_t)a];
        d2 += diff * diff;
      }
      lip = std::max(lip, std::sqrt(d2 / step2));
    }
    int a = m - 1;
    while (a >= 0 && radix[(std::size_t)a] == density) radix[(std::size_t)a--] = 0;
    if (a < 0) break;
    ++radix[(std::size_t)a];
  }

  int q = 2;
  while (detail::pow3ll(q - 2) < 1.1 * lip) ++q;
  if (j + q > 18) throw InvalidInputError("make_restriction_map: refined level out of range");

  RestrictionMap r;
  r.m = m;
  r.j = j;
  r.q = q;
  r.lipschitz = lip;

  // shell vertices: top face, or any of the first m coordinates on the wall
  long long side = detail::pow3ll(j);
  double mesh = 1.0 / (double)side;
  for (std::size_t rank = 0; rank < vertex_count(m + 1, j); ++rank) {
    GridVertex v = vertex_at(m + 1, j, rank);
    bool on_top = v.coords[(std::size_t)m] == side;
    bool on_wall = false;
    for (int a = 0; a < m; ++a)
      on_wall = on_wall || v.coords[(std::size_t)a] == 0 || v.coords[(std::size_t)a] == side;
    if (!on_top && !on_wall) continue;
    std::vector<double> point((std::size_t)m + 1, 0.0);
    for (int a = 0; a <= m; ++a) point[(std::size_t)a] = v.coords[(std::size_t)a] * mesh;
    r.shell_coords_.push_back(v.coords);
    r.shell_points_.push_back(std::move(point));
  }
  return r;
}

}  // namespace wlab
