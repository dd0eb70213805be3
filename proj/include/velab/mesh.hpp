#pragma once

// Structured simplicial meshes: a radially graded triangulation of the unit
// disc, its extrusion to the unit cylinder {x^2 + y^2 < 1, 0 < z < 1}, and a
// Kuhn-split unit box. Ring i of the disc sits at radius (i/n_r)^grading and
// carries i * n_theta vertices, so cells stay well-shaped while the mesh
// refines toward the axis (where the example load behaves like 1/r).
//
// The disc triangulation and the prism-to-tetrahedron split are exactly
// invariant under rotation by 2 pi / n_theta. Several load checks rely on
// angular quadrature orbits cancelling to rounding (equilibration residuals,
// astatic-matrix entries), which only happens when the quadrature node set
// itself has that symmetry, so the split must not depend on global vertex
// numbering (which wraps around the seam).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "velab/tensor3.hpp"

namespace velab {

enum class Domain { Cylinder, Box, Disc };

struct Mesh {
  Domain domain = Domain::Box;
  int dim = 3;  // 3 => tetrahedra, 2 => triangles (z = 0 plane)
  std::vector<Vec3> vertices;
  std::vector<int> cells;  // connectivity, stride = dim + 1

  // Extrusion bookkeeping (cylinder only): vertex v of layer k is
  // v + k * layer_vertex_count, with layers at z = k / (layer_count - 1).
  int layer_vertex_count = 0;
  int layer_count = 0;

  // Disc/cylinder ring metadata for the base triangulation (index by the
  // base vertex id): ring number (0 = center), position within the ring and
  // ring vertex count. Used by the rotation-invariant prism split.
  std::vector<int> ring_of;
  std::vector<int> ring_pos;
  std::vector<int> ring_size;

  int cell_size() const { return dim + 1; }
  int n_cells() const { return static_cast<int>(cells.size()) / cell_size(); }
  const int* cell(int c) const { return cells.data() + static_cast<size_t>(c) * cell_size(); }
};

// Signed volume of a tetrahedron / area of a triangle (positive for the
// orientation stored in the mesh).
inline double cell_measure(const Mesh& mesh, int c) {
  const int* v = mesh.cell(c);
  if (mesh.dim == 3) {
    const Vec3 a = mesh.vertices[v[1]] - mesh.vertices[v[0]];
    const Vec3 b = mesh.vertices[v[2]] - mesh.vertices[v[0]];
    const Vec3 d = mesh.vertices[v[3]] - mesh.vertices[v[0]];
    return a.cross(b).dot(d) / 6.0;
  }
  const Vec3 a = mesh.vertices[v[1]] - mesh.vertices[v[0]];
  const Vec3 b = mesh.vertices[v[2]] - mesh.vertices[v[0]];
  return 0.5 * (a.x() * b.y() - a.y() * b.x());
}

inline double total_measure(const Mesh& mesh) {
  double vol = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) vol += cell_measure(mesh, c);
  return vol;
}

namespace detail {

// Triangulate the annulus between an inner ring (vertex ids `inner`, at
// angles `inner_angle`) and an outer ring, by walking both rings in angle and
// always advancing the side whose next boundary angle is smaller. Produces
// inner.size() + outer.size() triangles; ties advance the outer ring, so the
// pattern repeats identically in every sector of the common symmetry group.
inline void zigzag_merge(const std::vector<int>& inner, const std::vector<double>& inner_angle,
                         const std::vector<int>& outer, const std::vector<double>& outer_angle,
                         std::vector<int>& cells) {
  const size_t ni = inner.size(), no = outer.size();
  size_t i = 0, j = 0;
  while (i < ni || j < no) {
    const double next_inner =
        i < ni ? inner_angle[i] : std::numeric_limits<double>::infinity();
    const double next_outer =
        j < no ? outer_angle[j] : std::numeric_limits<double>::infinity();
    if (j < no && (next_outer <= next_inner + 1e-14 || i == ni)) {
      cells.push_back(outer[j]);
      cells.push_back(outer[(j + 1) % no]);
      cells.push_back(inner[i % ni]);
      ++j;
    } else {
      cells.push_back(inner[(i + 1) % ni]);
      cells.push_back(inner[i]);
      cells.push_back(outer[j % no]);
      ++i;
    }
  }
}

}  // namespace detail

// Radially graded triangulation of the unit disc. Ring i = 1..n_r sits at
// radius (i/n_r)^grading with i * n_theta equally spaced vertices; ring n_r
// lies on the unit circle.
inline Mesh build_disc_mesh(int n_r, int n_theta, double grading = 2.0) {
  if (n_r < 2 || n_theta < 2) {
    throw std::invalid_argument("build_disc_mesh: need n_r >= 2 and n_theta >= 2");
  }
  if (!(grading >= 1.0)) {
    throw std::invalid_argument("build_disc_mesh: grading exponent must be >= 1");
  }
  Mesh mesh;
  mesh.domain = Domain::Disc;
  mesh.dim = 2;
  mesh.vertices.push_back(Vec3::Zero());
  mesh.ring_of.push_back(0);
  mesh.ring_pos.push_back(0);
  mesh.ring_size.push_back(1);

  std::vector<std::vector<int>> ring_ids(n_r + 1);
  std::vector<std::vector<double>> ring_angles(n_r + 1);
  ring_ids[0] = {0};
  ring_angles[0] = {0.0};
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (int i = 1; i <= n_r; ++i) {
    const double r = std::pow(static_cast<double>(i) / n_r, grading);
    const int count = i * n_theta;
    for (int j = 0; j < count; ++j) {
      const double th = two_pi * j / count;
      ring_ids[i].push_back(static_cast<int>(mesh.vertices.size()));
      ring_angles[i].push_back(th);
      mesh.vertices.push_back(Vec3(r * std::cos(th), r * std::sin(th), 0.0));
      mesh.ring_of.push_back(i);
      mesh.ring_pos.push_back(j);
      mesh.ring_size.push_back(count);
    }
  }

  for (int j = 0; j < n_theta; ++j) {
    mesh.cells.push_back(0);
    mesh.cells.push_back(ring_ids[1][j]);
    mesh.cells.push_back(ring_ids[1][(j + 1) % n_theta]);
  }
  for (int i = 1; i < n_r; ++i) {
    detail::zigzag_merge(ring_ids[i], ring_angles[i], ring_ids[i + 1], ring_angles[i + 1],
                         mesh.cells);
  }

  for (int c = 0; c < mesh.n_cells(); ++c) {
    if (cell_measure(mesh, c) < 0.0) {
      std::swap(mesh.cells[3 * c + 1], mesh.cells[3 * c + 2]);
    }
    if (!(cell_measure(mesh, c) > 0.0)) {
      throw std::runtime_error("build_disc_mesh: degenerate cell produced");
    }
  }
  return mesh;
}

namespace detail {

// Rotation-invariant strict order on the vertices of one base triangle.
// Rings order before higher rings; within a ring only angularly adjacent
// pairs ever meet in a triangle, and the counterclockwise predecessor is
// smaller (wrap-aware). Shared edges therefore get the same orientation in
// both adjacent triangles, independently of where the seam sits.
inline bool base_vertex_less(const Mesh& disc, int u, int w) {
  if (disc.ring_of[u] != disc.ring_of[w]) return disc.ring_of[u] < disc.ring_of[w];
  const int m = disc.ring_size[u];
  return (disc.ring_pos[w] - disc.ring_pos[u] + m) % m == 1;
}

}  // namespace detail

// Extrude the graded disc triangulation to the unit cylinder with n_z layers
// of prisms, each split into 3 tetrahedra. The split diagonal on the quad
// face over base edge (u, w) with u < w (in the rotation-invariant order)
// always runs from bottom-u to top-w, so adjacent prisms conform and the
// whole decomposition inherits the disc's rotational symmetry.
inline Mesh build_cylinder_mesh(int n_r, int n_theta, int n_z, double grading = 2.0) {
  if (n_z < 2) throw std::invalid_argument("build_cylinder_mesh: need n_z >= 2");
  const Mesh disc = build_disc_mesh(n_r, n_theta, grading);

  Mesh mesh;
  mesh.domain = Domain::Cylinder;
  mesh.dim = 3;
  mesh.layer_vertex_count = static_cast<int>(disc.vertices.size());
  mesh.layer_count = n_z + 1;
  mesh.ring_of = disc.ring_of;
  mesh.ring_pos = disc.ring_pos;
  mesh.ring_size = disc.ring_size;
  mesh.vertices.reserve(disc.vertices.size() * static_cast<size_t>(n_z + 1));
  for (int k = 0; k <= n_z; ++k) {
    const double z = static_cast<double>(k) / n_z;
    for (const Vec3& v : disc.vertices) mesh.vertices.push_back(Vec3(v.x(), v.y(), z));
  }

  const int L = mesh.layer_vertex_count;
  for (int k = 0; k < n_z; ++k) {
    const int base = k * L;
    for (int c = 0; c < disc.n_cells(); ++c) {
      std::array<int, 3> t = {disc.cell(c)[0], disc.cell(c)[1], disc.cell(c)[2]};
      // Order the base triangle by the rotation-invariant comparator.
      if (detail::base_vertex_less(disc, t[1], t[0])) std::swap(t[0], t[1]);
      if (detail::base_vertex_less(disc, t[2], t[1])) std::swap(t[1], t[2]);
      if (detail::base_vertex_less(disc, t[1], t[0])) std::swap(t[0], t[1]);
      const int a = base + t[0], b = base + t[1], d = base + t[2];
      const int at = a + L, bt = b + L, dt = d + L;
      const std::array<std::array<int, 4>, 3> tets = {
          {{a, b, d, dt}, {a, b, dt, bt}, {a, bt, dt, at}}};
      for (const auto& tet : tets) {
        for (int v : tet) mesh.cells.push_back(v);
      }
    }
  }

  for (int c = 0; c < mesh.n_cells(); ++c) {
    if (cell_measure(mesh, c) < 0.0) {
      std::swap(mesh.cells[4 * c + 2], mesh.cells[4 * c + 3]);
    }
    if (!(cell_measure(mesh, c) > 0.0)) {
      throw std::runtime_error("build_cylinder_mesh: degenerate cell produced");
    }
  }
  return mesh;
}

// Unit box (0,1)^3 with n^3 cubes, each Kuhn-split into 6 tetrahedra.
inline Mesh build_box_mesh(int n) {
  if (n < 1) throw std::invalid_argument("build_box_mesh: need n >= 1");
  Mesh mesh;
  mesh.domain = Domain::Box;
  mesh.dim = 3;
  const int m = n + 1;
  auto vid = [m](int i, int j, int k) { return (k * m + j) * m + i; };
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i)
        mesh.vertices.push_back(Vec3(static_cast<double>(i) / n, static_cast<double>(j) / n,
                                     static_cast<double>(k) / n));

  // Kuhn triangulation: six tets per cube, all sharing the main diagonal.
  const std::array<std::array<int, 3>, 6> orders = {
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        for (const auto& ord : orders) {
          std::array<int, 3> p = {i, j, k};
          mesh.cells.push_back(vid(p[0], p[1], p[2]));
          for (int step : ord) {
            p[step] += 1;
            mesh.cells.push_back(vid(p[0], p[1], p[2]));
          }
        }
      }
    }
  }

  for (int c = 0; c < mesh.n_cells(); ++c) {
    if (cell_measure(mesh, c) < 0.0) {
      std::swap(mesh.cells[4 * c + 2], mesh.cells[4 * c + 3]);
    }
  }
  return mesh;
}

// Plain-text dump: vertex list then cell list, one entity per line.
inline void dump_mesh(const Mesh& mesh, std::ostream& out) {
  out << "vertices " << mesh.vertices.size() << "\n";
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  out << "cells " << mesh.n_cells() << " size " << mesh.cell_size() << "\n";
  for (int c = 0; c < mesh.n_cells(); ++c) {
    for (int i = 0; i < mesh.cell_size(); ++i) {
      out << mesh.cell(c)[i] << (i + 1 == mesh.cell_size() ? '\n' : ' ');
    }
  }
}

}  // namespace velab
