#pragma once

// First-order vector finite elements on the simplicial meshes: fields,
// quadrature, strain and curl functionals, body-force load pairing,
// equilibration checks, the discrete dual norm, and the Korn constant
// estimate on the zero-average-curl subspace.
//
// All reductions over cells are sequential in cell order, so every reported
// number is bit-for-bit reproducible for a given mesh and configuration.

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "velab/mesh.hpp"
#include "velab/tensor3.hpp"

namespace velab {

// Piecewise-linear vector field: one d-vector per vertex, vertex-major.
struct VectorField {
  const Mesh* mesh = nullptr;
  int components = 3;
  Eigen::VectorXd coeffs;

  static VectorField zero(const Mesh& mesh, int components = 3) {
    VectorField u;
    u.mesh = &mesh;
    u.components = components;
    u.coeffs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.vertices.size()) * components);
    return u;
  }

  // Interpolate a smooth field at the vertices.
  static VectorField interpolate(const Mesh& mesh, const std::function<Vec3(const Vec3&)>& f,
                                 int components = 3) {
    VectorField u = zero(mesh, components);
    for (size_t v = 0; v < mesh.vertices.size(); ++v) {
      const Vec3 val = f(mesh.vertices[v]);
      for (int k = 0; k < components; ++k) u.coeffs[v * components + k] = val(k);
    }
    return u;
  }

  Vec3 at_vertex(int v) const {
    Vec3 x = Vec3::Zero();
    for (int k = 0; k < components; ++k) x(k) = coeffs[static_cast<Eigen::Index>(v) * components + k];
    return x;
  }
};

// Quadrature rule on the reference simplex in barycentric coordinates.
struct QuadratureRule {
  int order = 0;
  std::vector<std::vector<double>> points;  // barycentric, size dim+1
  std::vector<double> weights;              // sum to 1 (fractions of the cell measure)
};

// Quadrature rules with strictly interior nodes (the example load is
// singular on the axis, so nodes must avoid r = 0; interior barycentric
// coordinates guarantee that on the graded mesh). Order 2 is the workhorse
// with positive weights; order 3 carries a negative centroid weight and is
// used only to estimate the order-2 rule's error. Exactness up to the
// declared order is verified on construction against the simplex moment
// formula int prod lambda_i^{k_i} = (prod k_i!) d! / (d + sum k_i)!.
inline QuadratureRule cell_rule(int dim, int order = 2) {
  QuadratureRule rule;
  rule.order = order;
  if (dim == 3 && order == 2) {
    const double a = 0.58541019662496845446;  // (5 + 3 sqrt 5) / 20
    const double b = 0.13819660112501051518;  // (5 - sqrt 5) / 20
    rule.points = {{a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a}};
    rule.weights = {0.25, 0.25, 0.25, 0.25};
  } else if (dim == 3 && order == 3) {
    const double q = 0.25, a = 0.5, b = 1.0 / 6.0;
    rule.points = {{q, q, q, q}, {a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a}};
    rule.weights = {-0.8, 0.45, 0.45, 0.45, 0.45};
  } else if (dim == 2 && order == 2) {
    const double a = 2.0 / 3.0, b = 1.0 / 6.0;
    rule.points = {{a, b, b}, {b, a, b}, {b, b, a}};
    rule.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  } else if (dim == 2 && order == 3) {
    const double t = 1.0 / 3.0, a = 0.6, b = 0.2;
    rule.points = {{t, t, t}, {a, b, b}, {b, a, b}, {b, b, a}};
    rule.weights = {-9.0 / 16.0, 25.0 / 48.0, 25.0 / 48.0, 25.0 / 48.0};
  } else {
    throw std::invalid_argument("cell_rule: dim must be 2 or 3, order 2 or 3");
  }

  const int m = dim + 1;
  if (order == 2) {
    for (double w : rule.weights) {
      if (!(w > 0.0)) throw std::logic_error("cell_rule: nonpositive weight");
    }
  }
  // Walk all monomial multi-indices up to the declared degree.
  const auto factorial = [](int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
  };
  std::vector<int> alpha(m, 0);
  double worst = 0.0;
  const std::function<void(int, int)> visit = [&](int pos, int remaining) {
    if (pos == m) {
      int total_deg = 0;
      double alpha_fact = 1.0;
      for (int k : alpha) {
        total_deg += k;
        alpha_fact *= factorial(k);
      }
      const double exact = alpha_fact * factorial(dim) / factorial(dim + total_deg);
      double approx = 0.0;
      for (size_t q = 0; q < rule.weights.size(); ++q) {
        double term = rule.weights[q];
        for (int a = 0; a < m; ++a) {
          for (int k = 0; k < alpha[a]; ++k) term *= rule.points[q][a];
        }
        approx += term;
      }
      worst = std::max(worst, std::abs(approx - exact));
      return;
    }
    for (int k = 0; k <= remaining; ++k) {
      alpha[pos] = k;
      visit(pos + 1, remaining - k);
    }
    alpha[pos] = 0;
  };
  visit(0, order);
  if (worst > 1e-14) throw std::logic_error("cell_rule: exactness verification failed");
  return rule;
}

// Body-force load L(u) = int f . u dx (+ int G* : grad u dx when present).
struct LoadFunctional {
  std::function<Vec3(const Vec3&)> f;
  std::function<Mat3(const Vec3&)> gstar;  // optional gradient-paired density

  static LoadFunctional zero() {
    LoadFunctional l;
    l.f = [](const Vec3&) { return Vec3::Zero(); };
    return l;
  }

  static LoadFunctional body_force(std::function<Vec3(const Vec3&)> f) {
    LoadFunctional l;
    l.f = std::move(f);
    return l;
  }
};

namespace fem_detail {

// Constant gradient contributions of the P1 basis on one cell:
// grad lambda_v for each local vertex. For dim == 2 the z-row is zero.
inline void cell_gradients(const Mesh& mesh, int c, Vec3* grads, double& measure) {
  const int* v = mesh.cell(c);
  measure = cell_measure(mesh, c);
  if (mesh.dim == 3) {
    // grad lambda_i = (opposite-face normal) scaled; use the inverse-Jacobian
    // identity via cofactors of the edge matrix.
    const Vec3 p0 = mesh.vertices[v[0]];
    Mat3 edges;
    edges.col(0) = mesh.vertices[v[1]] - p0;
    edges.col(1) = mesh.vertices[v[2]] - p0;
    edges.col(2) = mesh.vertices[v[3]] - p0;
    const Mat3 inv_t = cof3(edges) / det3(edges);  // = edges^{-T}
    grads[1] = inv_t.col(0);
    grads[2] = inv_t.col(1);
    grads[3] = inv_t.col(2);
    grads[0] = -(grads[1] + grads[2] + grads[3]);
  } else {
    const Vec3 p0 = mesh.vertices[v[0]];
    const Vec3 e1 = mesh.vertices[v[1]] - p0;
    const Vec3 e2 = mesh.vertices[v[2]] - p0;
    const double det = e1.x() * e2.y() - e1.y() * e2.x();
    grads[1] = Vec3(e2.y() / det, -e2.x() / det, 0.0);
    grads[2] = Vec3(-e1.y() / det, e1.x() / det, 0.0);
    grads[0] = -(grads[1] + grads[2]);
    grads[3] = Vec3::Zero();
  }
}

// Per-cell constant gradient of the field: sum_v u_v (grad lambda_v)^T,
// laid out as (grad u)_ij = d u_i / d x_j.
inline Mat3 cell_gradient(const Mesh& mesh, const VectorField& u, int c, const Vec3* grads) {
  Mat3 g = Mat3::Zero();
  const int* v = mesh.cell(c);
  for (int i = 0; i < mesh.cell_size(); ++i) {
    Vec3 uv = Vec3::Zero();
    for (int k = 0; k < u.components; ++k) uv(k) = u.coeffs[static_cast<Eigen::Index>(v[i]) * u.components + k];
    g += uv * grads[i].transpose();
  }
  return g;
}

}  // namespace fem_detail

// int_Omega |E(u)|^2, exact for piecewise-linear fields.
inline double strain_L2_sq(const VectorField& u) {
  const Mesh& mesh = *u.mesh;
  Vec3 grads[4];
  double measure;
  double acc = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    fem_detail::cell_gradients(mesh, c, grads, measure);
    const Mat3 g = fem_detail::cell_gradient(mesh, u, c, grads);
    acc += measure * sym(g).m.squaredNorm();
  }
  return acc;
}

// int_Omega |grad u|^2, exact for piecewise-linear fields.
inline double grad_L2_sq(const VectorField& u) {
  const Mesh& mesh = *u.mesh;
  Vec3 grads[4];
  double measure;
  double acc = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    fem_detail::cell_gradients(mesh, c, grads, measure);
    acc += measure * fem_detail::cell_gradient(mesh, u, c, grads).squaredNorm();
  }
  return acc;
}

// int_Omega curl u, exact for piecewise-linear fields.
inline Vec3 average_curl(const VectorField& u) {
  const Mesh& mesh = *u.mesh;
  Vec3 grads[4];
  double measure;
  Vec3 acc = Vec3::Zero();
  for (int c = 0; c < mesh.n_cells(); ++c) {
    fem_detail::cell_gradients(mesh, c, grads, measure);
    const Mat3 g = fem_detail::cell_gradient(mesh, u, c, grads);
    acc += measure * Vec3(g(2, 1) - g(1, 2), g(0, 2) - g(2, 0), g(1, 0) - g(0, 1));
  }
  return acc;
}

// Remove the rotated-frame rigid-rotation average: returns
// u(x) - (1/2) R (w ^ x) with w = |Omega_h|^{-1} int curl(R^T u), so that
// average_curl of x -> R^T u_new(x) vanishes. Strains are unchanged for R = I.
inline VectorField project_zero_avg_curl(const VectorField& u, const Rot3& r) {
  const Mesh& mesh = *u.mesh;
  // curl of x -> R^T u(x) equals R^T-rotated coefficients fed through curl.
  VectorField rotated = u;
  for (size_t v = 0; v < mesh.vertices.size(); ++v) {
    const Vec3 val = r.m.transpose() * u.at_vertex(static_cast<int>(v));
    for (int k = 0; k < 3; ++k) rotated.coeffs[v * 3 + k] = val(k);
  }
  const Vec3 w = average_curl(rotated) / total_measure(mesh);
  VectorField out = u;
  for (size_t v = 0; v < mesh.vertices.size(); ++v) {
    const Vec3 x = mesh.vertices[v];
    const Vec3 shift = 0.5 * (r.m * w.cross(x));
    for (int k = 0; k < 3; ++k) out.coeffs[v * 3 + k] -= shift(k);
  }
  return out;
}

// Quadrature evaluation of L(u). Throws if the density is non-finite at a
// quadrature node (the graded mesh keeps nodes away from the axis).
inline double apply_load(const LoadFunctional& load, const VectorField& u) {
  const Mesh& mesh = *u.mesh;
  const QuadratureRule rule = cell_rule(mesh.dim);
  Vec3 grads[4];
  double measure;
  double acc = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const int* v = mesh.cell(c);
    fem_detail::cell_gradients(mesh, c, grads, measure);
    Mat3 gu = Mat3::Zero();
    if (load.gstar) gu = fem_detail::cell_gradient(mesh, u, c, grads);
    for (size_t q = 0; q < rule.points.size(); ++q) {
      Vec3 x = Vec3::Zero();
      Vec3 uq = Vec3::Zero();
      for (int i = 0; i < mesh.cell_size(); ++i) {
        x += rule.points[q][i] * mesh.vertices[v[i]];
        for (int k = 0; k < u.components; ++k) {
          uq(k) += rule.points[q][i] * u.coeffs[static_cast<Eigen::Index>(v[i]) * u.components + k];
        }
      }
      double val = load.f ? load.f(x).dot(uq) : 0.0;
      if (load.gstar) val += (load.gstar(x).array() * gu.array()).sum();
      if (!std::isfinite(val)) {
        throw std::runtime_error("apply_load: non-finite integrand at a quadrature node");
      }
      acc += measure * rule.weights[q] * val;
    }
  }
  return acc;
}

// L1-type magnitude of the load under the same quadrature; used as the
// scale for equilibration residuals.
inline double load_scale(const LoadFunctional& load, const Mesh& mesh) {
  const QuadratureRule rule = cell_rule(mesh.dim);
  double acc = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const int* v = mesh.cell(c);
    const double measure = cell_measure(mesh, c);
    for (size_t q = 0; q < rule.points.size(); ++q) {
      Vec3 x = Vec3::Zero();
      for (int i = 0; i < mesh.cell_size(); ++i) x += rule.points[q][i] * mesh.vertices[v[i]];
      double val = load.f ? load.f(x).norm() : 0.0;
      if (load.gstar) val += load.gstar(x).norm();
      if (!std::isfinite(val)) {
        throw std::runtime_error("load_scale: non-finite integrand at a quadrature node");
      }
      acc += measure * rule.weights[q] * val;
    }
  }
  return acc;
}

struct EquilibrationReport {
  Vec3 translation_residual = Vec3::Zero();  // L(e_k)
  Vec3 rotation_residual = Vec3::Zero();     // L(e_k ^ x)
  double scale = 0.0;
  double tolerance = 1e-6;
  bool pass = false;

  double max_residual() const {
    return std::max(translation_residual.cwiseAbs().maxCoeff(),
                    rotation_residual.cwiseAbs().maxCoeff());
  }
};

// Residuals of L on the rigid displacements: translations e_k and rotation
// fields e_k ^ x (both exactly representable in the P1 space).
inline EquilibrationReport check_equilibrated(const LoadFunctional& load, const Mesh& mesh,
                                              double tol = 1e-6) {
  EquilibrationReport rep;
  rep.tolerance = tol;
  rep.scale = load_scale(load, mesh);
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e(k) = 1.0;
    const VectorField trans = VectorField::interpolate(mesh, [&](const Vec3&) { return e; });
    rep.translation_residual(k) = apply_load(load, trans);
    const VectorField rot =
        VectorField::interpolate(mesh, [&](const Vec3& x) { return e.cross(x); });
    rep.rotation_residual(k) = apply_load(load, rot);
  }
  rep.pass = rep.max_residual() <= tol * std::max(rep.scale, 1e-300);
  return rep;
}

namespace fem_detail {

using Triplets = std::vector<Eigen::Triplet<double>>;

// Assemble sum over cells of measure * B(grad-block) where the caller maps
// (grad lambda_a tensor e_i, grad lambda_b tensor e_j) to a coefficient.
template <typename CellForm>
inline void assemble(const Mesh& mesh, const CellForm& form, Triplets& trip) {
  Vec3 grads[4];
  double measure;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    fem_detail::cell_gradients(mesh, c, grads, measure);
    form(c, mesh.cell(c), grads, measure, trip);
  }
}

}  // namespace fem_detail

// Vector H1 Gram matrix int (u . v + grad u : grad v).
inline Eigen::SparseMatrix<double> h1_gram_matrix(const Mesh& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  const QuadratureRule rule = cell_rule(mesh.dim);
  fem_detail::Triplets trip;
  trip.reserve(static_cast<size_t>(mesh.n_cells()) * 16 * 3);
  fem_detail::assemble(
      mesh,
      [&](int, const int* v, const Vec3* grads, double measure, fem_detail::Triplets& out) {
        const int m = mesh.cell_size();
        for (int a = 0; a < m; ++a) {
          for (int b = 0; b < m; ++b) {
            // Mass entry int lambda_a lambda_b via the order-2 rule (exact).
            double mass = 0.0;
            for (size_t q = 0; q < rule.points.size(); ++q) {
              mass += rule.weights[q] * rule.points[q][a] * rule.points[q][b];
            }
            const double entry = measure * (mass + grads[a].dot(grads[b]));
            for (int k = 0; k < 3; ++k) {
              out.emplace_back(3 * v[a] + k, 3 * v[b] + k, entry);
            }
          }
        }
      },
      trip);
  Eigen::SparseMatrix<double> gram(3 * n, 3 * n);
  gram.setFromTriplets(trip.begin(), trip.end());
  return gram;
}

// Strain form int E(u) : E(v) and divergence form int div u div v;
// the material stiffness is a linear combination of the two.
inline Eigen::SparseMatrix<double> strain_form_matrix(const Mesh& mesh, double strain_coeff,
                                                      double div_coeff) {
  const int n = static_cast<int>(mesh.vertices.size());
  fem_detail::Triplets trip;
  trip.reserve(static_cast<size_t>(mesh.n_cells()) * 16 * 9);
  fem_detail::assemble(
      mesh,
      [&](int, const int* v, const Vec3* grads, double measure, fem_detail::Triplets& out) {
        const int m = mesh.cell_size();
        for (int a = 0; a < m; ++a) {
          for (int b = 0; b < m; ++b) {
            for (int i = 0; i < 3; ++i) {
              for (int j = 0; j < 3; ++j) {
                // E(lambda_a e_i) : E(lambda_b e_j)
                double strain = 0.5 * grads[a](j) * grads[b](i);
                if (i == j) strain += 0.5 * grads[a].dot(grads[b]);
                const double div = grads[a](i) * grads[b](j);
                const double entry = measure * (strain_coeff * strain + div_coeff * div);
                if (entry != 0.0) out.emplace_back(3 * v[a] + i, 3 * v[b] + j, entry);
              }
            }
          }
        }
      },
      trip);
  Eigen::SparseMatrix<double> mat(3 * n, 3 * n);
  mat.setFromTriplets(trip.begin(), trip.end());
  return mat;
}

// Load vector: l_i = L(basis_i) under the cell quadrature.
inline Eigen::VectorXd load_vector(const LoadFunctional& load, const Mesh& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  const QuadratureRule rule = cell_rule(mesh.dim);
  Eigen::VectorXd l = Eigen::VectorXd::Zero(3 * n);
  Vec3 grads[4];
  double measure;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const int* v = mesh.cell(c);
    fem_detail::cell_gradients(mesh, c, grads, measure);
    for (size_t q = 0; q < rule.points.size(); ++q) {
      Vec3 x = Vec3::Zero();
      for (int i = 0; i < mesh.cell_size(); ++i) x += rule.points[q][i] * mesh.vertices[v[i]];
      const Vec3 fq = load.f ? load.f(x) : Vec3::Zero();
      Mat3 gq = Mat3::Zero();
      if (load.gstar) gq = load.gstar(x);
      if (!fq.allFinite() || !gq.allFinite()) {
        throw std::runtime_error("load_vector: non-finite density at a quadrature node");
      }
      for (int i = 0; i < mesh.cell_size(); ++i) {
        const double wl = measure * rule.weights[q] * rule.points[q][i];
        for (int k = 0; k < 3; ++k) {
          l[3 * v[i] + k] += wl * fq(k);
          if (load.gstar) {
            // grad of lambda_i e_k pairs with row k of G*.
            l[3 * v[i] + k] += measure * rule.weights[q] * gq.row(k).dot(grads[i]);
          }
        }
      }
    }
  }
  return l;
}

// Rows of the 6 gauge constraints: int u = 0 (3 rows) and
// int curl(R^T u) = 0 (3 rows).
inline Eigen::SparseMatrix<double> gauge_constraint_rows(const Mesh& mesh, const Rot3& r) {
  const int n = static_cast<int>(mesh.vertices.size());
  fem_detail::Triplets trip;
  Vec3 grads[4];
  double measure;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const int* v = mesh.cell(c);
    fem_detail::cell_gradients(mesh, c, grads, measure);
    const int m = mesh.cell_size();
    for (int i = 0; i < m; ++i) {
      // int lambda_i = measure / m on a simplex.
      for (int k = 0; k < 3; ++k) {
        trip.emplace_back(k, 3 * v[i] + k, measure / m);
      }
      // curl(R^T u) on the cell: sum_v grad lambda_v ^ (R^T u_v).
      // Row 3+k picks component k; entry for coefficient u_v(j):
      // [grad lambda_i ^ (R^T e_j)]_k.
      for (int j = 0; j < 3; ++j) {
        const Vec3 cr = grads[i].cross(r.m.transpose().col(j));
        for (int k = 0; k < 3; ++k) {
          if (cr(k) != 0.0) trip.emplace_back(3 + k, 3 * v[i] + j, measure * cr(k));
        }
      }
    }
  }
  Eigen::SparseMatrix<double> rows(6, 3 * n);
  rows.setFromTriplets(trip.begin(), trip.end());
  return rows;
}

// Discrete dual norm ||L||_* = sup L(u) / ||u||_{H1}: solve the Riesz
// problem G u = l and return sqrt(l^T u).
inline double dual_norm_estimate(const LoadFunctional& load, const Mesh& mesh) {
  const Eigen::SparseMatrix<double> gram = h1_gram_matrix(mesh);
  const Eigen::VectorXd l = load_vector(load, mesh);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(gram);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("dual_norm_estimate: Gram factorization failed");
  }
  const Eigen::VectorXd u = solver.solve(l);
  const double sq = l.dot(u);
  return std::sqrt(std::max(sq, 0.0));
}

// Gradient Gram int grad u : grad v (block-diagonal over components).
inline Eigen::SparseMatrix<double> gradient_gram_matrix(const Mesh& mesh) {
  const int n3 = 3 * static_cast<int>(mesh.vertices.size());
  fem_detail::Triplets trip;
  trip.reserve(static_cast<size_t>(mesh.n_cells()) * 16 * 3);
  Vec3 grads[4];
  double measure;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const int* v = mesh.cell(c);
    fem_detail::cell_gradients(mesh, c, grads, measure);
    for (int a = 0; a < mesh.cell_size(); ++a) {
      for (int b = 0; b < mesh.cell_size(); ++b) {
        const double entry = measure * grads[a].dot(grads[b]);
        for (int k = 0; k < 3; ++k) trip.emplace_back(3 * v[a] + k, 3 * v[b] + k, entry);
      }
    }
  }
  Eigen::SparseMatrix<double> gram(n3, n3);
  gram.setFromTriplets(trip.begin(), trip.end());
  return gram;
}

// Discrete Korn constant on {int u = 0, int curl u = 0}: the reciprocal of
// the smallest Rayleigh quotient int |E u|^2 / int |grad u|^2, computed by
// inverse iteration on the constrained pencil (strain form, gradient form).
// Iterates until the Rayleigh quotient stagnates (it decreases monotonically
// for this iteration), with `iterations` as a hard cap.
inline double korn_constant_estimate(const Mesh& mesh, int iterations = 5000) {
  const int n3 = 3 * static_cast<int>(mesh.vertices.size());
  const Eigen::SparseMatrix<double> strain = strain_form_matrix(mesh, 1.0, 0.0);
  const Eigen::SparseMatrix<double> grad_gram = gradient_gram_matrix(mesh);
  const Eigen::SparseMatrix<double> c_rows = gauge_constraint_rows(mesh, Rot3::identity());

  // KKT matrix [strain C^T; C 0].
  fem_detail::Triplets kkt_trip;
  for (int k = 0; k < strain.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(strain, k); it; ++it) {
      kkt_trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  for (int k = 0; k < c_rows.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(c_rows, k); it; ++it) {
      kkt_trip.emplace_back(n3 + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      kkt_trip.emplace_back(static_cast<int>(it.col()), n3 + static_cast<int>(it.row()), it.value());
    }
  }
  Eigen::SparseMatrix<double> kkt(n3 + 6, n3 + 6);
  kkt.setFromTriplets(kkt_trip.begin(), kkt_trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
  solver.analyzePattern(kkt);
  solver.factorize(kkt);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("korn_constant_estimate: KKT factorization failed");
  }

  // Deterministic start vector, projected onto the constraint set by one
  // KKT solve with itself as data.
  std::mt19937_64 gen(7777);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd u(n3);
  for (int i = 0; i < n3; ++i) u[i] = dist(gen);

  double lambda = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n3 + 6);
  for (int it = 0; it < iterations; ++it) {
    rhs.head(n3) = grad_gram * u;
    rhs.tail(6).setZero();
    const Eigen::VectorXd sol = solver.solve(rhs);
    u = sol.head(n3);
    const double norm_sq = u.dot(grad_gram * u);
    if (!(norm_sq > 0.0)) {
      throw std::runtime_error("korn_constant_estimate: iteration collapsed");
    }
    u /= std::sqrt(norm_sq);
    const double next = u.dot(strain * u);  // Rayleigh quotient, ||u||_grad = 1
    stagnant = (lambda - next <= 1e-14 * next) ? stagnant + 1 : 0;
    lambda = next;
    if (stagnant >= 3) break;
  }
  return 1.0 / lambda;
}

}  // namespace velab
