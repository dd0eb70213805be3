#pragma once

// Discrete linearized elasticity around the identity: minimize the quadratic
// functional
//   F0(u; L) = int [ a |E(u)|^2 + kappa (div u)^2 ] - L(u),
// with (a, kappa) the material's second-order coefficients at identity, over
// the gauge subspace { int u = 0, int curl u = 0 }. Provides the energy
// identity check, the Betti bilinear form, the energy-versus-rotation map
// beta(R), the rotation-kernel scan, and the astatic-load predicate.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <Eigen/Eigenvalues>

#include "velab/energy.hpp"
#include "velab/fem.hpp"
#include "velab/mesh.hpp"
#include "velab/tensor3.hpp"

namespace velab {

struct LinearSolveReport {
  VectorField minimizer;          // gauge representative: int u = 0, int curl u = 0
  double energy = 0.0;            // F0(u*; L) = -1/2 L(u*)
  double identity_residual = 0.0; // relative defect of int Eu* : D2W : Eu* = L(u*)
};

// Pointwise frame change of the load: f -> R^T f (and G* -> R^T G*), so that
// pairing the rotated load with u equals pairing the original with R u.
inline LoadFunctional rotate_load(const Rot3& r, const LoadFunctional& load) {
  LoadFunctional out;
  const Mat3 rt = r.m.transpose();
  if (load.f) {
    auto f = load.f;
    out.f = [rt, f](const Vec3& x) { return Vec3(rt * f(x)); };
  }
  if (load.gstar) {
    auto g = load.gstar;
    out.gstar = [rt, g](const Vec3& x) { return Mat3(rt * g(x)); };
  }
  return out;
}

// Estimate of the quadrature error incurred when pairing the load with
// linear fields: evaluate the nine x_i e_j probes cell by cell under the
// order-2 and order-3 rules and sum the per-cell absolute differences. The
// true values drop out of each difference, leaving the rules' combined
// error; summing magnitudes (not signed totals, which cancel across cells)
// gives a conservative bound on what pollutes kernel pairings and
// rigid-body moments.
inline double linear_pairing_quadrature_error(const LoadFunctional& load, const Mesh& mesh) {
  const QuadratureRule rules[2] = {cell_rule(mesh.dim, 2), cell_rule(mesh.dim, 3)};
  Mat3 absdiff = Mat3::Zero();
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const int* v = mesh.cell(c);
    const double measure = cell_measure(mesh, c);
    Mat3 vals[2];
    for (int r = 0; r < 2; ++r) {
      vals[r].setZero();
      for (size_t q = 0; q < rules[r].points.size(); ++q) {
        Vec3 x = Vec3::Zero();
        for (int k = 0; k < mesh.cell_size(); ++k) {
          x += rules[r].points[q][k] * mesh.vertices[v[k]];
        }
        const double w = measure * rules[r].weights[q];
        if (load.f) vals[r] += w * x * load.f(x).transpose();
        // The probe x_i e_j has constant gradient e_j tensor e_i, pairing
        // with the (j, i) entry of G*.
        if (load.gstar) vals[r] += w * load.gstar(x).transpose();
      }
    }
    absdiff += (vals[0] - vals[1]).cwiseAbs();
  }
  return absdiff.maxCoeff();
}

// Tolerance for rotation-kernel membership and the axis predicate:
// max(1e-8, 10x the quadrature-error estimate on linear pairings).
inline double kernel_tolerance(const LoadFunctional& load, const Mesh& mesh) {
  return std::max(1e-8, 10.0 * linear_pairing_quadrature_error(load, mesh));
}

// Equilibration gate shared by every solve-like entry point. A rigid-body
// moment below the linear-pairing quadrature error is indistinguishable from
// zero at this resolution (rotating an equilibrated load, for instance,
// perturbs its discrete moments by exactly that error), so the gate refuses
// only genuinely unbalanced loads.
inline void require_equilibrated(const LoadFunctional& load, const Mesh& mesh, const char* who) {
  const EquilibrationReport eq = check_equilibrated(load, mesh);
  if (eq.pass) return;
  const double qtol = kernel_tolerance(load, mesh);
  if (eq.max_residual() <= qtol) return;
  char msg[160];
  std::snprintf(msg, sizeof msg,
                "%s: load is not equilibrated (residual %.3g, threshold %.3g)", who,
                eq.max_residual(), qtol);
  throw std::invalid_argument(msg);
}

// Assembled stiffness + gauge constraints with a single factorization,
// reusable across loads and rotations on the same mesh and material.
class LinearElasticSystem {
 public:
  LinearElasticSystem(const Mesh& mesh, const EnergyModel& model)
      : mesh_(&mesh),
        shear_(shear_stiffness_at_identity(model)),
        trace_(trace_coefficient_at_identity(model)) {
    const int n3 = 3 * static_cast<int>(mesh.vertices.size());
    // Hessian of the quadratic energy: 2a int E:E + 2 kappa int div div.
    stiffness_ = strain_form_matrix(mesh, 2.0 * shear_, 2.0 * trace_);
    const Eigen::SparseMatrix<double> c_rows = gauge_constraint_rows(mesh, Rot3::identity());
    fem_detail::Triplets trip;
    for (int k = 0; k < stiffness_.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(stiffness_, k); it; ++it) {
        trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      }
    }
    for (int k = 0; k < c_rows.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(c_rows, k); it; ++it) {
        trip.emplace_back(n3 + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        trip.emplace_back(static_cast<int>(it.col()), n3 + static_cast<int>(it.row()), it.value());
      }
    }
    Eigen::SparseMatrix<double> kkt(n3 + 6, n3 + 6);
    kkt.setFromTriplets(trip.begin(), trip.end());
    solver_.analyzePattern(kkt);
    solver_.factorize(kkt);
    if (solver_.info() != Eigen::Success) {
      throw std::runtime_error("LinearElasticSystem: KKT factorization failed");
    }
  }

  const Mesh& mesh() const { return *mesh_; }

  // Minimize F0(.; L) on the gauge subspace. Refuses non-equilibrated loads:
  // the constrained quadratic problem would not represent the original
  // minimization (the multipliers would absorb a genuine rigid-body force).
  LinearSolveReport solve(const LoadFunctional& load) const {
    require_equilibrated(load, *mesh_, "solve_linear");
    return solve_unchecked(load);
  }

  double betti(const LoadFunctional& l1, const LoadFunctional& l2) const {
    for (const LoadFunctional* l : {&l1, &l2}) {
      require_equilibrated(*l, *mesh_, "betti_form");
    }
    const Eigen::VectorXd u1 = minimizer_coeffs(l1);
    const Eigen::VectorXd u2 = minimizer_coeffs(l2);
    return u1.dot(stiffness_ * u2);
  }

  double beta(const Rot3& r, const LoadFunctional& load) const {
    return solve(rotate_load(r, load)).energy;
  }

 private:
  Eigen::VectorXd minimizer_coeffs(const LoadFunctional& load) const {
    const int n3 = 3 * static_cast<int>(mesh_->vertices.size());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n3 + 6);
    rhs.head(n3) = load_vector(load, *mesh_);
    const Eigen::VectorXd sol = solver_.solve(rhs);
    return sol.head(n3);
  }

  LinearSolveReport solve_unchecked(const LoadFunctional& load) const {
    const int n3 = 3 * static_cast<int>(mesh_->vertices.size());
    const Eigen::VectorXd l = load_vector(load, *mesh_);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n3 + 6);
    rhs.head(n3) = l;
    const Eigen::VectorXd u = solver_.solve(rhs).head(n3);

    LinearSolveReport rep;
    rep.minimizer = VectorField::zero(*mesh_);
    rep.minimizer.coeffs = u;
    const double quad = u.dot(stiffness_ * u);  // int Eu : D2W : Eu
    const double pair = l.dot(u);               // L(u*)
    rep.energy = 0.5 * quad - pair;
    rep.identity_residual = std::abs(quad - pair) / std::max(std::abs(pair), 1e-300);
    if (pair == 0.0 && quad == 0.0) rep.identity_residual = 0.0;
    return rep;
  }

  const Mesh* mesh_;
  double shear_;
  double trace_;
  Eigen::SparseMatrix<double> stiffness_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver_;
};

inline LinearSolveReport solve_linear(const Mesh& mesh, const EnergyModel& model,
                                      const LoadFunctional& load) {
  return LinearElasticSystem(mesh, model).solve(load);
}

inline double betti_form(const LoadFunctional& l1, const LoadFunctional& l2, const Mesh& mesh,
                         const EnergyModel& model) {
  return LinearElasticSystem(mesh, model).betti(l1, l2);
}

inline double beta_of(const Rot3& r, const LoadFunctional& load, const Mesh& mesh,
                      const EnergyModel& model) {
  return LinearElasticSystem(mesh, model).beta(r, load);
}

// L((R - I) x): pairing of the load with the linear displacement field of a
// finite rotation. Zero for every R exactly when the load's rotation kernel
// is all of SO(3).
inline double kernel_pairing(const LoadFunctional& load, const Mesh& mesh, const Rot3& r) {
  const Mat3 a = r.m - Mat3::Identity();
  const VectorField field =
      VectorField::interpolate(mesh, [&a](const Vec3& x) { return Vec3(a * x); });
  return apply_load(load, field);
}

// Scan rotation samples for membership in { R : L((R - I) x) = 0 }.
// Refuses non-equilibrated loads (the kernel condition presupposes them).
inline std::vector<Rot3> rotation_kernel_scan(const LoadFunctional& load, const Mesh& mesh,
                                              const std::vector<Rot3>& samples) {
  require_equilibrated(load, mesh, "rotation_kernel_scan");
  const double tol = kernel_tolerance(load, mesh);
  std::vector<Rot3> kernel;
  for (const Rot3& r : samples) {
    if (std::abs(kernel_pairing(load, mesh, r)) <= tol) kernel.push_back(r);
  }
  return kernel;
}

struct AstaticReport {
  Mat3 k = Mat3::Zero();        // int x tensor f
  Vec3 eigenvalues = Vec3::Zero();  // of the symmetrized matrix, ascending
  bool axis_free = false;       // all pairwise eigenvalue sums nonzero
  double tolerance = 0.0;
};

// Astatic matrix K = int x tensor f and the axis-of-equilibrium predicate:
// axis_free is true iff every pairwise sum of eigenvalues of sym(K) clears
// the quadrature tolerance.
inline AstaticReport astatic_and_axes(const LoadFunctional& load, const Mesh& mesh) {
  require_equilibrated(load, mesh, "astatic_and_axes");
  AstaticReport rep;
  const QuadratureRule rule = cell_rule(mesh.dim);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const int* v = mesh.cell(c);
    const double measure = cell_measure(mesh, c);
    for (size_t q = 0; q < rule.points.size(); ++q) {
      Vec3 x = Vec3::Zero();
      for (int k = 0; k < mesh.cell_size(); ++k) x += rule.points[q][k] * mesh.vertices[v[k]];
      const Vec3 fq = load.f ? load.f(x) : Vec3::Zero();
      rep.k += measure * rule.weights[q] * x * fq.transpose();
    }
  }
  rep.tolerance = kernel_tolerance(load, mesh);
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (rep.k + rep.k.transpose()));
  rep.eigenvalues = es.eigenvalues();
  rep.axis_free = true;
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      if (std::abs(rep.eigenvalues(i) + rep.eigenvalues(j)) <= rep.tolerance) {
        rep.axis_free = false;
      }
    }
  }
  return rep;
}

// CSV emitter: one row per rotation/energy sample, 17-digit reproducible.
inline void write_beta_csv(std::ostream& out,
                           const std::vector<std::pair<Rot3, double>>& rows) {
  out << "r11,r12,r13,r21,r22,r23,r31,r32,r33,beta\n";
  char buf[64];
  for (const auto& [r, beta] : rows) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g,", r.m(i, j));
        out << buf;
      }
    }
    std::snprintf(buf, sizeof buf, "%.17g\n", beta);
    out << buf;
  }
}

// JSON report of energy-identity residuals across solves.
inline void write_identity_residuals_json(std::ostream& out,
                                          const std::vector<double>& residuals) {
  out << "{\n  \"energy_identity_residuals\": [";
  char buf[64];
  for (size_t i = 0; i < residuals.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.17g", i ? ", " : "", residuals[i]);
    out << buf;
  }
  out << "]\n}\n";
}

}  // namespace velab
