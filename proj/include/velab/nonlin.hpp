#pragma once

// Constrained minimization of the finite-elasticity functional
//   F(v; hL) = int W(I + grad v) - h L(v)
// over the gauge subspace { int v = 0, int curl v = 0 } intersected with the
// strain ball { int |E(v)|^2 <= (M h)^2 }, with det(I + grad v) kept positive
// at every quadrature point. A branch rotation R enters through the load
// only: the deformation y = R x + R v has energy G(y; hL) = F(v; h R^T L),
// so each branch is the same problem with a rotated load. Includes the
// local-minimality probe, the h-sweep toward the quadratic limit, the
// multi-branch experiment, and the stability constants.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "velab/energy.hpp"
#include "velab/fem.hpp"
#include "velab/linelast.hpp"
#include "velab/mesh.hpp"
#include "velab/tensor3.hpp"

namespace velab {

struct NonlinOptions {
  double tol = 1e-9;         // absolute stop threshold on the projected-gradient metric norm
  double curl_tol = 1e-10;   // admissibility threshold for probe directions
  double det_floor = 1e-6;   // line-search rejection guard on det(I + grad v)
  int max_iterations = 200;
  int max_backtracks = 60;
};

struct NonlinSolveReport {
  VectorField minimizer;           // v; the deformation is y = R x + R v
  double f_value = 0.0;            // F(v; h * rotated load)
  double rescaled = 0.0;           // h^-2 F(v; h * rotated load)
  double ball_usage = 0.0;         // strain_L2_sq(v) / (M h)^2
  double curl_residual = 0.0;      // |average_curl(v)|
  double mean_residual = 0.0;      // |int v| / |Omega|
  double min_det = 0.0;            // min over cells of det(I + grad v)
  double stationarity = 0.0;       // metric norm of the constrained gradient
  int iterations = 0;
  int backtracks = 0;
  int det_floor_hits = 0;          // line-search candidates rejected by the det guard
  bool ball_active = false;        // projection clipped the final iterate
  std::vector<double> f_history;   // F after every accepted step (non-increasing)
};

struct LocalMinReport {
  std::vector<double> min_delta_per_direction;  // min over the eps grid of F(v+eps psi)-F(v)
  double tol_energy = 0.0;
  double worst_delta = 0.0;
  bool pass = false;
};

struct SweepRow {
  double h = 0.0;
  double rescaled = 0.0;
  double ball_usage = 0.0;
  double stationarity = 0.0;
  int iterations = 0;
  std::array<double, 3> strain_diag = {0.0, 0.0, 0.0};  // <E(v/h) - E(u*), E(w_k)>
};

struct SweepTable {
  std::vector<SweepRow> rows;
  double target = 0.0;                 // quadratic minimum for the rotated load
  double largest_h_ball_active = 0.0;  // 0 when the ball never clipped
  bool complete = false;
  std::string failure;                 // nonempty when a row aborted the sweep
};

struct BranchRow {
  Rot3 rotation = Rot3::identity();
  double rescaled = 0.0;
  double beta = 0.0;  // quadratic level of the same branch on the same mesh
};

struct BranchTable {
  std::vector<BranchRow> rows;
  double min_beta_gap = 0.0;    // minimum pairwise |beta_i - beta_j|
  bool distinct_levels = false; // every pair separated by at least half its beta gap
};

struct StabilityConstants {
  double gamma = 0.0;
  double m0 = 0.0;
};

// gamma(Omega, C) = C / (2 K_Omega (4 C C_Omega + 8)) and
// M0 = max{1, 2 |L|_* / gamma}.
inline StabilityConstants constants_m0_gamma(double c, double c_omega, double k_omega,
                                             double dual_norm) {
  if (!(c > 0.0) || !(c_omega > 0.0) || !(k_omega > 0.0) || !(dual_norm > 0.0)) {
    throw std::invalid_argument("constants_m0_gamma: all inputs must be positive");
  }
  StabilityConstants out;
  out.gamma = c / (2.0 * k_omega * (4.0 * c * c_omega + 8.0));
  out.m0 = std::max(1.0, 2.0 * dual_norm / out.gamma);
  return out;
}

namespace nonlin_detail {

// Total energy F(v; h L) with the load given as an assembled vector;
// +infinity when any cell's det(I + grad v) falls to det_floor or below
// (the stored energy is infinite there, and the solver treats such
// candidates as out of bounds). Also reports the minimum determinant.
inline double total_energy(const Mesh& mesh, const EnergyModel& model, const VectorField& v,
                           const Eigen::VectorXd& load_vec, double h, double det_floor,
                           double* min_det_out = nullptr) {
  double acc = 0.0;
  double min_det = std::numeric_limits<double>::infinity();
  Vec3 grads[4];
  double measure = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    fem_detail::cell_gradients(mesh, c, grads, measure);
    const Mat3 f = Mat3::Identity() + fem_detail::cell_gradient(mesh, v, c, grads);
    const double det = det3(f);
    min_det = std::min(min_det, det);
    if (det <= det_floor) {
      if (min_det_out) *min_det_out = min_det;
      return std::numeric_limits<double>::infinity();
    }
    acc += measure * w_total(model, f);
  }
  if (min_det_out) *min_det_out = min_det;
  return acc - h * load_vec.dot(v.coeffs);
}

// Gradient of F(.; h L) at v: per cell the first Piola-Kirchhoff stress
// paired with the basis gradients. Caller keeps det above the smooth
// cutoff via the det guard.
inline Eigen::VectorXd energy_gradient(const Mesh& mesh, const EnergyModel& model,
                                       const VectorField& v, const Eigen::VectorXd& load_vec,
                                       double h) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(v.coeffs.size());
  Vec3 grads[4];
  double measure = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    fem_detail::cell_gradients(mesh, c, grads, measure);
    const Mat3 f = Mat3::Identity() + fem_detail::cell_gradient(mesh, v, c, grads);
    const Mat3 stress = dw(model, f);
    const int* vv = mesh.cell(c);
    for (int a = 0; a < mesh.cell_size(); ++a) {
      g.segment<3>(3 * vv[a]) += measure * (stress * grads[a]);
    }
  }
  g -= h * load_vec;
  return g;
}

// int E(a) : E(b) by polarization of the exact piecewise-constant strain.
inline double strain_inner(const VectorField& a, const VectorField& b) {
  VectorField sum = a, diff = a;
  sum.coeffs += b.coeffs;
  diff.coeffs -= b.coeffs;
  return 0.25 * (strain_L2_sq(sum) - strain_L2_sq(diff));
}

}  // namespace nonlin_detail

// Shared assembly for one (mesh, material): the quadratic-energy Hessian at
// identity with the six gauge rows, factorized once. Supplies the start
// guess (the quadratic minimizer), every descent direction, and the
// quadratic target energy.
class NonlinearSystem {
 public:
  NonlinearSystem(const Mesh& mesh, const EnergyModel& model)
      : mesh_(&mesh), model_(model) {
    const int n3 = 3 * static_cast<int>(mesh.vertices.size());
    stiffness_ = strain_form_matrix(mesh, 2.0 * shear_stiffness_at_identity(model),
                                    2.0 * trace_coefficient_at_identity(model));
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
      throw std::runtime_error("NonlinearSystem: metric factorization failed");
    }
  }

  const Mesh& mesh() const { return *mesh_; }
  const EnergyModel& model() const { return model_; }

  // Quadratic minimizer coefficients for an assembled load vector.
  Eigen::VectorXd quadratic_minimizer(const Eigen::VectorXd& load_vec) const {
    return kkt_solve(load_vec);
  }

  // Quadratic minimum value for an assembled load vector.
  double quadratic_energy(const Eigen::VectorXd& load_vec) const {
    const Eigen::VectorXd u = kkt_solve(load_vec);
    return 0.5 * u.dot(stiffness_ * u) - load_vec.dot(u);
  }

  // Minimize F(.; h * load) over the gauge subspace and the strain ball.
  NonlinSolveReport minimize(const LoadFunctional& load, double h, double m,
                             const NonlinOptions& opts = {}) const {
    if (!(h > 0.0 && h < 1.0)) {
      throw std::invalid_argument("minimize_constrained: h must lie in (0,1)");
    }
    if (!(m >= 1.0)) {
      throw std::invalid_argument("minimize_constrained: M must be >= 1");
    }
    const Mesh& mesh = *mesh_;
    const Eigen::VectorXd lvec = load_vector(load, mesh);
    const double rho_sq = (m * h) * (m * h);

    NonlinSolveReport rep;
    rep.minimizer = VectorField::zero(mesh);
    VectorField& v = rep.minimizer;
    // Start at h times the quadratic minimizer (already zero-mean and
    // curl-free through the gauge rows), scaled into the ball if needed.
    v.coeffs = h * quadratic_minimizer(lvec);
    rep.ball_active = project_ball(v, rho_sq);

    double f_cur = nonlin_detail::total_energy(mesh, model_, v, lvec, h, opts.det_floor,
                                               &rep.min_det);
    if (!(f_cur <= 0.0)) {
      // The origin is always feasible with F(0) = 0; fall back to it whenever
      // the warm start lands above zero (or outside the determinant range),
      // so the accepted history starts nonpositive and stays there.
      v.coeffs.setZero();
      rep.ball_active = false;
      f_cur = 0.0;
      rep.min_det = 1.0;
    }
    rep.f_history.push_back(f_cur);

    VectorField trial = VectorField::zero(mesh);
    int stalled_steps = 0;
    for (int it = 0; it < opts.max_iterations; ++it) {
      const Eigen::VectorXd g =
          nonlin_detail::energy_gradient(mesh, model_, v, lvec, h);
      const Eigen::VectorXd d = kkt_solve(-g);
      // Stationarity through the projected full step: with the ball inactive
      // this is the metric norm of the descent direction, sqrt(d' H0 d); at a
      // clipped boundary point the projection cancels the direction exactly
      // when the multiplier condition holds, so the measure vanishes at
      // constrained stationary points too.
      trial.coeffs = v.coeffs + d;
      project_ball(trial, rho_sq);
      trial.coeffs -= v.coeffs;
      rep.stationarity = std::sqrt(std::max(0.0, trial.coeffs.dot(stiffness_ * trial.coeffs)));
      if (rep.stationarity <= opts.tol) break;

      double t = 1.0;
      bool accepted = false;
      for (int bt = 0; bt < opts.max_backtracks; ++bt) {
        trial.coeffs = v.coeffs + t * d;
        const bool clipped = project_ball(trial, rho_sq);
        double min_det = 0.0;
        const double f_new = nonlin_detail::total_energy(mesh, model_, trial, lvec, h,
                                                         opts.det_floor, &min_det);
        if (!std::isfinite(f_new)) {
          ++rep.det_floor_hits;
          ++rep.backtracks;
          t *= 0.5;
          continue;
        }
        // Sufficient decrease along the step actually taken (the ball
        // projection may shorten it); clamping at zero keeps the accepted
        // history non-increasing even when the projection turns the
        // predicted slope around.
        const double decrease = std::min(g.dot(trial.coeffs - v.coeffs), 0.0);
        if (f_new <= f_cur + 1e-4 * decrease) {
          const bool stalled =
              f_cur - f_new <= 8.0 * std::numeric_limits<double>::epsilon() * std::abs(f_cur);
          stalled_steps = stalled ? stalled_steps + 1 : 0;
          v.coeffs.swap(trial.coeffs);
          f_cur = f_new;
          rep.min_det = min_det;
          rep.ball_active = clipped;
          rep.f_history.push_back(f_cur);
          accepted = true;
          break;
        }
        ++rep.backtracks;
        t *= 0.5;
      }
      rep.iterations = it + 1;
      if (!accepted) {
        // No progress is failure only while the gradient is still large;
        // near the minimum the energy difference sinks under rounding.
        if (rep.stationarity > 1e3 * opts.tol) {
          char msg[160];
          std::snprintf(msg, sizeof msg,
                        "minimize_constrained: line search stalled at iteration %d "
                        "(stationarity %.3g, F %.6g)",
                        it, rep.stationarity, f_cur);
          throw std::runtime_error(msg);
        }
        break;
      }
      // Three consecutive accepted steps below evaluation precision: the
      // energy cannot be measurably improved any further at this scale.
      if (stalled_steps >= 3) break;
    }

    rep.f_value = f_cur;
    rep.rescaled = f_cur / (h * h);
    rep.ball_usage = strain_L2_sq(v) / rho_sq;
    rep.curl_residual = average_curl(v).norm();
    rep.mean_residual = mean_abs(v);
    return rep;
  }

 private:
  Eigen::VectorXd kkt_solve(const Eigen::VectorXd& rhs_head) const {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rhs_head.size() + 6);
    rhs.head(rhs_head.size()) = rhs_head;
    return solver_.solve(rhs).head(rhs_head.size());
  }

  // Scalar scaling onto the strain ball; preserves both gauge constraints.
  static bool project_ball(VectorField& v, double rho_sq) {
    const double s = strain_L2_sq(v);
    if (s <= rho_sq) return false;
    v.coeffs *= std::sqrt(rho_sq / s);
    return true;
  }

  double mean_abs(const VectorField& v) const {
    const Eigen::SparseMatrix<double> rows = gauge_constraint_rows(*mesh_, Rot3::identity());
    const Eigen::VectorXd g = rows * v.coeffs;
    return g.head(3).cwiseAbs().maxCoeff() / std::abs(total_measure(*mesh_));
  }

  const Mesh* mesh_;
  EnergyModel model_;
  Eigen::SparseMatrix<double> stiffness_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver_;
};

// One constrained solve of the branch problem: rotate the load into the
// branch frame and minimize in the gauge-I variable. The original load must
// be equilibrated.
inline NonlinSolveReport minimize_constrained(const Mesh& mesh, const EnergyModel& model,
                                              const LoadFunctional& load, double h, double m,
                                              const Rot3& r, const NonlinOptions& opts = {}) {
  require_equilibrated(load, mesh, "minimize_constrained");
  return NonlinearSystem(mesh, model).minimize(rotate_load(r, load), h, m, opts);
}

// Energy difference F(v + eps psi; h L~) - F(v; h L~) minimized over the
// eps grid, for one admissible direction psi (zero average curl). An
// infinite energy at v + eps psi counts as a nonnegative difference: the
// perturbed state is out of the admissible determinant range.
inline double local_min_probe(const Mesh& mesh, const EnergyModel& model,
                              const LoadFunctional& rotated_load, const VectorField& v,
                              double h, const VectorField& psi,
                              const std::vector<double>& eps_grid,
                              const NonlinOptions& opts = {}) {
  if (average_curl(psi).norm() > opts.curl_tol) {
    throw std::invalid_argument(
        "local_min_probe: direction has nonzero average curl (not in the constraint class)");
  }
  const Eigen::VectorXd lvec = load_vector(rotated_load, mesh);
  const double f0 = nonlin_detail::total_energy(mesh, model, v, lvec, h, opts.det_floor);
  double worst = std::numeric_limits<double>::infinity();
  VectorField trial = v;
  for (const double eps : eps_grid) {
    trial.coeffs = v.coeffs + eps * psi.coeffs;
    const double f_eps =
        nonlin_detail::total_energy(mesh, model, trial, lvec, h, opts.det_floor);
    const double delta = std::isfinite(f_eps)
                             ? f_eps - f0
                             : std::numeric_limits<double>::infinity();
    worst = std::min(worst, delta);
  }
  return worst;
}

// Sample the local-minimality definition: n_dirs random directions from the
// discrete space, projected to zero average curl and H1-normalized; for
// each, the minimum energy difference over {0} + eps_grid must clear
// -(1e-12 |F| + 1e-14).
inline LocalMinReport verify_local_min(const VectorField& v, const Mesh& mesh,
                                       const EnergyModel& model, const LoadFunctional& load,
                                       double h, const Rot3& r, int n_dirs,
                                       const std::vector<double>& eps_grid,
                                       unsigned long long seed = 2026,
                                       const NonlinOptions& opts = {}) {
  const LoadFunctional rotated = rotate_load(r, load);
  const Eigen::VectorXd lvec = load_vector(rotated, mesh);
  const double f0 = nonlin_detail::total_energy(mesh, model, v, lvec, h, opts.det_floor);

  std::vector<double> grid = {0.0};
  grid.insert(grid.end(), eps_grid.begin(), eps_grid.end());

  const Eigen::SparseMatrix<double> gram = h1_gram_matrix(mesh);
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);

  LocalMinReport rep;
  rep.tol_energy = 1e-12 * std::abs(f0) + 1e-14;
  rep.worst_delta = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_dirs; ++k) {
    VectorField psi = VectorField::zero(mesh);
    for (Eigen::Index i = 0; i < psi.coeffs.size(); ++i) psi.coeffs(i) = dist(gen);
    psi = project_zero_avg_curl(psi, Rot3::identity());
    const double h1 = std::sqrt(psi.coeffs.dot(gram * psi.coeffs));
    psi.coeffs /= h1;
    const double worst =
        local_min_probe(mesh, model, rotated, v, h, psi, grid, opts);
    rep.min_delta_per_direction.push_back(worst);
    rep.worst_delta = std::min(rep.worst_delta, worst);
  }
  rep.pass = rep.worst_delta >= -rep.tol_energy;
  return rep;
}

// Sweep h downward and compare the rescaled energies against the quadratic
// minimum of the rotated load on the same mesh. Any row failure returns the
// partial table with the reason recorded.
inline SweepTable h_sweep(const Mesh& mesh, const EnergyModel& model, const LoadFunctional& load,
                          const Rot3& r, const std::vector<double>& h_list, double m,
                          const NonlinOptions& opts = {}) {
  for (size_t k = 0; k < h_list.size(); ++k) {
    if (!(h_list[k] > 0.0 && h_list[k] < 1.0) || (k > 0 && h_list[k] >= h_list[k - 1])) {
      throw std::invalid_argument("h_sweep: h_list must be strictly decreasing within (0,1)");
    }
  }
  require_equilibrated(load, mesh, "h_sweep");
  const LoadFunctional rotated = rotate_load(r, load);
  const NonlinearSystem system(mesh, model);
  const Eigen::VectorXd lvec = load_vector(rotated, mesh);

  SweepTable table;
  table.target = system.quadratic_energy(lvec);

  // Weak-convergence probes: the quadratic minimizer itself plus two fixed
  // smooth fields.
  VectorField ustar = VectorField::zero(mesh);
  ustar.coeffs = system.quadratic_minimizer(lvec);
  const VectorField probe1 = VectorField::interpolate(
      mesh, [](const Vec3& x) { return Vec3(x.y() * x.z(), x.x() * x.z(), x.x() * x.y()); });
  const VectorField probe2 = VectorField::interpolate(mesh, [](const Vec3& x) {
    return Vec3(0.5 * x.x() * x.x(), 0.5 * x.y() * x.y(), 0.5 * x.z() * x.z());
  });
  const VectorField* probes[3] = {&ustar, &probe1, &probe2};

  for (const double h : h_list) {
    SweepRow row;
    row.h = h;
    try {
      const NonlinSolveReport rep = system.minimize(rotated, h, m, opts);
      row.rescaled = rep.rescaled;
      row.ball_usage = rep.ball_usage;
      row.stationarity = rep.stationarity;
      row.iterations = rep.iterations;
      VectorField scaled = rep.minimizer;
      scaled.coeffs = rep.minimizer.coeffs / h - ustar.coeffs;
      for (int k = 0; k < 3; ++k) {
        row.strain_diag[static_cast<size_t>(k)] =
            nonlin_detail::strain_inner(scaled, *probes[k]);
      }
      if (rep.ball_usage >= 1.0 - 1e-12) {
        table.largest_h_ball_active = std::max(table.largest_h_ball_active, h);
      }
    } catch (const std::exception& e) {
      table.failure = e.what();
      return table;
    }
    table.rows.push_back(row);
  }
  table.complete = true;
  return table;
}

// One constrained solve per branch rotation at a common h, with the
// quadratic level of each branch for reference. Rotations must belong to
// the load's rotation kernel (checked at quadrature tolerance).
inline BranchTable multi_branch(const Mesh& mesh, const EnergyModel& model,
                                const LoadFunctional& load, const std::vector<Rot3>& rotations,
                                double h, double m, const NonlinOptions& opts = {}) {
  require_equilibrated(load, mesh, "multi_branch");
  const double ktol = kernel_tolerance(load, mesh);
  for (const Rot3& r : rotations) {
    if (std::abs(kernel_pairing(load, mesh, r)) > ktol) {
      throw std::invalid_argument(
          "multi_branch: rotation outside the load's rotation kernel");
    }
  }
  const NonlinearSystem system(mesh, model);
  BranchTable table;
  for (const Rot3& r : rotations) {
    const LoadFunctional rotated = rotate_load(r, load);
    const Eigen::VectorXd lvec = load_vector(rotated, mesh);
    BranchRow row;
    row.rotation = r;
    row.beta = system.quadratic_energy(lvec);
    row.rescaled = system.minimize(rotated, h, m, opts).rescaled;
    table.rows.push_back(row);
  }
  if (table.rows.size() < 2) {
    table.min_beta_gap = 0.0;
    table.distinct_levels = false;
    return table;
  }
  table.min_beta_gap = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < table.rows.size(); ++i) {
    for (size_t j = i + 1; j < table.rows.size(); ++j) {
      table.min_beta_gap =
          std::min(table.min_beta_gap, std::abs(table.rows[i].beta - table.rows[j].beta));
    }
  }
  // Distinct levels: every pair of rescaled energies separated by more than
  // half the smallest quadratic-level gap.
  table.distinct_levels = true;
  for (size_t i = 0; i < table.rows.size(); ++i) {
    for (size_t j = i + 1; j < table.rows.size(); ++j) {
      if (std::abs(table.rows[i].rescaled - table.rows[j].rescaled) <=
          0.5 * table.min_beta_gap) {
        table.distinct_levels = false;
      }
    }
  }
  return table;
}

// CSV emitters for the sweep and branch tables, 17-digit reproducible.
inline void write_sweep_csv(std::ostream& out, const SweepTable& table) {
  out << "h,rescaled_energy,ball_usage,stationarity,iterations,diag_ustar,diag_shear,diag_"
         "quadratic\n";
  char buf[256];
  for (const SweepRow& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g\n", r.h,
                  r.rescaled, r.ball_usage, r.stationarity, r.iterations, r.strain_diag[0],
                  r.strain_diag[1], r.strain_diag[2]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "# target,%.17g\n", table.target);
  out << buf;
}

inline void write_branch_csv(std::ostream& out, const BranchTable& table) {
  out << "r11,r12,r13,r21,r22,r23,r31,r32,r33,rescaled_energy,beta\n";
  char buf[64];
  for (const BranchRow& row : table.rows) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g,", row.rotation.m(i, j));
        out << buf;
      }
    }
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", row.rescaled, row.beta);
    out << buf;
  }
}

}  // namespace velab
