#include "velab/linelast.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"
#include "velab/energy.hpp"
#include "velab/fem.hpp"
#include "velab/mesh.hpp"

using namespace velab;
namespace tu = velab::testutil;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Radial body force on the unit-disc cross-section whose potential phi(r) =
// log r + r^2 - 3r + 2 has zero first moments: the load is equilibrated and
// pairs to zero with every rotation field, so its rotation kernel is all of
// SO(3).
LoadFunctional disc_load() {
  return LoadFunctional::body_force([](const Vec3& x) {
    const double r = std::hypot(x.x(), x.y());
    const double pp = 1.0 / r + 2.0 * r - 3.0;  // phi'(r)
    return Vec3(pp / r * x.x(), pp / r * x.y(), 0.0);
  });
}

// Equilibrated load with a genuinely anisotropic astatic matrix: K is
// diagonal (pi/4, pi/4, -pi/6) on the unit cylinder, so no pairwise
// eigenvalue sum vanishes and the axis predicate holds.
LoadFunctional stretch_load() {
  return LoadFunctional::body_force(
      [](const Vec3& x) { return Vec3(x.x(), x.y(), 1.0 - 2.0 * x.z()); });
}

// Equilibrated load whose symmetrized astatic matrix has eigenvalues
// (-pi/4, 0, pi/4): one pairwise sum vanishes, so rotations about e1, e2,
// and e3 pair to zero while generic axes do not.
LoadFunctional shear_load() {
  return LoadFunctional::body_force([](const Vec3& x) { return Vec3(x.y(), x.x(), 0.0); });
}

// The material of the two-minimizer example: quadratic form at identity is
// 4|E|^2 exactly (the divergence coefficient 2 c_vol - a/3 vanishes).
EnergyModel disc_material() { return EnergyModel::yeoh(YeohParams{2.0, 1.0, 1.0, 2.0 / 3.0}); }

// Quarter turn about e3: the second energy level of the example.
Rot3 quarter_turn() { return euler_rodrigues(Vec3(0.0, 0.0, 1.0), kPi / 2.0); }

// Field with per-vertex coefficients rotated: x -> R u(x).
VectorField rotated_field(const Rot3& r, const VectorField& u) {
  VectorField out = u;
  for (Eigen::Index v = 0; 3 * v < out.coeffs.size(); ++v) {
    out.coeffs.segment<3>(3 * v) = r.m * u.coeffs.segment<3>(3 * v);
  }
  return out;
}

VectorField random_field(const Mesh& mesh, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  VectorField u = VectorField::zero(mesh);
  for (Eigen::Index i = 0; i < u.coeffs.size(); ++i) u.coeffs(i) = dist(gen);
  return u;
}

// Quadratic energy of the disc material evaluated directly: 4 int |E(u)|^2
// minus the load pairing (the divergence term is absent for this material).
double direct_energy(const VectorField& u, const LoadFunctional& load) {
  return 4.0 * strain_L2_sq(u) - apply_load(load, u);
}

}  // namespace

TEST_CASE("load rotation: pairing identities", "[linelast]") {
  const Mesh mesh = build_cylinder_mesh(3, 8, 2, 2.0);
  auto gen = tu::rng(101);

  SECTION("identity rotation leaves the pairing unchanged") {
    const LoadFunctional rot = rotate_load(Rot3::identity(), disc_load());
    for (int k = 0; k < 5; ++k) {
      const VectorField u = random_field(mesh, gen);
      const double a = apply_load(disc_load(), u);
      const double b = apply_load(rot, u);
      REQUIRE(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    }
  }

  SECTION("rotated load pairs with u as the original pairs with R u") {
    for (int k = 0; k < 20; ++k) {
      const Rot3 r = (k == 0) ? quarter_turn() : tu::random_rotation(gen);
      const VectorField u = random_field(mesh, gen);
      const double lhs = apply_load(rotate_load(r, disc_load()), u);
      const double rhs = apply_load(disc_load(), rotated_field(r, u));
      REQUIRE(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    }
  }

  SECTION("two rotations compose in reverse order") {
    for (int k = 0; k < 5; ++k) {
      const Rot3 r1 = tu::random_rotation(gen);
      const Rot3 r2 = tu::random_rotation(gen);
      const Rot3 prod{Mat3(r1.m * r2.m)};
      const LoadFunctional twice = rotate_load(r2, rotate_load(r1, disc_load()));
      const LoadFunctional once = rotate_load(prod, disc_load());
      const VectorField u = random_field(mesh, gen);
      const double a = apply_load(twice, u);
      const double b = apply_load(once, u);
      REQUIRE(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    }
  }

  SECTION("gstar part rotates alongside the body force") {
    const LoadFunctional base{nullptr, [](const Vec3&) { return Mat3::Identity(); }};
    const Rot3 r = quarter_turn();
    const LoadFunctional rot = rotate_load(r, base);
    const VectorField u = random_field(mesh, gen);
    const double lhs = apply_load(rot, u);
    const double rhs = apply_load(base, rotated_field(r, u));
    REQUIRE(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("constrained quadratic solve: basics and gates", "[linelast]") {
  const Mesh mesh = build_cylinder_mesh(4, 8, 2, 2.0);
  const LinearElasticSystem sys(mesh, disc_material());

  SECTION("zero load gives the zero minimizer at zero energy") {
    const LinearSolveReport rep = sys.solve(LoadFunctional::zero());
    REQUIRE(rep.energy == 0.0);
    REQUIRE(rep.identity_residual == 0.0);
    REQUIRE(rep.minimizer.coeffs.cwiseAbs().maxCoeff() <= 1e-14);
  }

  SECTION("disc load: negative energy, energy identity, gauge") {
    const LinearSolveReport rep = sys.solve(disc_load());
    REQUIRE(rep.energy < 0.0);
    REQUIRE(rep.identity_residual <= 1e-10);
    const double via_pairing = -0.5 * apply_load(disc_load(), rep.minimizer);
    REQUIRE(rep.energy == Catch::Approx(via_pairing).epsilon(1e-10));
    // Gauge representative: zero mean and zero average curl.
    const Eigen::SparseMatrix<double> rows = gauge_constraint_rows(mesh, Rot3::identity());
    const Eigen::VectorXd g = rows * rep.minimizer.coeffs;
    REQUIRE(g.cwiseAbs().maxCoeff() <= 1e-12);
    REQUIRE(average_curl(rep.minimizer).norm() <= 1e-12);
  }

  SECTION("minimality: the reported energy beats nearby competitors") {
    const LinearSolveReport rep = sys.solve(disc_load());
    auto gen = tu::rng(7);
    for (int k = 0; k < 5; ++k) {
      VectorField trial = rep.minimizer;
      trial.coeffs += 1e-3 * random_field(mesh, gen).coeffs;
      REQUIRE(direct_energy(trial, disc_load()) >= rep.energy - 1e-14);
    }
  }

  SECTION("energy is invariant under rigid shifts of the minimizer") {
    const LinearSolveReport rep = sys.solve(disc_load());
    const double base = direct_energy(rep.minimizer, disc_load());
    auto gen = tu::rng(13);
    for (int k = 0; k < 5; ++k) {
      const Vec3 a = tu::random_unit_vec3(gen);
      const Vec3 b = tu::random_unit_vec3(gen);
      VectorField shifted = rep.minimizer;
      shifted.coeffs += VectorField::interpolate(mesh, [&](const Vec3& x) {
                          return Vec3(a + b.cross(x));
                        }).coeffs;
      REQUIRE(std::abs(direct_energy(shifted, disc_load()) - base) <=
              1e-12 * std::max(1.0, std::abs(base)));
    }
  }

  SECTION("unbalanced loads are refused by every entry point") {
    const LoadFunctional net_force =
        LoadFunctional::body_force([](const Vec3&) { return Vec3(0.0, 0.0, 1.0); });
    const LoadFunctional net_torque =
        LoadFunctional::body_force([](const Vec3& x) { return Vec3(x.z() - 0.5, 0.0, 0.0); });
    for (const LoadFunctional* bad : {&net_force, &net_torque}) {
      REQUIRE_THROWS_AS(sys.solve(*bad), std::invalid_argument);
      REQUIRE_THROWS_AS(sys.betti(*bad, disc_load()), std::invalid_argument);
      REQUIRE_THROWS_AS(sys.betti(disc_load(), *bad), std::invalid_argument);
      REQUIRE_THROWS_AS(rotation_kernel_scan(*bad, mesh, {Rot3::identity()}),
                        std::invalid_argument);
      REQUIRE_THROWS_AS(astatic_and_axes(*bad, mesh), std::invalid_argument);
    }
  }

  SECTION("free wrappers agree with the assembled system") {
    const double direct = solve_linear(mesh, disc_material(), disc_load()).energy;
    REQUIRE(direct == sys.solve(disc_load()).energy);
    REQUIRE(beta_of(quarter_turn(), disc_load(), mesh, disc_material()) ==
            sys.beta(quarter_turn(), disc_load()));
  }
}

TEST_CASE("divergence-penalized material on the unit box", "[linelast]") {
  // c_vol = 2 gives a nonzero divergence coefficient 2*2 - 4/3 = 8/3,
  // exercising the full quadratic form rather than the pure strain norm.
  const Mesh mesh = build_box_mesh(6);
  const EnergyModel model = EnergyModel::yeoh(YeohParams{2.0, 1.0, 1.0, 2.0});
  const LoadFunctional load = LoadFunctional::body_force(
      [](const Vec3& x) { return Vec3(x.x() - 0.5, x.y() - 0.5, -2.0 * (x.z() - 0.5)); });
  const LinearElasticSystem sys(mesh, model);
  const LinearSolveReport rep = sys.solve(load);
  REQUIRE(rep.energy < 0.0);
  REQUIRE(rep.identity_residual <= 1e-10);
  REQUIRE(sys.betti(load, load) == Catch::Approx(-2.0 * rep.energy).epsilon(1e-10));
}

TEST_CASE("energy under rotated loads converges to both continuum levels",
          "[linelast]") {
  // Continuum minima of the quadratic functional for the disc load:
  // -pi/960 in the identity frame and -pi/480 after a quarter turn. The
  // discrete minimum on a subspace lies above, and approaches from above
  // under refinement.
  const double level_i = -kPi / 960.0;
  const double level_r = -kPi / 480.0;
  struct Row {
    int n_r, n_theta, n_z;
    double pin_i, pin_r;  // reproducibility pins, measured once
  };
  const std::vector<Row> rows = {
      {4, 8, 2, -0.002445078254550306, -0.0048049054077760663},
      {5, 10, 3, -0.0026919248436885813, -0.0053357816586882025},
      {6, 12, 3, -0.0028553345064816927, -0.0056790027263099495},
  };
  std::vector<double> err_i, err_r;
  double finest_gap = 0.0;
  for (const Row& row : rows) {
    const Mesh mesh = build_cylinder_mesh(row.n_r, row.n_theta, row.n_z, 2.0);
    const LinearElasticSystem sys(mesh, disc_material());
    const double bi = sys.solve(disc_load()).energy;
    const double br = sys.beta(quarter_turn(), disc_load());
    REQUIRE(bi == Catch::Approx(row.pin_i).epsilon(1e-8));
    REQUIRE(br == Catch::Approx(row.pin_r).epsilon(1e-8));
    REQUIRE(bi > level_i);  // subspace minimum sits above the continuum one
    REQUIRE(br > level_r);
    REQUIRE(br < bi);  // the quarter-turn level is strictly lower on every mesh
    err_i.push_back((bi - level_i) / std::abs(level_i));
    err_r.push_back((br - level_r) / std::abs(level_r));
    finest_gap = bi - br;
  }
  for (size_t k = 1; k < err_i.size(); ++k) {
    REQUIRE(err_i[k] < err_i[k - 1]);
    REQUIRE(err_r[k] < err_r[k - 1]);
  }
  REQUIRE(err_i.back() <= 0.15);
  REQUIRE(err_r.back() <= 0.15);
  // Discrete gap at the finest mesh already exceeds half the continuum gap
  // pi/960.
  REQUIRE(finest_gap >= 0.5 * kPi / 960.0);
}

TEST_CASE("Betti form: symmetry and the energy cross-check", "[linelast]") {
  const Mesh mesh = build_cylinder_mesh(5, 10, 3, 2.0);
  const LinearElasticSystem sys(mesh, disc_material());

  SECTION("pairing with the zero load vanishes") {
    REQUIRE(sys.betti(disc_load(), LoadFunctional::zero()) == 0.0);
  }

  SECTION("symmetric in its two arguments") {
    const double ab = sys.betti(disc_load(), stretch_load());
    const double ba = sys.betti(stretch_load(), disc_load());
    const double scale = std::max({1.0, std::abs(ab), std::abs(ba)});
    REQUIRE(std::abs(ab - ba) <= 1e-10 * scale);
  }

  SECTION("diagonal equals minus twice the minimum energy") {
    const double diag = sys.betti(disc_load(), disc_load());
    const double energy = sys.solve(disc_load()).energy;
    REQUIRE(diag == Catch::Approx(-2.0 * energy).epsilon(1e-10));
  }

  SECTION("rotated energies two ways: direct solve vs bilinear form") {
    auto gen = tu::rng(23);
    for (int k = 0; k < 5; ++k) {
      const Rot3 r = (k == 0) ? quarter_turn() : tu::random_rotation(gen);
      const LoadFunctional rotated = rotate_load(r, disc_load());
      const double direct = sys.beta(r, disc_load());
      const double via_form = -0.5 * sys.betti(rotated, rotated);
      REQUIRE(direct == Catch::Approx(via_form).epsilon(1e-10));
    }
  }
}

TEST_CASE("rotation kernel scan", "[linelast]") {
  const Mesh mesh = build_cylinder_mesh(6, 12, 3, 2.0);

  SECTION("identity pairs to exactly zero") {
    REQUIRE(kernel_pairing(disc_load(), mesh, Rot3::identity()) == 0.0);
  }

  SECTION("the disc load admits every rotation") {
    auto gen = tu::rng(31);
    std::vector<Rot3> samples = {Rot3::identity(), quarter_turn()};
    while (samples.size() < 100) samples.push_back(tu::random_rotation(gen));
    const std::vector<Rot3> kernel = rotation_kernel_scan(disc_load(), mesh, samples);
    REQUIRE(kernel.size() == samples.size());
  }

  SECTION("the shear load admits only axes with a vanishing product") {
    // K is symmetric with eigenvalues (-pi/4, 0, pi/4); the pairing with a
    // rotation about axis a by angle t is (1 - cos t)(a . K a), zero exactly
    // when a1 a2 = 0.
    const std::vector<Rot3> in = {
        euler_rodrigues(Vec3(0, 0, 1), 1.234),
        euler_rodrigues(Vec3(1, 0, 0), 2.0),
        euler_rodrigues(Vec3(0, 1, 0), -0.7),
    };
    const std::vector<Rot3> out = {
        euler_rodrigues(Vec3(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0), kPi / 2.0),
        euler_rodrigues(Vec3(0.6, 0.8, 0), 1.0),
    };
    std::vector<Rot3> samples = in;
    samples.insert(samples.end(), out.begin(), out.end());
    const std::vector<Rot3> kernel = rotation_kernel_scan(shear_load(), mesh, samples);
    REQUIRE(kernel.size() == in.size());
    for (size_t k = 0; k < kernel.size(); ++k) {
      REQUIRE((kernel[k].m - in[k].m).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SECTION("pairings match the closed form for equilibrated loads") {
    // L((R_{a,t} - I)x) = (1 - cos t)(a . sym(K) a - tr K), a consequence of
    // the rotation formula and the symmetry of the astatic matrix.
    const AstaticReport rep = astatic_and_axes(shear_load(), mesh);
    const Mat3 sym = 0.5 * (rep.k + rep.k.transpose());
    const double trace = rep.k.trace();
    auto gen = tu::rng(37);
    for (int k = 0; k < 30; ++k) {
      const Vec3 a = tu::random_unit_vec3(gen);
      std::uniform_real_distribution<double> angle(-kPi, kPi);
      const double t = angle(gen);
      const double predicted = (1.0 - std::cos(t)) * (a.dot(sym * a) - trace);
      const double got = kernel_pairing(shear_load(), mesh, euler_rodrigues(a, t));
      REQUIRE(std::abs(got - predicted) <= 1e-12);
    }
  }
}

TEST_CASE("astatic matrix and the axis predicate", "[linelast]") {
  const Mesh mesh = build_cylinder_mesh(6, 12, 3, 2.0);

  SECTION("zero load: zero matrix, predicate false") {
    const AstaticReport rep = astatic_and_axes(LoadFunctional::zero(), mesh);
    REQUIRE(rep.k.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE_FALSE(rep.axis_free);
  }

  SECTION("stretch load: diagonal matrix with no vanishing pair sum") {
    const AstaticReport rep = astatic_and_axes(stretch_load(), mesh);
    REQUIRE(rep.k(0, 0) == Catch::Approx(kPi / 4.0).epsilon(5e-3));
    REQUIRE(rep.k(1, 1) == Catch::Approx(kPi / 4.0).epsilon(5e-3));
    REQUIRE(rep.k(2, 2) == Catch::Approx(-kPi / 6.0).epsilon(5e-3));
    double off = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j) off = std::max(off, std::abs(rep.k(i, j)));
    REQUIRE(off <= 1e-12);
    REQUIRE(rep.eigenvalues(0) == Catch::Approx(-kPi / 6.0).epsilon(5e-3));
    REQUIRE(rep.eigenvalues(2) == Catch::Approx(kPi / 4.0).epsilon(5e-3));
    REQUIRE(rep.axis_free);
  }

  SECTION("shear load: opposite eigenvalues, predicate false") {
    const AstaticReport rep = astatic_and_axes(shear_load(), mesh);
    REQUIRE(rep.eigenvalues(0) == Catch::Approx(-kPi / 4.0).epsilon(5e-3));
    REQUIRE(std::abs(rep.eigenvalues(1)) <= 1e-12);
    REQUIRE(rep.eigenvalues(2) == Catch::Approx(kPi / 4.0).epsilon(5e-3));
    REQUIRE(std::abs(rep.eigenvalues(0) + rep.eigenvalues(2)) <= 1e-12);
    REQUIRE_FALSE(rep.axis_free);
  }

  SECTION("disc load on the fine graded mesh: matrix below 1e-6, predicate false") {
    const Mesh fine = build_cylinder_mesh(16, 48, 4, 2.0);
    const AstaticReport rep = astatic_and_axes(disc_load(), fine);
    REQUIRE(rep.k.cwiseAbs().maxCoeff() <= 1e-6);
    REQUIRE_FALSE(rep.axis_free);
  }
}

TEST_CASE("emitters are deterministic", "[linelast]") {
  SECTION("rotation/energy CSV with exact dyadic values") {
    const std::vector<std::pair<Rot3, double>> rows = {
        {Rot3::identity(), 0.5},
        {Rot3::identity(), -0.25},
    };
    std::ostringstream a, b;
    write_beta_csv(a, rows);
    write_beta_csv(b, rows);
    REQUIRE(a.str() == b.str());
    REQUIRE(a.str() ==
            "r11,r12,r13,r21,r22,r23,r31,r32,r33,beta\n"
            "1,0,0,0,1,0,0,0,1,0.5\n"
            "1,0,0,0,1,0,0,0,1,-0.25\n");
  }

  SECTION("identity-residual JSON") {
    std::ostringstream a, b;
    write_identity_residuals_json(a, {1.0, 0.5, 0.0});
    write_identity_residuals_json(b, {1.0, 0.5, 0.0});
    REQUIRE(a.str() == b.str());
    REQUIRE(a.str() == "{\n  \"energy_identity_residuals\": [1, 0.5, 0]\n}\n");
  }

  SECTION("solver-fed residual report is reproducible") {
    const Mesh mesh = build_cylinder_mesh(4, 8, 2, 2.0);
    const LinearElasticSystem sys(mesh, disc_material());
    std::ostringstream a, b;
    write_identity_residuals_json(a, {sys.solve(disc_load()).identity_residual});
    write_identity_residuals_json(b, {sys.solve(disc_load()).identity_residual});
    REQUIRE(a.str() == b.str());
  }
}
