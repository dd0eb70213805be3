#pragma once

// Hyperelastic stored-energy densities with an isochoric-volumetric split
//   W(F) = W_iso(F / (det F)^(1/3)) + g(det F),   g(t) = c_vol (t^2 - 1 - 2 log t),
// their analytic first derivatives, the quadratic form of D^2 W at the
// identity, and randomized probes of the structural assumptions
// (frame indifference, minimality at rotations, coercivity, growth).
//
// Two material families are provided:
//   Yeoh:  W_iso(G) = c1 (|G|^2 - 3) + c2 (|G|^2 - 3)^2 + c3 (|G|^2 - 3)^3
//   Ogden: W_iso(G) = sum_i c_i (nu_1^g_i + nu_2^g_i + nu_3^g_i - 3)
//                   + sum_j d_j (nu_1^-d_j + nu_2^-d_j + nu_3^-d_j - 3)
// where nu_k are the singular values of the unimodular part G (so the
// cofactor invariant Tr((cof G)^T cof G)^(d/2) equals sum nu_k^-d).
//
// Values are extended reals: W = +infinity whenever det F <= 0.

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <variant>
#include <vector>

#include "velab/tensor3.hpp"

namespace velab {

inline constexpr double kDetDerivFloor = 1e-8;  // smooth-neighborhood cutoff for dw

struct YeohParams {
  double c1 = 2.0;
  double c2 = 1.0;
  double c3 = 1.0;
  double c_vol = 4.0 / 3.0;
};

struct OgdenTerm {
  double coeff = 0.0;
  double exponent = 0.0;
};

struct OgdenParams {
  std::vector<OgdenTerm> principal;  // (c_i, gamma_i), gamma_i >= 3/2
  std::vector<OgdenTerm> cofactor;   // (d_j, delta_j), delta_j >= 3
  double c_vol = 1.0;
};

struct EnergyModel {
  std::variant<YeohParams, OgdenParams> params;

  static EnergyModel yeoh(const YeohParams& p) {
    if (!(p.c1 > 0.0 && p.c2 > 0.0 && p.c3 > 0.0 && p.c_vol > 0.0)) {
      throw std::invalid_argument("EnergyModel: Yeoh coefficients must be strictly positive");
    }
    return EnergyModel{p};
  }

  static EnergyModel ogden(const OgdenParams& p) {
    if (!(p.c_vol > 0.0)) {
      throw std::invalid_argument("EnergyModel: volumetric coefficient must be positive");
    }
    for (const auto& t : p.principal) {
      if (t.coeff < 0.0 || t.exponent < 1.5) {
        throw std::invalid_argument(
            "EnergyModel: principal Ogden terms need coeff >= 0 and exponent >= 3/2");
      }
    }
    for (const auto& t : p.cofactor) {
      if (t.coeff < 0.0 || t.exponent < 3.0) {
        throw std::invalid_argument(
            "EnergyModel: cofactor Ogden terms need coeff >= 0 and exponent >= 3");
      }
    }
    return EnergyModel{p};
  }

  double c_vol() const {
    return std::visit([](const auto& p) { return p.c_vol; }, params);
  }
};

// Volumetric energy g(t) = c_vol (t^2 - 1 - 2 log t); +infinity for t <= 0.
inline double w_vol(const EnergyModel& model, double t) {
  if (t <= 0.0) return std::numeric_limits<double>::infinity();
  const double x = t * t - 1.0 - 2.0 * std::log(t);
  return model.c_vol() * x;
}

namespace detail {

inline double yeoh_iso_of_invariant(const YeohParams& p, double i1bar) {
  const double x = i1bar - 3.0;
  return p.c1 * x + p.c2 * x * x + p.c3 * x * x * x;
}

// Unimodular singular values nu_k = sigma_k / J^(1/3) for det F > 0.
inline Vec3 unimodular_singular_values(const Mat3& f, double det) {
  Eigen::JacobiSVD<Mat3> svd(f);
  return svd.singularValues() / std::cbrt(det);
}

inline double ogden_iso_of_nu(const OgdenParams& p, const Vec3& nu) {
  double w = 0.0;
  for (const auto& t : p.principal) {
    w += t.coeff * (std::pow(nu(0), t.exponent) + std::pow(nu(1), t.exponent) +
                    std::pow(nu(2), t.exponent) - 3.0);
  }
  for (const auto& t : p.cofactor) {
    w += t.coeff * (std::pow(nu(0), -t.exponent) + std::pow(nu(1), -t.exponent) +
                    std::pow(nu(2), -t.exponent) - 3.0);
  }
  return w;
}

}  // namespace detail

// Total stored energy; +infinity iff det F <= 0.
inline double w_total(const EnergyModel& model, const Mat3& f) {
  const double det = det3(f);
  if (det <= 0.0) return std::numeric_limits<double>::infinity();
  double iso;
  if (const auto* yeoh = std::get_if<YeohParams>(&model.params)) {
    const double i1bar = f.squaredNorm() / std::cbrt(det * det);
    iso = detail::yeoh_iso_of_invariant(*yeoh, i1bar);
  } else {
    const auto& ogden = std::get<OgdenParams>(model.params);
    iso = detail::ogden_iso_of_nu(ogden, detail::unimodular_singular_values(f, det));
  }
  return iso + w_vol(model, det);
}

// First derivative DW(F) (first Piola-Kirchhoff stress). Requires
// det F >= kDetDerivFloor: outside that neighborhood the energy is treated
// as non-smooth and evaluation is refused.
inline Mat3 dw(const EnergyModel& model, const Mat3& f) {
  const double det = det3(f);
  if (det <= 0.0) {
    throw std::runtime_error("dw: derivative undefined for det F <= 0");
  }
  if (det < kDetDerivFloor) {
    throw std::runtime_error("dw: det F below the smooth-neighborhood cutoff");
  }
  const Mat3 cof = cof3(f);
  const double gp = model.c_vol() * (2.0 * det - 2.0 / det);  // g'(t) = c(2t - 2/t)

  if (const auto* yeoh = std::get_if<YeohParams>(&model.params)) {
    const double jm23 = 1.0 / std::cbrt(det * det);
    const double i1bar = f.squaredNorm() * jm23;
    const double x = i1bar - 3.0;
    const double wp = yeoh->c1 + 2.0 * yeoh->c2 * x + 3.0 * yeoh->c3 * x * x;
    // d(I1bar)/dF = 2 J^(-2/3) F - (2/3) I1bar F^(-T), with F^(-T) = cof F / J.
    const Mat3 di1 = 2.0 * jm23 * f - (2.0 / 3.0) * i1bar / det * cof;
    return wp * di1 + gp * cof;
  }

  // Ogden: W = psi(sigma) for the singular values sigma of F, so
  // DW = U diag(dpsi/dsigma) V^T. With nu_k = sigma_k J^(-1/3),
  // dnu_k/dsigma_i = nu_k (3 delta_ki - 1) / (3 sigma_i).
  const auto& ogden = std::get<OgdenParams>(model.params);
  Eigen::JacobiSVD<Mat3> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sigma = svd.singularValues();
  if (sigma.minCoeff() < kDetDerivFloor) {
    throw std::runtime_error("dw: singular value below the smooth-neighborhood cutoff");
  }
  const Vec3 nu = sigma / std::cbrt(det);
  Vec3 dpsi = Vec3::Zero();
  for (int i = 0; i < 3; ++i) {
    double acc = 0.0;
    for (const auto& t : ogden.principal) {
      for (int k = 0; k < 3; ++k) {
        const double dnuk = nu(k) * ((k == i ? 3.0 : 0.0) - 1.0) / (3.0 * sigma(i));
        acc += t.coeff * t.exponent * std::pow(nu(k), t.exponent - 1.0) * dnuk;
      }
    }
    for (const auto& t : ogden.cofactor) {
      for (int k = 0; k < 3; ++k) {
        const double dnuk = nu(k) * ((k == i ? 3.0 : 0.0) - 1.0) / (3.0 * sigma(i));
        acc += t.coeff * (-t.exponent) * std::pow(nu(k), -t.exponent - 1.0) * dnuk;
      }
    }
    acc += gp * det / sigma(i);  // volumetric: dJ/dsigma_i = J / sigma_i
    dpsi(i) = acc;
  }
  return svd.matrixU() * dpsi.asDiagonal() * svd.matrixV().transpose();
}

// Shear stiffness of the isochoric part at identity: a = 2 c1 for Yeoh
// (only the linear term survives at identity) and
// a = (sum_i c_i gamma_i^2 + sum_j d_j delta_j^2) / 2 for Ogden.
inline double shear_stiffness_at_identity(const EnergyModel& model) {
  if (const auto* yeoh = std::get_if<YeohParams>(&model.params)) {
    return 2.0 * yeoh->c1;
  }
  const auto& ogden = std::get<OgdenParams>(model.params);
  double a = 0.0;
  for (const auto& t : ogden.principal) a += 0.5 * t.coeff * t.exponent * t.exponent;
  for (const auto& t : ogden.cofactor) a += 0.5 * t.coeff * t.exponent * t.exponent;
  return a;
}

// Trace-squared coefficient pairing with the shear stiffness: the quadratic
// form below is a |B|^2 + trace_coefficient * (Tr B)^2.
inline double trace_coefficient_at_identity(const EnergyModel& model) {
  return 2.0 * model.c_vol() - shear_stiffness_at_identity(model) / 3.0;
}

// Quadratic form (1/2) B : D^2 W(I) : B for symmetric B. Expanding
// W(I + eps B) to second order gives
//   a |dev B|^2 + 2 c_vol (Tr B)^2  =  a |B|^2 + (2 c_vol - a/3) (Tr B)^2,
// with a the isochoric shear stiffness above.
inline double quadform_at_identity(const EnergyModel& model, const SymMat3& b) {
  const double a = shear_stiffness_at_identity(model);
  const double tr = b.m.trace();
  return a * b.m.squaredNorm() + trace_coefficient_at_identity(model) * tr * tr;
}

struct ProbeReport {
  double max_frame_violation = 0.0;     // relative, over random (R, F)
  double max_rotation_energy = 0.0;     // |W(R)| over random rotations
  double coercivity_constant = 0.0;     // largest C with W >= C dist^2 on dist <= 1/2
  // Growth from below with the model's exponents, in the two-constant form
  //   W(F) >= growth_constant * (|F|^s + |cof F|^q + (det F)^r) - growth_offset.
  // W vanishes on SO(3) while the growth bracket does not, so any
  // single-constant variant of this bound is void; the slope is measured in
  // the growth regime |F| >= 2 and the offset then closes the bound globally.
  double growth_constant = 0.0;
  double growth_offset = 0.0;
  double growth_s = 0.0, growth_q = 0.0, growth_r = 0.0;
  bool det_blowup_monotone = false;     // W increases monotonically as det -> 0+
  bool min_at_rotations = false;        // sampled W >= 0, with == 0 only near SO(3)
  bool pass_frame = false;
  bool pass_coercivity = false;

  bool all_pass() const {
    return pass_frame && pass_coercivity && det_blowup_monotone && min_at_rotations;
  }
};

namespace detail {

inline Mat3 random_mat3(std::mt19937_64& gen, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Mat3 f;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) f(i, j) = dist(gen);
  return f;
}

inline Rot3 random_rotation(std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-3.14159265358979323846, 3.14159265358979323846);
  Vec3 a;
  do {
    a = Vec3(normal(gen), normal(gen), normal(gen));
  } while (a.norm() < 1e-8);
  return euler_rodrigues(a / a.norm(), angle(gen));
}

}  // namespace detail

// Randomized structural probes. A failed probe is recorded in the report,
// never thrown.
inline ProbeReport probe_assumptions(const EnergyModel& model, int sample_count,
                                     unsigned long long seed = 20260815ull) {
  ProbeReport rep;
  std::mt19937_64 gen(seed);

  // Growth exponents: Yeoh grows like |F|^2 (r = 2 volumetric); Ogden like
  // its largest principal/cofactor powers.
  if (std::holds_alternative<YeohParams>(model.params)) {
    rep.growth_s = 2.0;
    rep.growth_q = 2.0;
    rep.growth_r = 2.0;
  } else {
    const auto& ogden = std::get<OgdenParams>(model.params);
    rep.growth_s = 2.0;
    rep.growth_q = 2.0;
    for (const auto& t : ogden.principal) rep.growth_s = std::max(rep.growth_s, t.exponent);
    for (const auto& t : ogden.cofactor) rep.growth_q = std::max(rep.growth_q, t.exponent);
    rep.growth_r = 2.0;
  }

  double coercivity = std::numeric_limits<double>::infinity();
  double growth_slope = std::numeric_limits<double>::infinity();
  double growth_offset = 0.0;
  bool min_ok = true;
  std::vector<std::pair<double, double>> bracket_energy;  // (bracket value, W)
  bracket_energy.reserve(static_cast<size_t>(sample_count));

  for (int i = 0; i < sample_count; ++i) {
    // Sample F with det F > 0 by perturbing a rotation at a random amplitude;
    // occasionally scale up to visit the growth regime.
    std::uniform_real_distribution<double> amp(0.0, 1.0);
    std::uniform_real_distribution<double> blow(1.0, 4.0);
    Mat3 f;
    double det;
    do {
      f = detail::random_rotation(gen).m + detail::random_mat3(gen, amp(gen));
      if (i % 4 == 0) f *= blow(gen);
      det = det3(f);
    } while (det <= 1e-6);

    const double w = w_total(model, f);
    const Rot3 r = detail::random_rotation(gen);
    const double w_rot = w_total(model, r.m * f);
    rep.max_frame_violation =
        std::max(rep.max_frame_violation, std::abs(w_rot - w) / (1.0 + std::abs(w)));

    const double d = dist_SO3(f);
    if (w < -1e-12) min_ok = false;
    if (w <= 1e-12 && d > 1e-8) min_ok = false;
    if (d > 1e-6 && d <= 0.5) coercivity = std::min(coercivity, w / (d * d));

    const double bracket = std::pow(frob(f), rep.growth_s) +
                           std::pow(frob(cof3(f)), rep.growth_q) + std::pow(det, rep.growth_r);
    bracket_energy.emplace_back(bracket, w);
    if (frob(f) >= 2.0) growth_slope = std::min(growth_slope, w / bracket);
  }
  if (std::isfinite(growth_slope)) {
    for (const auto& [bracket, w] : bracket_energy) {
      growth_offset = std::max(growth_offset, growth_slope * bracket - w);
    }
  }

  for (int i = 0; i < 100; ++i) {
    const Rot3 r = detail::random_rotation(gen);
    rep.max_rotation_energy = std::max(rep.max_rotation_energy, std::abs(w_total(model, r.m)));
  }

  // Determinant blow-up: W along diag(t, 1, 1) must increase as t -> 0+.
  rep.det_blowup_monotone = true;
  double prev = -std::numeric_limits<double>::infinity();
  for (double t = 1e-3; t >= 1e-9; t *= 0.1) {
    const double w = w_total(model, Vec3(t, 1.0, 1.0).asDiagonal());
    if (!(w > prev)) rep.det_blowup_monotone = false;
    prev = w;
  }

  rep.coercivity_constant = std::isfinite(coercivity) ? coercivity : 0.0;
  rep.growth_constant = std::isfinite(growth_slope) ? growth_slope : 0.0;
  rep.growth_offset = growth_offset;
  rep.min_at_rotations = min_ok;
  rep.pass_frame = rep.max_frame_violation <= 1e-12;
  rep.pass_coercivity = rep.coercivity_constant > 0.0;
  return rep;
}

}  // namespace velab
