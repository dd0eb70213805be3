#pragma once

// Shared helpers for the test suites: seeded random tensors and rotations.

#include <random>

#include "velab/tensor3.hpp"

namespace velab::testutil {

inline std::mt19937_64 rng(unsigned long long seed) { return std::mt19937_64(seed); }

inline Mat3 random_mat3(std::mt19937_64& gen, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Mat3 f;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) f(i, j) = dist(gen);
  return f;
}

inline Vec3 random_unit_vec3(std::mt19937_64& gen) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vec3 a;
  do {
    a = Vec3(dist(gen), dist(gen), dist(gen));
  } while (a.norm() < 1e-8);
  return a / a.norm();
}

inline Rot3 random_rotation(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> angle(-3.14159265358979323846, 3.14159265358979323846);
  return euler_rodrigues(random_unit_vec3(gen), angle(gen));
}

inline Mat3 random_sym3(std::mt19937_64& gen, double scale = 1.0) {
  const Mat3 f = random_mat3(gen, scale);
  return 0.5 * (f + f.transpose());
}

// Random F with determinant in a prescribed positive window, built by
// perturbing a rotation until the determinant lands inside [lo, hi].
inline Mat3 random_f_with_det(std::mt19937_64& gen, double lo, double hi) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Mat3 f = random_rotation(gen).m + random_mat3(gen, 0.25);
    const double d = det3(f);
    if (d >= lo && d <= hi) return f;
  }
  throw std::runtime_error("random_f_with_det: no sample found");
}

}  // namespace velab::testutil
