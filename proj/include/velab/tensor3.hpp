#pragma once

// Small fixed-size 3x3 tensor algebra used throughout the library:
// determinants and cofactors by explicit expansion, the exact nearest-rotation
// distance via a sign-corrected SVD, Euler-Rodrigues rotations, and the
// axial-vector <-> skew-matrix correspondence.

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace velab {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kRotOrthoTol = 1e-12;
inline constexpr double kSymSkewTol = 1e-14;

// Determinant by cofactor expansion along the first row.
inline double det3(const Mat3& f) {
  return f(0, 0) * (f(1, 1) * f(2, 2) - f(1, 2) * f(2, 1)) -
         f(0, 1) * (f(1, 0) * f(2, 2) - f(1, 2) * f(2, 0)) +
         f(0, 2) * (f(1, 0) * f(2, 1) - f(1, 1) * f(2, 0));
}

// Matrix of cofactors: cof(F)(i,j) is the signed minor of entry (i,j), so
// cof(F)^T F = det(F) I and cof(F) = det(F) F^{-T} when F is invertible.
inline Mat3 cof3(const Mat3& f) {
  Mat3 c;
  c(0, 0) = f(1, 1) * f(2, 2) - f(1, 2) * f(2, 1);
  c(0, 1) = -(f(1, 0) * f(2, 2) - f(1, 2) * f(2, 0));
  c(0, 2) = f(1, 0) * f(2, 1) - f(1, 1) * f(2, 0);
  c(1, 0) = -(f(0, 1) * f(2, 2) - f(0, 2) * f(2, 1));
  c(1, 1) = f(0, 0) * f(2, 2) - f(0, 2) * f(2, 0);
  c(1, 2) = -(f(0, 0) * f(2, 1) - f(0, 1) * f(2, 0));
  c(2, 0) = f(0, 1) * f(1, 2) - f(0, 2) * f(1, 1);
  c(2, 1) = -(f(0, 0) * f(1, 2) - f(0, 2) * f(1, 0));
  c(2, 2) = f(0, 0) * f(1, 1) - f(0, 1) * f(1, 0);
  return c;
}

inline double frob(const Mat3& f) { return f.norm(); }

// Rotation matrix validated on construction: R^T R = I to kRotOrthoTol in
// Frobenius norm and det R > 0.
struct Rot3 {
  Mat3 m;

  explicit Rot3(const Mat3& r) : m(r) {
    const double ortho = (r.transpose() * r - Mat3::Identity()).norm();
    if (!(ortho <= kRotOrthoTol)) {
      throw std::invalid_argument("Rot3: matrix is not orthogonal (|R^T R - I|_F = " +
                                  std::to_string(ortho) + ")");
    }
    if (!(det3(r) > 0.0)) {
      throw std::invalid_argument("Rot3: matrix has non-positive determinant");
    }
  }

  static Rot3 identity() { return Rot3(Mat3::Identity()); }
};

// Symmetric matrix validated on construction (tolerance kSymSkewTol).
struct SymMat3 {
  Mat3 m;

  explicit SymMat3(const Mat3& b) : m(b) {
    if (!((b - b.transpose()).norm() <= kSymSkewTol)) {
      throw std::invalid_argument("SymMat3: matrix is not symmetric");
    }
  }
};

// Skew-symmetric matrix validated on construction (tolerance kSymSkewTol).
struct SkewMat3 {
  Mat3 m;

  explicit SkewMat3(const Mat3& w) : m(w) {
    if (!((w + w.transpose()).norm() <= kSymSkewTol)) {
      throw std::invalid_argument("SkewMat3: matrix is not skew-symmetric");
    }
  }
};

// Symmetric part. (F + F^T) is exactly symmetric entrywise, so the wrapper
// validation cannot fail.
inline SymMat3 sym(const Mat3& f) { return SymMat3(0.5 * (f + f.transpose())); }

// Skew-symmetric part; exact for the same reason as sym.
inline SkewMat3 skew(const Mat3& f) { return SkewMat3(0.5 * (f - f.transpose())); }

// Skew matrix W with W x = a ^ x for every x.
inline SkewMat3 skew_of(const Vec3& a) {
  Mat3 w;
  w << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
      -a.y(), a.x(), 0.0;
  return SkewMat3(w);
}

// Inverse of skew_of: the axial vector of a skew matrix.
inline Vec3 axial(const SkewMat3& w) {
  return Vec3(w.m(2, 1), w.m(0, 2), w.m(1, 0));
}

// Frobenius distance from F to SO(3). With F = U S V^T and the sign branch
// s = det(U V^T), the nearest rotation is U diag(1,1,s) V^T (equivalently,
// dist^2 = (s1-1)^2 + (s2-1)^2 + (s s3 - 1)^2 with s3 the smallest singular
// value). Forming the residual matrix keeps full precision at the zero set,
// where the squared-singular-value expression would cancel to rounding noise.
inline double dist_SO3(const Mat3& f) {
  Eigen::JacobiSVD<Mat3> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 uvt = svd.matrixU() * svd.matrixV().transpose();
  Vec3 flip(1.0, 1.0, det3(uvt) >= 0.0 ? 1.0 : -1.0);
  const Mat3 nearest = svd.matrixU() * flip.asDiagonal() * svd.matrixV().transpose();
  return (f - nearest).norm();
}

// Rotation about a unit axis by an angle:
// R = I + sin(theta) W + (1 - cos(theta)) W^2 with W = skew_of(axis).
inline Rot3 euler_rodrigues(const Vec3& axis, double angle) {
  if (std::abs(axis.norm() - 1.0) > 1e-12) {
    throw std::invalid_argument("euler_rodrigues: axis must be a unit vector");
  }
  const Mat3 w = skew_of(axis).m;
  const Mat3 r = Mat3::Identity() + std::sin(angle) * w + (1.0 - std::cos(angle)) * (w * w);
  return Rot3(r);
}

}  // namespace velab
