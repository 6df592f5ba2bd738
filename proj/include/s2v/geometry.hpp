#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace s2v {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Proper rotation in 3D. Construction through `from_matrix` validates
/// orthonormality and det = +1 (tolerance 1e-9 per entry).
class RotationMatrix3 {
 public:
  RotationMatrix3() : m_(Mat3::Identity()) {}

  static RotationMatrix3 from_matrix(const Mat3& m);
  // Skips validation. Only for matrices that are orthonormal by construction.
  static RotationMatrix3 from_matrix_unchecked(const Mat3& m) { return RotationMatrix3(m); }

  static RotationMatrix3 identity() { return {}; }
  static RotationMatrix3 about_x(double radians);
  static RotationMatrix3 about_y(double radians);
  static RotationMatrix3 about_z(double radians);
  static RotationMatrix3 about_axis(const Vec3& axis, double radians);

  const Mat3& matrix() const { return m_; }
  RotationMatrix3 transpose() const { return RotationMatrix3(m_.transpose()); }
  RotationMatrix3 operator*(const RotationMatrix3& o) const { return RotationMatrix3(m_ * o.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  static bool is_valid(const Mat3& m, double tol = 1e-9);

 private:
  explicit RotationMatrix3(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

/// Continuous 6D rotation representation: the first two columns of a
/// rotation matrix (or any pair Gram-Schmidt can orthonormalize).
struct Rotation6D {
  Vec3 a1 = Vec3::UnitX();
  Vec3 a2 = Vec3::UnitY();
};

/// Rigid pose. Maps a point x to rotation * x + translation (mm).
struct RigidTransform {
  RotationMatrix3 rotation;
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {RotationMatrix3::identity(), t}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
};

/// The 9-number optimisation vector: 6D rotation followed by translation.
struct TransformParams {
  Rotation6D rot6d;
  Vec3 trans = Vec3::Zero();

  static constexpr int kSize = 9;
  using Vector = Eigen::Matrix<double, kSize, 1>;

  // Layout: a1 (0..2), a2 (3..5), translation (6..8).
  Vector to_vector() const;
  static TransformParams from_vector(const Vector& v);
  static bool is_translation_index(int i) { return i >= 6; }
};

struct EulerAnglesXYZ {
  double rx = 0.0;  // degrees
  double ry = 0.0;
  double rz = 0.0;
};

Rotation6D matrix_to_6d(const RotationMatrix3& r);
// Throws Error(DegenerateInput) when a1 is (near) zero or a2 is (near) parallel to a1.
RotationMatrix3 gram_schmidt_6d_to_matrix(const Rotation6D& p);

// Minimal angle between two rotations, in degrees, in [0, 180].
double geodesic_error(const RotationMatrix3& a, const RotationMatrix3& b);
double geodesic_error_radians(const RotationMatrix3& a, const RotationMatrix3& b);

// compose(outer, inner).apply(p) == outer.apply(inner.apply(p))
RigidTransform compose(const RigidTransform& outer, const RigidTransform& inner);

// Fixed-frame convention: R = Rz(rz) * Ry(ry) * Rx(rx).
RotationMatrix3 euler_to_matrix(const EulerAnglesXYZ& e);
// Inverse of euler_to_matrix; ry is returned in [-90, 90].
EulerAnglesXYZ matrix_to_euler(const RotationMatrix3& r);

TransformParams to_params(const RigidTransform& t);
RigidTransform to_transform(const TransformParams& p);
// Re-expresses params through their rotation so the 6D part is exactly the
// first two columns of a rotation matrix.
TransformParams canonicalize(const TransformParams& p);

double deg_to_rad(double deg);
double rad_to_deg(double rad);

}  // namespace s2v
