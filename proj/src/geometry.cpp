#include "s2v/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "s2v/error.hpp"

namespace s2v {

namespace {
constexpr double kDegenerateNorm = 1e-9;
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::EmptyImage: return "EmptyImage";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NoPairs: return "NoPairs";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::GeometryOutOfBounds: return "GeometryOutOfBounds";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Validation: return "Validation";
  }
  return "Unknown";
}

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

bool RotationMatrix3::is_valid(const Mat3& m, double tol) {
  if (!m.allFinite()) return false;
  const Mat3 gram = m.transpose() * m;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(m.determinant() - 1.0) <= tol;
}

RotationMatrix3 RotationMatrix3::from_matrix(const Mat3& m) {
  if (!is_valid(m)) throw Error(ErrorCode::InvalidArgument, "matrix is not a proper rotation");
  return RotationMatrix3(m);
}

RotationMatrix3 RotationMatrix3::about_x(double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  Mat3 m;
  m << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return RotationMatrix3(m);
}

RotationMatrix3 RotationMatrix3::about_y(double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  Mat3 m;
  m << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return RotationMatrix3(m);
}

RotationMatrix3 RotationMatrix3::about_z(double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  Mat3 m;
  m << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return RotationMatrix3(m);
}

RotationMatrix3 RotationMatrix3::about_axis(const Vec3& axis, double radians) {
  const double n = axis.norm();
  if (!(n > kDegenerateNorm)) throw Error(ErrorCode::DegenerateInput, "rotation axis has zero length");
  return RotationMatrix3(Eigen::AngleAxisd(radians, axis / n).toRotationMatrix());
}

RigidTransform RigidTransform::inverse() const {
  const RotationMatrix3 rt = rotation.transpose();
  return {rt, -(rt * translation)};
}

TransformParams::Vector TransformParams::to_vector() const {
  Vector v;
  v << rot6d.a1, rot6d.a2, trans;
  return v;
}

TransformParams TransformParams::from_vector(const Vector& v) {
  TransformParams p;
  p.rot6d.a1 = v.segment<3>(0);
  p.rot6d.a2 = v.segment<3>(3);
  p.trans = v.segment<3>(6);
  return p;
}

Rotation6D matrix_to_6d(const RotationMatrix3& r) {
  return {r.matrix().col(0), r.matrix().col(1)};
}

RotationMatrix3 gram_schmidt_6d_to_matrix(const Rotation6D& p) {
  const double n1 = p.a1.norm();
  if (!(n1 > kDegenerateNorm)) throw Error(ErrorCode::DegenerateInput, "a1 cannot be normalized");
  const Vec3 b1 = p.a1 / n1;
  const Vec3 residual = p.a2 - b1.dot(p.a2) * b1;
  const double n2 = residual.norm();
  if (!(n2 > kDegenerateNorm)) throw Error(ErrorCode::DegenerateInput, "a2 is parallel to a1");
  const Vec3 b2 = residual / n2;
  Mat3 m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b1.cross(b2);
  return RotationMatrix3::from_matrix_unchecked(m);
}

double geodesic_error_radians(const RotationMatrix3& a, const RotationMatrix3& b) {
  const Mat3 rel = a.matrix() * b.matrix().transpose();
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

double geodesic_error(const RotationMatrix3& a, const RotationMatrix3& b) {
  return rad_to_deg(geodesic_error_radians(a, b));
}

RigidTransform compose(const RigidTransform& outer, const RigidTransform& inner) {
  return {outer.rotation * inner.rotation, outer.rotation * inner.translation + outer.translation};
}

RotationMatrix3 euler_to_matrix(const EulerAnglesXYZ& e) {
  return RotationMatrix3::about_z(deg_to_rad(e.rz)) * RotationMatrix3::about_y(deg_to_rad(e.ry)) *
         RotationMatrix3::about_x(deg_to_rad(e.rx));
}

EulerAnglesXYZ matrix_to_euler(const RotationMatrix3& r) {
  const Mat3& m = r.matrix();
  // R = Rz(c) Ry(b) Rx(a):  m20 = -sin b, m21 = cos b sin a, m22 = cos b cos a,
  //                         m10 = sin c cos b, m00 = cos c cos b.
  const double cb = std::hypot(m(2, 1), m(2, 2));
  EulerAnglesXYZ e;
  e.ry = rad_to_deg(std::atan2(-m(2, 0), cb));
  if (cb > 1e-12) {
    e.rx = rad_to_deg(std::atan2(m(2, 1), m(2, 2)));
    e.rz = rad_to_deg(std::atan2(m(1, 0), m(0, 0)));
  } else {
    // Gimbal lock: only rz - rx (or rz + rx) is determined; pin rx to zero.
    e.rx = 0.0;
    e.rz = rad_to_deg(std::atan2(-m(0, 1), m(1, 1)));
  }
  return e;
}

TransformParams to_params(const RigidTransform& t) {
  return {matrix_to_6d(t.rotation), t.translation};
}

namespace {

// Columns orthonormal to rounding: Gram-Schmidt would only perturb the last
// bits, so the pair is used as is. This makes canonical params a fixed point.
bool orthonormal_pair(const Rotation6D& p) {
  constexpr double kTol = 1e-14;
  return std::abs(p.a1.squaredNorm() - 1.0) <= kTol && std::abs(p.a2.squaredNorm() - 1.0) <= kTol &&
         std::abs(p.a1.dot(p.a2)) <= kTol;
}

}  // namespace

RigidTransform to_transform(const TransformParams& p) {
  if (orthonormal_pair(p.rot6d)) {
    Mat3 m;
    m << p.rot6d.a1, p.rot6d.a2, p.rot6d.a1.cross(p.rot6d.a2);
    return {RotationMatrix3::from_matrix_unchecked(m), p.trans};
  }
  return {gram_schmidt_6d_to_matrix(p.rot6d), p.trans};
}

TransformParams canonicalize(const TransformParams& p) {
  return to_params(to_transform(p));
}

}  // namespace s2v
