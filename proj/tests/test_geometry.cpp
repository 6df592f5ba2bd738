#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "s2v/error.hpp"
#include "s2v/geometry.hpp"

using namespace s2v;

namespace {

double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

RotationMatrix3 random_rotation(std::mt19937_64& rng) {
  // Uniform unit quaternion.
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return RotationMatrix3::from_matrix_unchecked(q.toRotationMatrix());
}

RigidTransform random_transform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  return {random_rotation(rng), Vec3(u(rng), u(rng), u(rng))};
}

}  // namespace

TEST_CASE("matrix_to_6d returns the first two columns") {
  const Rotation6D id = matrix_to_6d(RotationMatrix3::identity());
  CHECK(id.a1 == Vec3(1, 0, 0));
  CHECK(id.a2 == Vec3(0, 1, 0));

  const Rotation6D rz = matrix_to_6d(RotationMatrix3::about_z(std::numbers::pi / 2));
  CHECK((rz.a1 - Vec3(0, 1, 0)).norm() < 1e-15);
  CHECK((rz.a2 - Vec3(-1, 0, 0)).norm() < 1e-15);
}

TEST_CASE("gram_schmidt_6d_to_matrix examples") {
  CHECK(max_abs(gram_schmidt_6d_to_matrix({Vec3(1, 0, 0), Vec3(0, 1, 0)}).matrix() - Mat3::Identity()) == 0.0);
  CHECK(max_abs(gram_schmidt_6d_to_matrix({Vec3(2, 0, 0), Vec3(1, 1, 0)}).matrix() - Mat3::Identity()) < 1e-15);

  const auto degenerate = [](const Rotation6D& p) {
    try {
      gram_schmidt_6d_to_matrix(p);
    } catch (const Error& e) {
      return e.code() == ErrorCode::DegenerateInput;
    }
    return false;
  };
  CHECK(degenerate({Vec3(0, 0, 0), Vec3(0, 1, 0)}));
  CHECK(degenerate({Vec3(1, 0, 0), Vec3(3, 0, 0)}));
  CHECK(degenerate({Vec3(1e-12, 0, 0), Vec3(0, 1, 0)}));
}

TEST_CASE("gram_schmidt output satisfies the rotation invariants for arbitrary pairs") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const Rotation6D p{Vec3(n(rng), n(rng), n(rng)), Vec3(n(rng), n(rng), n(rng))};
    const Mat3 m = gram_schmidt_6d_to_matrix(p).matrix();
    CHECK(RotationMatrix3::is_valid(m));
    CHECK((m.col(0) - p.a1.normalized()).norm() < 1e-12);
  }
}

TEST_CASE("6D round trip on 10,000 random rotations") {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const RotationMatrix3 r = random_rotation(rng);
    worst = std::max(worst, max_abs(gram_schmidt_6d_to_matrix(matrix_to_6d(r)).matrix() - r.matrix()));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("6D representation is continuous in the rotation") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const RotationMatrix3 r = random_rotation(rng);
    const Rotation6D base = matrix_to_6d(r);
    for (double eps : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
      const Rotation6D moved = matrix_to_6d(r * RotationMatrix3::about_z(eps));
      const double d = std::sqrt((moved.a1 - base.a1).squaredNorm() + (moved.a2 - base.a2).squaredNorm());
      CHECK(d <= 2.0 * eps);
    }
  }
}

TEST_CASE("RotationMatrix3 validation") {
  CHECK_NOTHROW(RotationMatrix3::from_matrix(Mat3::Identity()));
  Mat3 reflection = Mat3::Identity();
  reflection(2, 2) = -1.0;
  CHECK_THROWS_AS(RotationMatrix3::from_matrix(reflection), Error);
  CHECK_THROWS_AS(RotationMatrix3::from_matrix(2.0 * Mat3::Identity()), Error);
}

TEST_CASE("geodesic_error examples") {
  const RotationMatrix3 id;
  CHECK(geodesic_error(id, id) == 0.0);
  CHECK(geodesic_error(RotationMatrix3::about_z(std::numbers::pi / 2), id) == doctest::Approx(90.0).epsilon(1e-12));
  CHECK(geodesic_error(RotationMatrix3::about_x(std::numbers::pi), id) == doctest::Approx(180.0).epsilon(1e-12));
}

TEST_CASE("geodesic_error is symmetric, bounded and satisfies the triangle inequality") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const RotationMatrix3 a = random_rotation(rng), b = random_rotation(rng), c = random_rotation(rng);
    const double ab = geodesic_error(a, b);
    CHECK(ab == doctest::Approx(geodesic_error(b, a)).epsilon(1e-12));
    CHECK(ab >= 0.0);
    CHECK(ab <= 180.0);
    CHECK(geodesic_error(a, c) <= ab + geodesic_error(b, c) + 1e-9);
  }
}

TEST_CASE("geodesic_error recovers the axis-angle magnitude") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> phi(-180.0, 180.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
    const double angle = phi(rng);
    const RotationMatrix3 r = RotationMatrix3::about_axis(axis, deg_to_rad(angle));
    CHECK(std::abs(geodesic_error(r, RotationMatrix3::identity()) - std::abs(angle)) < 1e-7);
  }
}

TEST_CASE("compose examples and properties") {
  std::mt19937_64 rng(5);
  const RigidTransform t = random_transform(rng);
  const RigidTransform same = compose(t, RigidTransform::identity());
  CHECK(max_abs(same.rotation.matrix() - t.rotation.matrix()) == 0.0);
  CHECK((same.translation - t.translation).norm() == 0.0);

  const RigidTransform id = compose(t, t.inverse());
  CHECK(max_abs(id.rotation.matrix() - Mat3::Identity()) < 1e-9);
  CHECK(id.translation.norm() < 1e-9);

  const RigidTransform sum =
      compose(RigidTransform::from_translation(Vec3(1, 2, 3)), RigidTransform::from_translation(Vec3(4, 5, 6)));
  CHECK(sum.translation == Vec3(5, 7, 9));
  CHECK(sum.rotation.matrix() == Mat3::Identity());

  for (int i = 0; i < 500; ++i) {
    const RigidTransform a = random_transform(rng), b = random_transform(rng), c = random_transform(rng);
    const RigidTransform left = compose(compose(a, b), c), right = compose(a, compose(b, c));
    CHECK(max_abs(left.rotation.matrix() - right.rotation.matrix()) < 1e-9);
    CHECK((left.translation - right.translation).norm() < 1e-9);
    const Vec3 p(1.5, -2.0, 7.0);
    CHECK((compose(a, b).apply(p) - a.apply(b.apply(p))).norm() < 1e-9);
  }
}

TEST_CASE("euler_to_matrix examples") {
  CHECK(max_abs(euler_to_matrix({0, 0, 0}).matrix() - Mat3::Identity()) == 0.0);
  CHECK(max_abs(euler_to_matrix({0, 0, 90}).matrix() - RotationMatrix3::about_z(std::numbers::pi / 2).matrix()) <
        1e-15);
  CHECK(std::abs(geodesic_error(euler_to_matrix({10, 0, 0}), RotationMatrix3::identity()) - 10.0) < 1e-9);
}

TEST_CASE("euler_to_matrix uses the fixed-frame z*y*x order") {
  const EulerAnglesXYZ e{20, -35, 50};
  const Mat3 expected = RotationMatrix3::about_z(deg_to_rad(50)).matrix() *
                        RotationMatrix3::about_y(deg_to_rad(-35)).matrix() *
                        RotationMatrix3::about_x(deg_to_rad(20)).matrix();
  CHECK(max_abs(euler_to_matrix(e).matrix() - expected) < 1e-15);
}

TEST_CASE("euler round trip for |rx|, |ry| < 89 degrees") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> small(-88.9, 88.9), any(-180.0, 180.0);
  for (int i = 0; i < 5000; ++i) {
    const EulerAnglesXYZ e{small(rng), small(rng), any(rng)};
    const EulerAnglesXYZ back = matrix_to_euler(euler_to_matrix(e));
    CHECK(std::abs(back.rx - e.rx) < 1e-6);
    CHECK(std::abs(back.ry - e.ry) < 1e-6);
    double dz = std::fmod(std::abs(back.rz - e.rz), 360.0);
    CHECK(std::min(dz, 360.0 - dz) < 1e-6);
  }
}

TEST_CASE("canonical params are idempotent") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    TransformParams p;
    p.rot6d = {Vec3(n(rng), n(rng), n(rng)), Vec3(n(rng), n(rng), n(rng))};
    p.trans = Vec3(n(rng), n(rng), n(rng));
    const TransformParams once = canonicalize(p);
    const TransformParams twice = canonicalize(once);
    CHECK(once.to_vector() == twice.to_vector());
    const TransformParams via = to_params(to_transform(once));
    CHECK(via.to_vector() == once.to_vector());
  }
}

TEST_CASE("TransformParams vector layout") {
  TransformParams p;
  p.rot6d = {Vec3(1, 2, 3), Vec3(4, 5, 6)};
  p.trans = Vec3(7, 8, 9);
  const TransformParams::Vector v = p.to_vector();
  for (int i = 0; i < 9; ++i) CHECK(v[i] == i + 1);
  CHECK(TransformParams::from_vector(v).to_vector() == v);
  CHECK_FALSE(TransformParams::is_translation_index(5));
  CHECK(TransformParams::is_translation_index(6));
}

TEST_CASE("inverse composes to identity on both sides") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    const RigidTransform t = random_transform(rng);
    const RigidTransform a = compose(t.inverse(), t);
    CHECK(max_abs(a.rotation.matrix() - Mat3::Identity()) < 1e-9);
    CHECK(a.translation.norm() < 1e-9);
  }
}
