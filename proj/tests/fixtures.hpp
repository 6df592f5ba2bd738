#pragma once

#include "s2v/phantom.hpp"

namespace s2v::test {

// Default phantom at 1 mm, rendered once per test binary.
inline const RenderedPhantom& phantom() {
  static const RenderedPhantom p = render(default_phantom_spec({140, 120, 80}, 1.0, 7));
  return p;
}

inline SliceGeometry probe_slice() { return SliceGeometry::centered({100, 80}, 1.0); }

inline RigidTransform pose(double tx, double ty, double tz, double rx_deg = 0, double ry_deg = 0, double rz_deg = 0) {
  RigidTransform t;
  t.rotation = euler_to_matrix({rx_deg, ry_deg, rz_deg});
  t.translation = Vec3(tx, ty, tz);
  return t;
}

inline bool within(const RigidTransform& a, const RigidTransform& b, double mm, double deg) {
  const PoseError e = pose_error(a, b);
  return e.euclidean <= mm && e.geodesic <= deg;
}

}  // namespace s2v::test
