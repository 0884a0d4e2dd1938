#pragma once

// Quaternion, dual-quaternion and exponential-map algebra.
//
// Storage order is (s, x, y, z). Algebra operations never canonicalize the
// double cover; only the logarithm and the twist/swing split look at the sign
// of the scalar part.

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dqik {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

enum class Axis { X = 0, Y = 1, Z = 2 };

inline char axis_name(Axis a) { return "xyz"[static_cast<int>(a)]; }

template <typename Scalar>
Vector3<Scalar> axis_vector(Axis a) {
  Vector3<Scalar> v = Vector3<Scalar>::Zero();
  v[static_cast<int>(a)] = Scalar(1);
  return v;
}

template <typename Scalar>
struct Quaternion {
  Scalar s{1}, x{0}, y{0}, z{0};

  Quaternion() = default;
  Quaternion(Scalar s_, Scalar x_, Scalar y_, Scalar z_) : s(s_), x(x_), y(y_), z(z_) {}
  Quaternion(Scalar s_, const Vector3<Scalar>& v) : s(s_), x(v.x()), y(v.y()), z(v.z()) {}

  static Quaternion identity() { return {1, 0, 0, 0}; }
  static Quaternion zero() { return {0, 0, 0, 0}; }
  /// Translation quaternion (0, t).
  static Quaternion pure(const Vector3<Scalar>& t) { return {0, t}; }

  Vector3<Scalar> vec() const { return {x, y, z}; }
  Scalar component(Axis a) const { return (&x)[static_cast<int>(a)]; }

  Scalar squared_norm() const { return s * s + x * x + y * y + z * z; }
  Scalar norm() const { return std::sqrt(squared_norm()); }
  bool is_unit(Scalar tol = Scalar(1e-9)) const { return std::abs(squared_norm() - 1) <= tol; }

  Quaternion conjugate() const { return {s, -x, -y, -z}; }
  Quaternion normalized() const {
    const Scalar n = norm();
    return {s / n, x / n, y / n, z / n};
  }

  friend Quaternion operator*(const Quaternion& a, const Quaternion& b) {
    // (s0 s1 - v0.v1, s0 v1 + s1 v0 + v0 x v1)
    return {a.s * b.s - a.x * b.x - a.y * b.y - a.z * b.z,
            a.s * b.x + b.s * a.x + a.y * b.z - a.z * b.y,
            a.s * b.y + b.s * a.y + a.z * b.x - a.x * b.z,
            a.s * b.z + b.s * a.z + a.x * b.y - a.y * b.x};
  }
  friend Quaternion operator+(const Quaternion& a, const Quaternion& b) {
    return {a.s + b.s, a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend Quaternion operator-(const Quaternion& a, const Quaternion& b) {
    return {a.s - b.s, a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend Quaternion operator-(const Quaternion& a) { return {-a.s, -a.x, -a.y, -a.z}; }
  friend Quaternion operator*(Scalar k, const Quaternion& a) { return {k * a.s, k * a.x, k * a.y, k * a.z}; }
  friend Quaternion operator*(const Quaternion& a, Scalar k) { return k * a; }

  friend bool operator==(const Quaternion&, const Quaternion&) = default;
};

template <typename Scalar>
Scalar max_abs_diff(const Quaternion<Scalar>& a, const Quaternion<Scalar>& b) {
  using std::abs;
  using std::max;
  return max(max(abs(a.s - b.s), abs(a.x - b.x)), max(abs(a.y - b.y), abs(a.z - b.z)));
}

/// Distance to b modulo the double cover.
template <typename Scalar>
Scalar max_abs_diff_up_to_sign(const Quaternion<Scalar>& a, const Quaternion<Scalar>& b) {
  return std::min(max_abs_diff(a, b), max_abs_diff(a, -b));
}

template <typename Scalar>
Quaternion<Scalar> quat_mul(const Quaternion<Scalar>& a, const Quaternion<Scalar>& b) {
  return a * b;
}

template <typename Scalar>
Quaternion<Scalar> quat_conjugate(const Quaternion<Scalar>& q) {
  return q.conjugate();
}

template <typename Scalar>
Quaternion<Scalar> quat_from_axis_angle(const Vector3<Scalar>& axis, Scalar angle) {
  if (angle == Scalar(0)) return Quaternion<Scalar>::identity();
  if (std::abs(axis.norm() - 1) > Scalar(1e-6))
    throw std::invalid_argument("quat_from_axis_angle: axis is not unit length");
  const Scalar half = angle / 2;
  return {std::cos(half), axis * std::sin(half)};
}

/// Rotation by a single principal axis; exact zeros off-axis.
template <typename Scalar>
Quaternion<Scalar> quat_about(Axis axis, Scalar angle) {
  Quaternion<Scalar> q{std::cos(angle / 2), 0, 0, 0};
  (&q.x)[static_cast<int>(axis)] = std::sin(angle / 2);
  return q;
}

/// Rotates p by unit q (q p q*).
template <typename Scalar>
Vector3<Scalar> quat_rotate(const Quaternion<Scalar>& q, const Vector3<Scalar>& p) {
  if (!q.is_unit(Scalar(1e-6))) throw std::invalid_argument("quat_rotate: quaternion is not unit");
  // p + 2 s (v x p) + 2 v x (v x p)
  const Vector3<Scalar> v = q.vec();
  const Vector3<Scalar> t = 2 * v.cross(p);
  return p + q.s * t + v.cross(t);
}

/// Logarithm of a unit quaternion as a rotation vector n*theta, theta in [0, pi].
template <typename Scalar>
Vector3<Scalar> quat_exp_to_expmap(const Quaternion<Scalar>& q_in) {
  const Quaternion<Scalar> q = q_in.s < 0 ? -q_in : q_in;
  const Vector3<Scalar> v = q.vec();
  const Scalar vn = v.norm();
  if (vn == Scalar(0)) return Vector3<Scalar>::Zero();
  Scalar k;
  if (vn < Scalar(1e-8) && q.s > Scalar(0.5)) {
    // 2 atan(v/s)/v ~ (2/s)(1 - v^2/(3 s^2))
    k = (2 / q.s) * (1 - vn * vn / (3 * q.s * q.s));
  } else {
    k = 2 * std::atan2(vn, q.s) / vn;
  }
  return k * v;
}

template <typename Scalar>
Quaternion<Scalar> expmap_to_quat(const Vector3<Scalar>& w) {
  const Scalar theta = w.norm();
  Scalar k;  // sin(theta/2)/theta
  if (theta < Scalar(1e-4)) {
    const Scalar t2 = theta * theta;
    k = Scalar(0.5) - t2 / 48 + t2 * t2 / 3840;
  } else {
    k = std::sin(theta / 2) / theta;
  }
  return {std::cos(theta / 2), k * w};
}

/// Shifts rotation vectors longer than pi to the equivalent rotation (1 - 2pi/|w|) w.
template <typename Scalar>
Vector3<Scalar> expmap_regularize(const Vector3<Scalar>& w) {
  const Scalar theta = w.norm();
  if (theta <= std::numbers::pi_v<Scalar>) return w;
  return (1 - 2 * std::numbers::pi_v<Scalar> / theta) * w;
}

/// Dual scalar a + eps b.
template <typename Scalar>
struct DualNumber {
  Scalar real{0}, dual{0};
};

enum class TransformOrder {
  RotThenTrans,  // q_d = 1/2 rot * q_pos
  TransThenRot,  // q_d = 1/2 q_pos * rot
};

template <typename Scalar>
struct DualQuaternion {
  using Quat = Quaternion<Scalar>;

  Quat real{Quat::identity()};
  Quat dual{Quat::zero()};

  DualQuaternion() = default;
  DualQuaternion(const Quat& r, const Quat& d) : real(r), dual(d) {}

  static DualQuaternion identity() { return {}; }
  static DualQuaternion zero() { return {Quat::zero(), Quat::zero()}; }

  DualQuaternion conjugate() const { return {real.conjugate(), dual.conjugate()}; }

  /// q q*: real part |q_r|^2, dual part 2 q_r.q_d.
  DualNumber<Scalar> norm() const {
    const Quat n = (*this * conjugate()).real;
    const Quat d = real * dual.conjugate() + dual * real.conjugate();
    return {n.s, d.s};
  }

  /// q_r* q_d + q_d* q_r, zero for a rigid transform.
  Quat unity_residual() const { return real.conjugate() * dual + dual.conjugate() * real; }

  bool is_unit(Scalar tol = Scalar(1e-9)) const {
    if (!real.is_unit(tol)) return false;
    const Quat u = unity_residual();
    return std::abs(u.s) <= tol && std::abs(u.x) <= tol && std::abs(u.y) <= tol && std::abs(u.z) <= tol;
  }

  friend DualQuaternion operator*(const DualQuaternion& a, const DualQuaternion& b) {
    return {a.real * b.real, a.real * b.dual + a.dual * b.real};
  }
  friend DualQuaternion operator+(const DualQuaternion& a, const DualQuaternion& b) {
    return {a.real + b.real, a.dual + b.dual};
  }
  friend DualQuaternion operator*(Scalar k, const DualQuaternion& a) { return {k * a.real, k * a.dual}; }

  friend bool operator==(const DualQuaternion&, const DualQuaternion&) = default;
};

template <typename Scalar>
Scalar max_abs_diff(const DualQuaternion<Scalar>& a, const DualQuaternion<Scalar>& b) {
  return std::max(max_abs_diff(a.real, b.real), max_abs_diff(a.dual, b.dual));
}

template <typename Scalar>
DualQuaternion<Scalar> dq_mul(const DualQuaternion<Scalar>& a, const DualQuaternion<Scalar>& b) {
  return a * b;
}

template <typename Scalar>
DualQuaternion<Scalar> dq_add(const DualQuaternion<Scalar>& a, const DualQuaternion<Scalar>& b) {
  return a + b;
}

template <typename Scalar>
DualQuaternion<Scalar> dq_scale(Scalar k, const DualQuaternion<Scalar>& a) {
  return k * a;
}

template <typename Scalar>
DualQuaternion<Scalar> dq_conjugate(const DualQuaternion<Scalar>& a) {
  return a.conjugate();
}

template <typename Scalar>
DualNumber<Scalar> dq_norm(const DualQuaternion<Scalar>& a) {
  return a.norm();
}

namespace detail {
template <typename Scalar>
void require_unit(const Quaternion<Scalar>& q, const char* what) {
  if (!q.is_unit(Scalar(1e-6))) throw std::invalid_argument(std::string(what) + ": rotation is not unit");
}
}  // namespace detail

template <typename Scalar>
DualQuaternion<Scalar> dq_pure_translation(const Vector3<Scalar>& t) {
  return {Quaternion<Scalar>::identity(), Scalar(0.5) * Quaternion<Scalar>::pure(t)};
}

template <typename Scalar>
DualQuaternion<Scalar> dq_pure_rotation(const Quaternion<Scalar>& q) {
  detail::require_unit(q, "dq_pure_rotation");
  return {q, Quaternion<Scalar>::zero()};
}

template <typename Scalar>
DualQuaternion<Scalar> dq_from_rot_trans(const Quaternion<Scalar>& rot, const Vector3<Scalar>& trans,
                                         TransformOrder order) {
  detail::require_unit(rot, "dq_from_rot_trans");
  const Quaternion<Scalar> t = Quaternion<Scalar>::pure(trans);
  const Quaternion<Scalar> d = order == TransformOrder::RotThenTrans ? rot * t : t * rot;
  return {rot, Scalar(0.5) * d};
}

template <typename Scalar>
struct RotTrans {
  Quaternion<Scalar> rotation;
  Vector3<Scalar> translation;
};

/// Inverse of dq_from_rot_trans for the given order.
template <typename Scalar>
RotTrans<Scalar> dq_to_rot_trans(const DualQuaternion<Scalar>& a,
                                 TransformOrder order = TransformOrder::RotThenTrans) {
  if (!a.is_unit(Scalar(1e-6))) throw std::invalid_argument("dq_to_rot_trans: not a unit dual quaternion");
  const Quaternion<Scalar> t = order == TransformOrder::RotThenTrans ? a.real.conjugate() * a.dual
                                                                     : a.dual * a.real.conjugate();
  return {a.real, Scalar(2) * t.vec()};
}

/// World translation of a transform, i.e. where it maps the origin.
template <typename Scalar>
Vector3<Scalar> dq_translation(const DualQuaternion<Scalar>& a) {
  return Scalar(2) * (a.dual * a.real.conjugate()).vec();
}

template <typename Scalar>
Vector3<Scalar> dq_transform_point(const DualQuaternion<Scalar>& a, const Vector3<Scalar>& p) {
  return quat_rotate(a.real, p) + dq_translation(a);
}

template <typename Scalar>
struct TwistSwingPair {
  Quaternion<Scalar> twist;
  Quaternion<Scalar> swing;
  Axis axis{Axis::X};
  /// Set when the rotation was a pure half-turn swing and no twist could be extracted.
  bool degenerate{false};
};

/// Splits unit q into swing * twist, with the twist about `axis`.
template <typename Scalar>
TwistSwingPair<Scalar> twist_swing_decompose(const Quaternion<Scalar>& q, Axis axis) {
  const Scalar qs = q.s, qx = q.x, qy = q.y, qz = q.z;
  const Scalar qa = q.component(axis);
  const Scalar n2 = qs * qs + qa * qa;
  if (n2 < Scalar(1e-12)) return {Quaternion<Scalar>::identity(), q, axis, true};
  const Scalar n = std::sqrt(n2);

  // Components of q * twist^* written out per axis, so the on-axis
  // swing component is exactly zero.
  switch (axis) {
    case Axis::X:
      return {{qs / n, qx / n, 0, 0}, {n, 0, (qs * qy - qx * qz) / n, (qs * qz + qx * qy) / n}, axis, false};
    case Axis::Y:
      return {{qs / n, 0, qy / n, 0}, {n, (qs * qx + qy * qz) / n, 0, (qs * qz - qx * qy) / n}, axis, false};
    case Axis::Z:
      return {{qs / n, 0, 0, qz / n}, {n, (qs * qx - qy * qz) / n, (qs * qy + qx * qz) / n, 0}, axis, false};
  }
  throw std::invalid_argument("twist_swing_decompose: bad axis");
}

/// Signed twist angle in (-pi, pi] about the pair's axis.
template <typename Scalar>
Scalar twist_angle(const TwistSwingPair<Scalar>& p) {
  Scalar a = 2 * std::atan2(p.twist.component(p.axis), p.twist.s);
  if (a > std::numbers::pi_v<Scalar>) a -= 2 * std::numbers::pi_v<Scalar>;
  if (a <= -std::numbers::pi_v<Scalar>) a += 2 * std::numbers::pi_v<Scalar>;
  return a;
}

using Vector3d = Vector3<double>;
using Quaterniond = Quaternion<double>;
using DualQuaterniond = DualQuaternion<double>;

}  // namespace dqik
