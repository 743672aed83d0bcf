// Unit quaternions (scalar first, Hamilton convention, local-to-global action)
// together with the matrix operators used by the integrator and the
// "rotational" derivatives taken along local vector-part perturbations.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "maxcoord/errors.hpp"

namespace maxcoord {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

inline constexpr double kUnitTolerance = 1e-9;

/// Orientation quaternion with unit norm.
///
/// Every constructor either checks the norm against kUnitTolerance or
/// normalizes explicitly, and the stored value is always renormalized, so
/// the invariant s^2 + v.v = 1 holds to rounding.
class UnitQuaternion {
 public:
  UnitQuaternion() = default;

  /// Throws InvalidQuaternion when (s, v) is not unit within 1e-9.
  UnitQuaternion(double s, const Vec3& v) : s_(s), v_(v) {
    const double n = std::sqrt(s * s + v.squaredNorm());
    if (!std::isfinite(n) || std::abs(n - 1.0) > kUnitTolerance) {
      throw InvalidQuaternion("quaternion norm " + std::to_string(n) +
                              " differs from 1 beyond tolerance");
    }
    s_ /= n;
    v_ /= n;
  }

  explicit UnitQuaternion(const Vec4& c) : UnitQuaternion(c(0), c.tail<3>()) {}

  static UnitQuaternion identity() { return {}; }

  /// Normalizes an arbitrary nonzero 4-vector.
  static UnitQuaternion normalized(const Vec4& c) {
    const double n = c.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw InvalidQuaternion("cannot normalize a zero or non-finite quaternion");
    }
    UnitQuaternion q;
    q.s_ = c(0) / n;
    q.v_ = c.tail<3>() / n;
    return q;
  }

  /// Keeps the coefficients bit-for-bit (after the same unit check).  For
  /// values read back from a file.
  static UnitQuaternion exact(const Vec4& c) {
    const double n = c.norm();
    if (!std::isfinite(n) || std::abs(n - 1.0) > kUnitTolerance)
      throw InvalidQuaternion("quaternion norm " + std::to_string(n) + " differs from 1 beyond tolerance");
    UnitQuaternion q;
    q.s_ = c(0);
    q.v_ = c.tail<3>();
    return q;
  }

  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (!(n > 0.0)) throw DegenerateAxis("rotation axis has zero length");
    Vec4 c;
    c << std::cos(angle / 2), std::sin(angle / 2) * axis / n;
    return normalized(c);
  }

  [[nodiscard]] double s() const { return s_; }
  [[nodiscard]] const Vec3& v() const { return v_; }
  [[nodiscard]] Vec4 coeffs() const {
    Vec4 c;
    c << s_, v_;
    return c;
  }
  [[nodiscard]] UnitQuaternion inverse() const {
    UnitQuaternion q;
    q.s_ = s_;
    q.v_ = -v_;
    return q;
  }

 private:
  double s_ = 1.0;
  Vec3 v_ = Vec3::Zero();
};

// ---------------------------------------------------------------------------
// Operator matrices

inline Mat3 skew(const Vec3& x) {
  Mat3 m;
  m << 0, -x(2), x(1), x(2), 0, -x(0), -x(1), x(0), 0;
  return m;
}

/// Conjugation: q^-1 = T q for unit q.
inline Mat4 Tmat() {
  Mat4 t = -Mat4::Identity();
  t(0, 0) = 1.0;
  return t;
}

/// Left multiplication: q * p = L(q) p.
inline Mat4 Lmat(const Vec4& q) {
  Mat4 m;
  m(0, 0) = q(0);
  m.block<1, 3>(0, 1) = -q.tail<3>().transpose();
  m.block<3, 1>(1, 0) = q.tail<3>();
  m.block<3, 3>(1, 1) = q(0) * Mat3::Identity() + skew(q.tail<3>());
  return m;
}

/// Right multiplication: p * q = R(q) p.
inline Mat4 Rmat(const Vec4& q) {
  Mat4 m;
  m(0, 0) = q(0);
  m.block<1, 3>(0, 1) = -q.tail<3>().transpose();
  m.block<3, 1>(1, 0) = q.tail<3>();
  m.block<3, 3>(1, 1) = q(0) * Mat3::Identity() - skew(q.tail<3>());
  return m;
}

inline Mat4 Lmat(const UnitQuaternion& q) { return Lmat(q.coeffs()); }
inline Mat4 Rmat(const UnitQuaternion& q) { return Rmat(q.coeffs()); }

/// Vector-part selector.
inline Mat34 Vmat() {
  Mat34 m = Mat34::Zero();
  m.block<3, 3>(0, 1) = Mat3::Identity();
  return m;
}

inline Vec4 expand(const Vec3& x) {
  Vec4 c;
  c << 0.0, x;
  return c;
}

/// Product of two raw (not necessarily unit) quaternions.
inline Vec4 qprod(const Vec4& a, const Vec4& b) { return Lmat(a) * b; }

/// Hamilton product, renormalized.
inline UnitQuaternion qmul(const UnitQuaternion& a, const UnitQuaternion& b) {
  return UnitQuaternion::normalized(Lmat(a) * b.coeffs());
}

inline UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
  return qmul(a, b);
}

/// Rotation matrix V R(q)^T L(q) V^T (local to global).
inline Mat3 rotation_matrix(const UnitQuaternion& q) {
  const Vec4 c = q.coeffs();
  return Vmat() * Rmat(c).transpose() * Lmat(c) * Vmat().transpose();
}

inline Vec3 rotate(const UnitQuaternion& q, const Vec3& x) {
  return rotation_matrix(q) * x;
}

/// Applies q^-1: maps a global vector into the local frame of q.
inline Vec3 rotate_inverse(const UnitQuaternion& q, const Vec3& x) {
  return rotation_matrix(q).transpose() * x;
}

// ---------------------------------------------------------------------------
// Rotational derivatives

/// V L(q)^T grad_q: gradient along local perturbations q -> q * (sqrt(1-|e|^2), e).
inline Vec3 rotational_gradient(const Vec4& grad_q, const UnitQuaternion& q) {
  return Vmat() * Lmat(q).transpose() * grad_q;
}

/// jac_q L(q) V^T for an m x 4 Jacobian.
inline MatX rotational_jacobian(const Eigen::Ref<const Eigen::Matrix<double, Eigen::Dynamic, 4>>& jac_q,
                                const UnitQuaternion& q) {
  return jac_q * Lmat(q) * Vmat().transpose();
}

/// d/dq of V(q * p^ * q^-1) with q treated as a free 4-vector (q^-1 = T q).
inline Mat34 drotate_dq(const UnitQuaternion& q, const Vec3& p) {
  const Vec4 c = q.coeffs();
  const Vec4 ph = expand(p);
  const Vec4 p_qc = qprod(ph, Tmat() * c);
  const Vec4 q_p = qprod(c, ph);
  return Vmat() * (Rmat(p_qc) + Lmat(q_p) * Tmat());
}

/// d/dq of V(q^-1 * p^ * q), i.e. of rotate_inverse(q, p).
inline Mat34 drotate_inverse_dq(const UnitQuaternion& q, const Vec3& p) {
  const Vec4 c = q.coeffs();
  const Vec4 ph = expand(p);
  const Vec4 p_q = qprod(ph, c);
  const Vec4 qc_p = qprod(Tmat() * c, ph);
  return Vmat() * (Rmat(p_q) * Tmat() + Lmat(qc_p));
}

// ---------------------------------------------------------------------------
// Discrete quaternion kinematics

/// Discrete angular velocity [omega_s; omega] with |(dt/2) [omega_s; omega]| = 1.
struct DiscreteAngularVelocity {
  Vec3 omega = Vec3::Zero();
  double omega_s = 0.0;

  [[nodiscard]] Vec4 stacked() const {
    Vec4 c;
    c << omega_s, omega;
    return c;
  }
};

/// Scalar completion sqrt((2/dt)^2 - |omega|^2); throws on overflow.
inline double angvel_scalar(const Vec3& omega, double dt) {
  const double limit = 4.0 / (dt * dt);
  const double w2 = omega.squaredNorm();
  if (!(w2 < limit)) {
    throw AngularVelocityOverflow("|omega| = " + std::to_string(std::sqrt(w2)) +
                                  " reaches 2/dt = " + std::to_string(2.0 / dt));
  }
  return std::sqrt(limit - w2);
}

inline DiscreteAngularVelocity discrete_angvel(const UnitQuaternion& q_k,
                                               const UnitQuaternion& q_k1, double dt) {
  if (!(dt > 0.0)) throw Error("time step must be positive");
  const Vec4 rel = qprod(q_k.inverse().coeffs(), q_k1.coeffs());
  DiscreteAngularVelocity w;
  w.omega = (2.0 / dt) * rel.tail<3>();
  const double limit = 4.0 / (dt * dt);
  const double w2 = w.omega.squaredNorm();
  // |rel.v| <= 1 exactly; only rounding can push w2 past the limit.
  if (w2 > limit * (1.0 + 1e-12)) {
    throw AngularVelocityOverflow("relative rotation exceeds the discrete angular velocity limit");
  }
  w.omega_s = std::sqrt(std::max(0.0, limit - w2));
  return w;
}

/// q1 = (dt/2) L(q0) [omega_s; omega0], renormalized.
inline UnitQuaternion step_orientation(const UnitQuaternion& q0, const Vec3& omega0, double dt) {
  if (!(dt > 0.0)) throw Error("time step must be positive");
  Vec4 wbar;
  wbar << angvel_scalar(omega0, dt), omega0;
  return UnitQuaternion::normalized(0.5 * dt * Lmat(q0) * wbar);
}

/// d q1 / d omega0 for q1 = (dt/2) L(q0) wbar(omega0).
inline Eigen::Matrix<double, 4, 3> dstep_orientation_domega(const UnitQuaternion& q0,
                                                            const Vec3& omega0, double dt) {
  const double ws = angvel_scalar(omega0, dt);
  Eigen::Matrix<double, 4, 3> dw;
  dw.row(0) = -omega0.transpose() / ws;
  dw.bottomRows<3>() = Mat3::Identity();
  return 0.5 * dt * Lmat(q0) * dw;
}

}  // namespace maxcoord
