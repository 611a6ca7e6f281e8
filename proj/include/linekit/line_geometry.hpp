#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

#include "linekit/errors.hpp"
#include "linekit/segment.hpp"

namespace linekit {

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

inline Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w) {
  const double angle = w.norm();
  if (angle < 1e-14) return Eigen::Matrix3d::Identity() + skew(w);
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

inline Eigen::Vector3d so3_log(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

inline Eigen::Matrix2d rot2(double theta) {
  Eigen::Matrix2d w;
  w << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return w;
}

/// Space line in Plücker coordinates: n is the normal of the plane spanned
/// by the line and the frame origin, d the line direction. A valid line has
/// n·d = 0 and a nonzero direction. The coordinates are homogeneous: any
/// positive rescaling represents the same line.
struct PluckerLine {
  Eigen::Vector3d n{0.0, 0.0, 0.0};
  Eigen::Vector3d d{0.0, 0.0, 0.0};
};

inline bool plucker_is_orthogonal(const PluckerLine& line) {
  return std::abs(line.n.dot(line.d)) <= 1e-9 * (line.n.norm() * line.d.norm() + 1.0);
}

/// Scales so that ||(n, d)|| = 1 (positive scale only).
inline PluckerLine plucker_normalized(const PluckerLine& line) {
  const double s = std::sqrt(line.n.squaredNorm() + line.d.squaredNorm());
  if (s <= 0.0) throw DegenerateError("cannot normalize a zero Plücker vector");
  return {line.n / s, line.d / s};
}

/// Minimal four-parameter representation of a Plücker line: U in SO(3)
/// carries the line's frame, W in SO(2) the relative magnitude of n and d.
struct OrthonormalLine {
  Eigen::Matrix3d U = Eigen::Matrix3d::Identity();
  Eigen::Matrix2d W = Eigen::Matrix2d::Identity();

  double theta() const { return std::atan2(W(1, 0), W(0, 0)); }
};

enum class Frame { world, body, camera };

/// Rigid transform x_dst = R x_src + t, stored as a unit quaternion plus
/// translation. The frame tags are bookkeeping only.
struct Pose {
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Eigen::Vector3d t{0.0, 0.0, 0.0};
  Frame src = Frame::world;
  Frame dst = Frame::world;

  Pose() = default;
  Pose(const Eigen::Quaterniond& q_in, const Eigen::Vector3d& t_in,
       Frame src_in = Frame::world, Frame dst_in = Frame::world)
      : q(q_in.normalized()), t(t_in), src(src_in), dst(dst_in) {}
  Pose(const Eigen::Matrix3d& r, const Eigen::Vector3d& t_in,
       Frame src_in = Frame::world, Frame dst_in = Frame::world)
      : q(Eigen::Quaterniond(r).normalized()), t(t_in), src(src_in), dst(dst_in) {}

  Eigen::Matrix3d rotation() const { return q.toRotationMatrix(); }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return q * p + t; }

  Pose operator*(const Pose& other) const {
    return Pose(q * other.q, q * other.t + t, other.src, dst);
  }

  Pose inverse() const {
    const Eigen::Quaterniond qi = q.conjugate();
    return Pose(qi, -(qi * t), dst, src);
  }
};

/// Local pose perturbation: t += dt, R <- R * Exp([dtheta]x), with
/// delta = (dt, dtheta).
inline Pose perturb_pose(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta) {
  Pose out = pose;
  out.t += delta.head<3>();
  out.q = (pose.q * Eigen::Quaterniond(so3_exp(delta.tail<3>()))).normalized();
  return out;
}

/// Pinhole intrinsics plus the derived 3x3 line projection matrix.
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  CameraModel() = default;
  CameraModel(double fx_in, double fy_in, double cx_in, double cy_in)
      : fx(fx_in), fy(fy_in), cx(cx_in), cy(cy_in) {
    if (fx <= 0.0 || fy <= 0.0) throw std::invalid_argument("focal lengths must be positive");
  }

  Eigen::Matrix3d line_projection() const {
    Eigen::Matrix3d k;
    k << fy, 0.0, 0.0, 0.0, fx, 0.0, -fy * cx, -fx * cy, fx * fy;
    return k;
  }

  Eigen::Vector2d project(const Eigen::Vector3d& xc) const {
    return {fx * xc.x() / xc.z() + cx, fy * xc.y() / xc.z() + cy};
  }

  /// Ray through pixel px, z component fixed to 1.
  Eigen::Vector3d backproject(const Eigen::Vector2d& px) const {
    return {(px.x() - cx) / fx, (px.y() - cy) / fy, 1.0};
  }
};

/// Homogeneous plane coefficients (normal, offset): eval(x) = normal·x + offset.
struct Plane {
  Eigen::Vector4d coeffs{0.0, 0.0, 0.0, 0.0};

  Eigen::Vector3d normal() const { return coeffs.head<3>(); }
  double eval(const Eigen::Vector3d& x) const { return coeffs.head<3>().dot(x) + coeffs(3); }
};

/// Plane spanned by the camera center and the back-projected rays of the
/// segment endpoints, expressed in the world frame. pose_wc maps camera
/// coordinates to world coordinates.
inline Plane plane_from_observation(const Pose& pose_wc, const LineSegment2D& seg,
                                    const CameraModel& cam) {
  const Eigen::Vector3d r1 = cam.backproject(seg.p1);
  const Eigen::Vector3d r2 = cam.backproject(seg.p2);
  const Eigen::Vector3d n_c = r1.cross(r2);
  if (n_c.norm() < 1e-12 * r1.norm() * r2.norm())
    throw DegenerateError("segment endpoints back-project to parallel rays");
  const Eigen::Vector3d n_w = pose_wc.q * n_c;
  Plane plane;
  plane.coeffs.head<3>() = n_w;
  plane.coeffs(3) = -n_w.dot(pose_wc.t);  // camera center lies on the plane
  return plane;
}

/// Two-view line triangulation via the dual Plücker matrix
/// L* = pi1 pi2^T - pi2 pi1^T, whose blocks are [d]x and n.
inline PluckerLine triangulate_dual_plucker(const Plane& pi1, const Plane& pi2) {
  const Eigen::Vector3d n1 = pi1.normal();
  const Eigen::Vector3d n2 = pi2.normal();
  const Eigen::Vector3d d = n2.cross(n1);
  if (d.norm() <= 1e-8 * (n1.norm() * n2.norm()))
    throw DegenerateError("parallel planes do not intersect in a finite line");
  const Eigen::Vector3d n = pi2.coeffs(3) * n1 - pi1.coeffs(3) * n2;
  return {n, d};
}

/// Closed-form orthonormal factorization: U columns are n, d and n x d
/// normalized; W encodes (cos, sin) = (||n||, ||d||) / sqrt(||n||^2 + ||d||^2).
inline OrthonormalLine to_orthonormal(const PluckerLine& line) {
  const double nn = line.n.norm();
  const double nd = line.d.norm();
  if (nn <= 0.0 || nd <= 0.0)
    throw DegenerateError("orthonormal representation undefined for zero n or d");
  OrthonormalLine o;
  const Eigen::Vector3d u1 = line.n / nn;
  Eigen::Vector3d u3 = line.n.cross(line.d);
  u3 /= u3.norm();
  const Eigen::Vector3d u2 = u3.cross(u1);  // equals d/||d|| when n·d = 0
  o.U.col(0) = u1;
  o.U.col(1) = u2;
  o.U.col(2) = u3;
  const double s = std::sqrt(nn * nn + nd * nd);
  o.W << nn / s, -nd / s, nd / s, nn / s;
  return o;
}

/// Recovers unit-scale Plücker coordinates: (n, d) = (w1 u1, w2 u2).
inline PluckerLine from_orthonormal(const OrthonormalLine& o) {
  return {o.W(0, 0) * o.U.col(0), o.W(1, 0) * o.U.col(1)};
}

/// Transforms a line with the pose x_dst = R x_src + t:
/// n' = R n + [t]x R d, d' = R d.
inline PluckerLine transform_line(const PluckerLine& line, const Pose& pose) {
  const Eigen::Vector3d rd = pose.q * line.d;
  return {Eigen::Vector3d(pose.q * line.n) + pose.t.cross(rd), rd};
}

/// Projects the camera-frame line to homogeneous image-line coefficients
/// l = K_L n_c.
inline Eigen::Vector3d project_line(const PluckerLine& line_c, const CameraModel& cam) {
  const Eigen::Vector3d l = cam.line_projection() * line_c.n;
  const double s = std::hypot(l.x(), l.y());
  if (s == 0.0 || s < 1e-12 * l.norm())
    throw DegenerateError("line projects through the optical center");
  return l;
}

/// Signed point-to-line distance in pixels: (m_x, m_y, 1)·l / sqrt(l1^2 + l2^2).
inline double point_line_residual(const Eigen::Vector2d& m, const Eigen::Vector3d& l) {
  const double s = std::hypot(l.x(), l.y());
  if (s < 1e-15) throw DegenerateError("degenerate image line");
  return (m.x() * l.x() + m.y() * l.y() + l.z()) / s;
}

struct ResidualJacobian {
  Eigen::Matrix<double, 1, 6> pose = Eigen::Matrix<double, 1, 6>::Zero();  // (dt, dtheta)
  Eigen::Matrix<double, 1, 4> line = Eigen::Matrix<double, 1, 4>::Zero();  // (dpsi, dtheta)
};

/// Analytic chain-rule Jacobian of the point-to-line residual with respect
/// to a local perturbation of the world-to-camera pose (t += dt,
/// R <- R Exp([dtheta]x)) and to the four-parameter orthonormal update
/// (U <- U Exp([dpsi]x), W <- W Rot2(dtheta)).
inline ResidualJacobian residual_jacobian(const Pose& pose_cw, const OrthonormalLine& o,
                                          const Eigen::Vector2d& m, const CameraModel& cam) {
  const PluckerLine lw = from_orthonormal(o);
  const Eigen::Matrix3d r = pose_cw.rotation();
  const Eigen::Vector3d rd = r * lw.d;
  const Eigen::Vector3d n_c = r * lw.n + pose_cw.t.cross(rd);

  const Eigen::Matrix3d kl = cam.line_projection();
  const Eigen::Vector3d l = kl * n_c;
  const double s2 = l.x() * l.x() + l.y() * l.y();
  if (s2 < 1e-30) throw DegenerateError("line projects through the optical center");
  const double s = std::sqrt(s2);
  const double res = (m.x() * l.x() + m.y() * l.y() + l.z()) / s;

  Eigen::Matrix<double, 1, 3> dr_dl;
  dr_dl << m.x() / s - res * l.x() / s2, m.y() / s - res * l.y() / s2, 1.0 / s;
  const Eigen::Matrix<double, 1, 3> dr_dnc = dr_dl * kl;

  ResidualJacobian jac;
  const Eigen::Matrix3d t_hat = skew(pose_cw.t);
  jac.pose.block<1, 3>(0, 0) = dr_dnc * (-skew(rd));
  jac.pose.block<1, 3>(0, 3) = dr_dnc * (-r * skew(lw.n) - t_hat * r * skew(lw.d));

  const double w1 = o.W(0, 0);
  const double w2 = o.W(1, 0);
  const Eigen::Vector3d u1 = o.U.col(0);
  const Eigen::Vector3d u2 = o.U.col(1);
  const Eigen::Vector3d u3 = o.U.col(2);
  // d u1 / d psi = -U [e1]x = [0, -u3, u2]; d u2 / d psi = -U [e2]x = [u3, 0, -u1].
  Eigen::Matrix3d du1;
  du1.col(0).setZero();
  du1.col(1) = -u3;
  du1.col(2) = u2;
  Eigen::Matrix3d du2;
  du2.col(0) = u3;
  du2.col(1).setZero();
  du2.col(2) = -u1;

  const Eigen::Matrix3d dnc_dnw = r;
  const Eigen::Matrix3d dnc_ddw = t_hat * r;
  jac.line.block<1, 3>(0, 0) = dr_dnc * (dnc_dnw * (w1 * du1) + dnc_ddw * (w2 * du2));
  jac.line(0, 3) = dr_dnc.dot(dnc_dnw * (-w2 * u1) + dnc_ddw * (w1 * u2));
  return jac;
}

/// Exact manifold update U <- U Exp([dpsi]x), W <- W Rot2(dtheta) with
/// delta = (dpsi, dtheta); agrees with the first-order update
/// U (I + [dpsi]x) to second order and keeps both factors orthonormal.
inline OrthonormalLine update_orthonormal(const OrthonormalLine& o, const Eigen::Vector4d& delta) {
  OrthonormalLine out;
  out.U = o.U * so3_exp(delta.head<3>());
  out.W = o.W * rot2(delta(3));
  return out;
}

}  // namespace linekit
