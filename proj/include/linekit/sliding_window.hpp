#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "linekit/errors.hpp"
#include "linekit/line_geometry.hpp"

namespace linekit {

/// A landmark transferred behind the observing camera.
class CheiralityError : public DegenerateError {
 public:
  using DegenerateError::DegenerateError;
};

/// Rank deficiency beyond the fixed gauge; the message names the
/// unconstrained block.
class UnderconstrainedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-keyframe state. Velocity and IMU biases are carried but stay frozen
/// unless optimize_inertial is set by a future inertial extension; no
/// residual implemented here touches them.
struct KeyframeState {
  Eigen::Vector3d p{0.0, 0.0, 0.0};
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();  // body-to-world
  Eigen::Vector3d v{0.0, 0.0, 0.0};
  Eigen::Vector3d b_a{0.0, 0.0, 0.0};
  Eigen::Vector3d b_g{0.0, 0.0, 0.0};
  bool optimize_inertial = false;

  Pose pose_wb() const { return Pose(q, p, Frame::body, Frame::world); }
};

/// Inverse-distance point: position = bearing / lambda in the anchor
/// keyframe's camera frame.
struct PointLandmark {
  int anchor = 0;
  Eigen::Vector3d bearing{0.0, 0.0, 1.0};  // unit vector
  double lambda = 1.0;                     // 1 / meters
};

/// The full sliding-window state: keyframes, inverse-depth points,
/// orthonormal lines, and the fixed camera-in-body extrinsic.
struct WindowState {
  std::vector<KeyframeState> keyframes;
  std::vector<PointLandmark> points;
  std::vector<OrthonormalLine> lines;
  Pose T_bc = Pose(Eigen::Quaterniond::Identity(), Eigen::Vector3d::Zero(), Frame::camera,
                   Frame::body);
  int capacity = 10;

  Pose camera_pose_in_world(int kf) const { return keyframes[kf].pose_wb() * T_bc; }
  Pose world_to_camera(int kf) const { return camera_pose_in_world(kf).inverse(); }

  Eigen::Vector3d point_in_world(int index) const {
    const PointLandmark& lm = points[index];
    return camera_pose_in_world(lm.anchor) * (lm.bearing / lm.lambda);
  }
};

enum class FeatureKind { point, line };

struct SegmentObservation {
  Eigen::Vector2d midpoint{0.0, 0.0};
  Eigen::Vector2d p1{0.0, 0.0};
  Eigen::Vector2d p2{0.0, 0.0};
  double angle = 0.0;
};

/// One measurement: a pixel for a point feature or a detected segment for a
/// line feature, with its noise sigma in pixels.
struct Observation {
  int keyframe = 0;
  int feature = 0;  // index into WindowState::points or ::lines
  FeatureKind kind = FeatureKind::point;
  Eigen::Vector2d pixel{0.0, 0.0};
  SegmentObservation segment;
  double sigma = 1.0;
};

/// Huber norm of Eq.-style form: rho(s) = s for s <= 1, else 2*sqrt(s) - 1.
inline double huber(double s) {
  if (s < 0.0) throw std::invalid_argument("huber expects a nonnegative input");
  return s <= 1.0 ? s : 2.0 * std::sqrt(s) - 1.0;
}

/// Derivative of the Huber norm, used as the IRLS weight.
inline double huber_weight(double s) { return s <= 1.0 ? 1.0 : 1.0 / std::sqrt(s); }

/// Reprojection residual of an inverse-distance point observed from `host`,
/// anchored at `anchor`: reprojected pixel minus observed pixel.
inline Eigen::Vector2d point_residual(const Observation& obs, const KeyframeState& anchor,
                                      const KeyframeState& host, const PointLandmark& lm,
                                      const Pose& T_bc, const CameraModel& cam) {
  const Eigen::Vector3d x_ca = lm.bearing / lm.lambda;
  const Eigen::Vector3d x_w = (anchor.pose_wb() * T_bc) * x_ca;
  const Eigen::Vector3d x_ch = (host.pose_wb() * T_bc).inverse() * x_w;
  if (x_ch.z() <= 0.0) throw CheiralityError("point transferred behind the host camera");
  return cam.project(x_ch) - obs.pixel;
}

/// Robustified line factor: raw residual is the point-to-line distance of
/// the observed midpoint, cost is huber(residual^2 / sigma^2).
inline std::pair<double, double> line_factor_cost(const Observation& obs,
                                                  const KeyframeState& host,
                                                  const OrthonormalLine& line, const Pose& T_bc,
                                                  const CameraModel& cam) {
  const PluckerLine l_w = from_orthonormal(line);
  const PluckerLine l_c = transform_line(l_w, (host.pose_wb() * T_bc).inverse());
  const Eigen::Vector3d l = project_line(l_c, cam);
  const double r = point_line_residual(obs.segment.midpoint, l);
  return {huber(r * r / (obs.sigma * obs.sigma)), r};
}

struct SolverConfig {
  int max_iterations = 50;
  double tol = 1e-8;          // relative cost decrease
  double cost_floor = 1e-18;  // stop when total cost falls below
  double lambda_init = 1e-4;
  double lambda_factor = 10.0;
  double lambda_min = 1e-12;
  double lambda_max = 1e10;
  double min_inverse_depth = 1e-6;
  bool use_endpoints = false;  // evaluate line residual at both endpoints
};

struct IterationRecord {
  double cost = 0.0;  // cost after the step attempt
  bool accepted = false;
  double lambda = 0.0;
};

struct SolveReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::vector<IterationRecord> iterations;
  std::vector<double> accepted_costs;  // monotone trace, starts at initial_cost
  int cheirality_drops = 0;
  int degenerate_drops = 0;
  double point_rmse_px = 0.0;
  double line_rmse_px = 0.0;
  bool converged = false;
};

namespace detail {

struct FactorResidual {
  Eigen::Vector2d value{0.0, 0.0};  // line factors use component 0 (and 1 with endpoints)
  int dim = 0;
};

// Parameter layout: keyframe k > 0 owns columns 6(k-1)..6k-1 as
// (dp, dtheta); then one column per point; then four per line.
struct ParamLayout {
  int n_keyframes = 0;
  int n_points = 0;
  int n_lines = 0;

  int pose_col(int kf) const { return 6 * (kf - 1); }
  int point_col(int i) const { return 6 * (n_keyframes - 1) + i; }
  int line_col(int j) const { return 6 * (n_keyframes - 1) + n_points + 4 * j; }
  int total() const { return 6 * (n_keyframes - 1) + n_points + 4 * n_lines; }
};

// Analytic Jacobians of the point factor with respect to the host pose,
// anchor pose (both as (dp, dtheta) on T_wb) and the inverse distance.
struct PointJacobians {
  Eigen::Matrix<double, 2, 6> host;
  Eigen::Matrix<double, 2, 6> anchor;
  Eigen::Vector2d lambda;
  Eigen::Vector2d residual;
};

inline PointJacobians point_jacobians(const Observation& obs, const KeyframeState& anchor,
                                      const KeyframeState& host, const PointLandmark& lm,
                                      const Pose& T_bc, const CameraModel& cam) {
  const Eigen::Matrix3d r_bc = T_bc.rotation();
  const Eigen::Vector3d t_bc = T_bc.t;
  const Eigen::Matrix3d r_a = anchor.q.toRotationMatrix();
  const Eigen::Matrix3d r_h = host.q.toRotationMatrix();

  const Eigen::Vector3d x_ca = lm.bearing / lm.lambda;
  const Eigen::Vector3d z_body = r_bc * x_ca + t_bc;             // anchor body
  const Eigen::Vector3d x_w = r_a * z_body + anchor.p;           // world
  const Eigen::Vector3d y_body = r_h.transpose() * (x_w - host.p);  // host body
  const Eigen::Vector3d x_ch = r_bc.transpose() * (y_body - t_bc);  // host camera
  if (x_ch.z() <= 0.0) throw CheiralityError("point transferred behind the host camera");

  Eigen::Matrix<double, 2, 3> dpi;
  const double iz = 1.0 / x_ch.z();
  dpi << cam.fx * iz, 0.0, -cam.fx * x_ch.x() * iz * iz, 0.0, cam.fy * iz,
      -cam.fy * x_ch.y() * iz * iz;

  const Eigen::Matrix3d r_cw_h = r_bc.transpose() * r_h.transpose();

  PointJacobians out;
  out.residual = cam.project(x_ch) - obs.pixel;
  out.host.block<2, 3>(0, 0) = dpi * (-r_cw_h);
  out.host.block<2, 3>(0, 3) = dpi * (r_bc.transpose() * skew(y_body));
  out.anchor.block<2, 3>(0, 0) = dpi * r_cw_h;
  out.anchor.block<2, 3>(0, 3) = dpi * (-r_cw_h * r_a * skew(z_body));
  out.lambda = dpi * (-r_cw_h * r_a * r_bc * lm.bearing / (lm.lambda * lm.lambda));
  return out;
}

// Analytic Jacobians of the point-to-line residual at pixel m with respect
// to the host body pose and the orthonormal line parameters.
struct LineJacobians {
  Eigen::Matrix<double, 1, 6> host;
  Eigen::Matrix<double, 1, 4> line;
  double residual = 0.0;
};

inline LineJacobians line_jacobians(const Eigen::Vector2d& m, const KeyframeState& host,
                                    const OrthonormalLine& line, const Pose& T_bc,
                                    const CameraModel& cam) {
  const PluckerLine lw = from_orthonormal(line);
  const Eigen::Matrix3d r_cb = T_bc.rotation().transpose();
  const Eigen::Vector3d t_cb = -(r_cb * T_bc.t);
  const Eigen::Matrix3d r_h = host.q.toRotationMatrix();
  const Eigen::Matrix3d r_cw = r_cb * r_h.transpose();
  const Eigen::Vector3d t_cw = -(r_cw * host.p) + t_cb;

  const Eigen::Vector3d d_c = r_cw * lw.d;
  const Eigen::Vector3d n_c = r_cw * lw.n + t_cw.cross(d_c);

  const Eigen::Matrix3d kl = cam.line_projection();
  const Eigen::Vector3d l = kl * n_c;
  const double s2 = l.x() * l.x() + l.y() * l.y();
  if (s2 < 1e-30) throw DegenerateError("line projects through the optical center");
  const double s = std::sqrt(s2);
  const double res = (m.x() * l.x() + m.y() * l.y() + l.z()) / s;

  Eigen::Matrix<double, 1, 3> dr_dl;
  dr_dl << m.x() / s - res * l.x() / s2, m.y() / s - res * l.y() / s2, 1.0 / s;
  const Eigen::Matrix<double, 1, 3> dr_dnc = dr_dl * kl;

  LineJacobians out;
  out.residual = res;
  // Host pose: dt_cw/dp = -r_cw, dn_c/dt_cw = -[d_c]x.
  out.host.block<1, 3>(0, 0) = dr_dnc * (skew(d_c) * r_cw);
  out.host.block<1, 3>(0, 3) =
      dr_dnc * (r_cb * skew(r_h.transpose() * lw.n) + skew(t_cw) * r_cb * skew(r_h.transpose() * lw.d) +
                skew(d_c) * r_cb * skew(r_h.transpose() * host.p));

  // Line parameters, through the orthonormal update.
  const double w1 = line.W(0, 0);
  const double w2 = line.W(1, 0);
  const Eigen::Vector3d u1 = line.U.col(0);
  const Eigen::Vector3d u2 = line.U.col(1);
  const Eigen::Vector3d u3 = line.U.col(2);
  Eigen::Matrix3d du1;  // d u1 / d psi
  du1.col(0).setZero();
  du1.col(1) = -u3;
  du1.col(2) = u2;
  Eigen::Matrix3d du2;  // d u2 / d psi
  du2.col(0) = u3;
  du2.col(1).setZero();
  du2.col(2) = -u1;

  const Eigen::Matrix3d dnc_dnw = r_cw;
  const Eigen::Matrix3d dnc_ddw = skew(t_cw) * r_cw;
  out.line.block<1, 3>(0, 0) = dr_dnc * (dnc_dnw * (w1 * du1) + dnc_ddw * (w2 * du2));
  out.line(0, 3) = dr_dnc.dot(dnc_dnw * (-w2 * u1) + dnc_ddw * (w1 * u2));
  return out;
}

inline void validate_window(const WindowState& state, const std::vector<Observation>& observations) {
  if (state.keyframes.empty()) throw std::invalid_argument("empty sliding window");
  std::vector<int> point_obs(state.points.size(), 0);
  std::vector<int> line_obs(state.lines.size(), 0);
  std::vector<int> kf_obs(state.keyframes.size(), 0);
  for (const Observation& obs : observations) {
    if (obs.keyframe < 0 || obs.keyframe >= static_cast<int>(state.keyframes.size()))
      throw std::invalid_argument("observation keyframe index out of range");
    const int limit = obs.kind == FeatureKind::point ? static_cast<int>(state.points.size())
                                                     : static_cast<int>(state.lines.size());
    if (obs.feature < 0 || obs.feature >= limit)
      throw std::invalid_argument("observation feature index out of range");
    ++kf_obs[obs.keyframe];
    if (obs.kind == FeatureKind::point)
      ++point_obs[obs.feature];
    else
      ++line_obs[obs.feature];
  }
  for (std::size_t i = 0; i < state.points.size(); ++i) {
    if (point_obs[i] < 2)
      throw UnderconstrainedError("point landmark " + std::to_string(i) + " has " +
                                  std::to_string(point_obs[i]) + " observation(s), needs >= 2");
    if (state.points[i].anchor < 0 || state.points[i].anchor >= static_cast<int>(state.keyframes.size()))
      throw std::invalid_argument("point anchor index out of range");
  }
  for (std::size_t j = 0; j < state.lines.size(); ++j) {
    if (line_obs[j] < 2)
      throw UnderconstrainedError("line landmark " + std::to_string(j) + " has " +
                                  std::to_string(line_obs[j]) + " observation(s), needs >= 2");
  }
  for (std::size_t k = 1; k < state.keyframes.size(); ++k) {
    if (kf_obs[k] == 0)
      throw UnderconstrainedError("keyframe " + std::to_string(k) +
                                  " has no observations and is not gauge-fixed");
  }
}

// Total objective: plain squared cost for point factors, Huber-robustified
// squared cost for line factors, both whitened by sigma. Factors that fail
// cheirality or project degenerately are dropped and counted.
inline double evaluate_cost(const WindowState& state, const std::vector<Observation>& observations,
                            const CameraModel& cam, const SolverConfig& config, int* cheirality,
                            int* degenerate, double* point_sq = nullptr, int* point_count = nullptr,
                            double* line_sq = nullptr, int* line_count = nullptr) {
  double cost = 0.0;
  for (const Observation& obs : observations) {
    if (obs.kind == FeatureKind::point) {
      const PointLandmark& lm = state.points[obs.feature];
      try {
        const Eigen::Vector2d r = point_residual(obs, state.keyframes[lm.anchor],
                                                 state.keyframes[obs.keyframe], lm, state.T_bc, cam);
        cost += r.squaredNorm() / (obs.sigma * obs.sigma);
        if (point_sq) *point_sq += r.squaredNorm();
        if (point_count) *point_count += 2;
      } catch (const CheiralityError&) {
        if (cheirality) ++*cheirality;
      }
    } else {
      try {
        const PluckerLine l_w = from_orthonormal(state.lines[obs.feature]);
        const PluckerLine l_c =
            transform_line(l_w, (state.keyframes[obs.keyframe].pose_wb() * state.T_bc).inverse());
        const Eigen::Vector3d l = project_line(l_c, cam);
        auto add = [&](const Eigen::Vector2d& px) {
          const double r = point_line_residual(px, l);
          cost += huber(r * r / (obs.sigma * obs.sigma));
          if (line_sq) *line_sq += r * r;
          if (line_count) ++*line_count;
        };
        if (config.use_endpoints) {
          add(obs.segment.p1);
          add(obs.segment.p2);
        } else {
          add(obs.segment.midpoint);
        }
      } catch (const DegenerateError&) {
        if (degenerate) ++*degenerate;
      }
    }
  }
  return cost;
}

// Caps a rotation-manifold step; increments beyond this are outside the
// chart where the linearization means anything.
inline Eigen::VectorXd capped(const Eigen::VectorXd& v, double max_norm) {
  const double n = v.norm();
  return n > max_norm ? Eigen::VectorXd(v * (max_norm / n)) : v;
}

inline void apply_step(WindowState& state, const Eigen::VectorXd& delta, const ParamLayout& layout,
                       const SolverConfig& config) {
  for (int k = 1; k < layout.n_keyframes; ++k) {
    KeyframeState& kf = state.keyframes[k];
    const int c = layout.pose_col(k);
    kf.p += delta.segment<3>(c);
    const Eigen::Vector3d dtheta = capped(delta.segment<3>(c + 3), 0.5);
    kf.q = (kf.q * Eigen::Quaterniond(so3_exp(dtheta))).normalized();
  }
  for (int i = 0; i < layout.n_points; ++i) {
    double& lambda = state.points[i].lambda;
    lambda = std::max(config.min_inverse_depth, lambda + delta(layout.point_col(i)));
  }
  for (int j = 0; j < layout.n_lines; ++j) {
    // Line factors are the most nonlinear part of the model; a tight chart
    // radius keeps proposals where the linearization is meaningful.
    const Eigen::Vector4d d = capped(delta.segment<4>(layout.line_col(j)), 0.1);
    state.lines[j] = update_orthonormal(state.lines[j], d);
  }
}

// Block-coordinate refinement of a single line landmark against fixed
// poses: a damped 4x4 Gauss-Newton on its own factors. Midpoint-only line
// residuals can leave nearly flat directions in the joint system; solving
// each line's small block directly converges them far faster than the
// global damped steps, and every accepted sub-step lowers the total cost.
inline bool refine_line(WindowState& state, int index,
                        const std::vector<const Observation*>& obs_list, const CameraModel& cam,
                        const SolverConfig& config) {
  if (obs_list.empty()) return false;
  auto local_cost = [&](const OrthonormalLine& line) {
    double c = 0.0;
    for (const Observation* o : obs_list) {
      try {
        const PluckerLine lc = transform_line(
            from_orthonormal(line), (state.keyframes[o->keyframe].pose_wb() * state.T_bc).inverse());
        const Eigen::Vector3d l = project_line(lc, cam);
        auto add = [&](const Eigen::Vector2d& px) {
          const double r = point_line_residual(px, l);
          c += huber(r * r / (o->sigma * o->sigma));
        };
        if (config.use_endpoints) {
          add(o->segment.p1);
          add(o->segment.p2);
        } else {
          add(o->segment.midpoint);
        }
      } catch (const DegenerateError&) {
        return std::numeric_limits<double>::infinity();
      }
    }
    return c;
  };

  OrthonormalLine line = state.lines[index];
  double cost = local_cost(line);
  if (!std::isfinite(cost)) return false;
  double lam = 1e-8;
  bool changed = false;
  for (int sub = 0; sub < 4; ++sub) {
    Eigen::Matrix4d h = Eigen::Matrix4d::Zero();
    Eigen::Vector4d b = Eigen::Vector4d::Zero();
    for (const Observation* o : obs_list) {
      auto add = [&](const Eigen::Vector2d& px) {
        LineJacobians jac;
        try {
          jac = line_jacobians(px, state.keyframes[o->keyframe], line, state.T_bc, cam);
        } catch (const DegenerateError&) {
          return;
        }
        const double inv_sigma2 = 1.0 / (o->sigma * o->sigma);
        const double w = huber_weight(jac.residual * jac.residual * inv_sigma2) * inv_sigma2;
        h += w * (jac.line.transpose() * jac.line);
        b += w * (jac.line.transpose() * jac.residual);
      };
      if (config.use_endpoints) {
        add(o->segment.p1);
        add(o->segment.p2);
      } else {
        add(o->segment.midpoint);
      }
    }

    bool improved = false;
    for (int attempt = 0; attempt < 6; ++attempt) {
      Eigen::Matrix4d damped = h;
      damped.diagonal().array() += lam;
      Eigen::Vector4d d = damped.ldlt().solve(-b);
      if (!d.allFinite()) {
        lam *= 10.0;
        continue;
      }
      if (d.norm() > 0.5) d *= 0.5 / d.norm();
      const OrthonormalLine cand = update_orthonormal(line, d);
      const double c2 = local_cost(cand);
      if (c2 < cost) {
        line = cand;
        cost = c2;
        lam = std::max(lam / 10.0, 1e-12);
        improved = true;
        changed = true;
        break;
      }
      lam *= 10.0;
    }
    if (!improved) break;
  }
  if (changed) state.lines[index] = line;
  return changed;
}

// Monocular projections are invariant to rescaling the whole scene about
// the gauge camera center, so fixing keyframe 0 still leaves one scale
// degree of freedom. The scale coordinate below parameterizes that family;
// snapping back to the initial coordinate after optimization completes the
// gauge without touching the cost.
inline double scale_coordinate(const WindowState& state) {
  double sum = 0.0;
  if (!state.points.empty()) {
    for (const auto& lm : state.points) sum += std::log(lm.lambda);
    return sum / static_cast<double>(state.points.size());
  }
  if (!state.lines.empty()) {
    for (const auto& line : state.lines)
      sum += std::log(std::abs(line.W(1, 0)) / std::max(std::abs(line.W(0, 0)), 1e-300));
    return sum / static_cast<double>(state.lines.size());
  }
  return 0.0;
}

// Exact action of the scale family: camera centers move about the gauge
// center, inverse distances divide by s, line moments rescale. Residuals
// are unchanged.
inline void apply_scale(WindowState& state, double s) {
  const Eigen::Vector3d c0 = state.camera_pose_in_world(0).t;
  for (std::size_t k = 1; k < state.keyframes.size(); ++k) {
    const Eigen::Vector3d ck = state.camera_pose_in_world(static_cast<int>(k)).t;
    state.keyframes[k].p += (s - 1.0) * (ck - c0);
  }
  for (auto& lm : state.points) lm.lambda /= s;
  for (auto& line : state.lines) {
    const double theta = std::atan2(line.W(1, 0), s * line.W(0, 0));
    line.W = rot2(theta);
  }
}

// Restores the scale coordinate of the reference state. log lambda shifts
// by -log s under apply_scale, so s = exp(current - reference).
inline void snap_scale(WindowState& state, double reference_coordinate) {
  const double current = scale_coordinate(state);
  apply_scale(state, std::exp(current - reference_coordinate));
}

}  // namespace detail

/// Levenberg-Marquardt over the window with manifold updates; keyframe 0 is
/// gauge-fixed. Returns the optimized state and a report with the accepted
/// cost trace and per-factor-type RMSE.
inline std::pair<WindowState, SolveReport> optimize_window(
    const WindowState& state_in, const std::vector<Observation>& observations,
    const CameraModel& cam, const SolverConfig& config = {}) {
  detail::validate_window(state_in, observations);

  WindowState state = state_in;
  detail::ParamLayout layout{static_cast<int>(state.keyframes.size()),
                             static_cast<int>(state.points.size()),
                             static_cast<int>(state.lines.size())};
  const int n = layout.total();

  SolveReport report;
  double cost = detail::evaluate_cost(state, observations, cam, config, &report.cheirality_drops,
                                      &report.degenerate_drops);
  report.initial_cost = cost;
  report.accepted_costs.push_back(cost);
  const double gauge_scale = detail::scale_coordinate(state);

  std::vector<std::vector<const Observation*>> line_obs(state.lines.size());
  for (const Observation& obs : observations)
    if (obs.kind == FeatureKind::line) line_obs[obs.feature].push_back(&obs);

  double lambda = config.lambda_init;
  Eigen::MatrixXd h(n, n);
  Eigen::VectorXd b(n);

  auto linearize = [&](const WindowState& x) {
    h.setZero();
    b.setZero();
    for (const Observation& obs : observations) {
      const double inv_sigma2 = 1.0 / (obs.sigma * obs.sigma);
      if (obs.kind == FeatureKind::point) {
        const PointLandmark& lm = x.points[obs.feature];
        detail::PointJacobians jac;
        try {
          jac = detail::point_jacobians(obs, x.keyframes[lm.anchor], x.keyframes[obs.keyframe], lm,
                                        x.T_bc, cam);
        } catch (const CheiralityError&) {
          ++report.cheirality_drops;
          continue;
        }
        // Stack the sparse blocks of this factor.
        std::vector<std::pair<int, Eigen::Matrix<double, 2, Eigen::Dynamic>>> blocks;
        if (obs.keyframe > 0) blocks.emplace_back(layout.pose_col(obs.keyframe), jac.host);
        if (lm.anchor > 0) {
          if (lm.anchor == obs.keyframe) {
            blocks.back().second += jac.anchor;
          } else {
            blocks.emplace_back(layout.pose_col(lm.anchor), jac.anchor);
          }
        }
        blocks.emplace_back(layout.point_col(obs.feature), jac.lambda);

        const Eigen::Vector2d r = jac.residual;
        for (const auto& [ci, ji] : blocks) {
          b.segment(ci, ji.cols()) += inv_sigma2 * (ji.transpose() * r);
          for (const auto& [cj, jj] : blocks) {
            h.block(ci, cj, ji.cols(), jj.cols()) += inv_sigma2 * (ji.transpose() * jj);
          }
        }
      } else {
        auto add_line_residual = [&](const Eigen::Vector2d& px) {
          detail::LineJacobians jac;
          try {
            jac = detail::line_jacobians(px, x.keyframes[obs.keyframe], x.lines[obs.feature],
                                         x.T_bc, cam);
          } catch (const DegenerateError&) {
            ++report.degenerate_drops;
            return;
          }
          const double s = jac.residual * jac.residual * inv_sigma2;
          const double w = huber_weight(s) * inv_sigma2;

          std::vector<std::pair<int, Eigen::Matrix<double, 1, Eigen::Dynamic>>> blocks;
          if (obs.keyframe > 0) blocks.emplace_back(layout.pose_col(obs.keyframe), jac.host);
          blocks.emplace_back(layout.line_col(obs.feature), jac.line);
          for (const auto& [ci, ji] : blocks) {
            b.segment(ci, ji.cols()) += w * (ji.transpose() * jac.residual);
            for (const auto& [cj, jj] : blocks) {
              h.block(ci, cj, ji.cols(), jj.cols()) += w * (ji.transpose() * jj);
            }
          }
        };
        if (config.use_endpoints) {
          add_line_residual(obs.segment.p1);
          add_line_residual(obs.segment.p2);
        } else {
          add_line_residual(obs.segment.midpoint);
        }
      }
    }
  };

  bool needs_linearize = true;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    if (cost <= config.cost_floor) {
      report.converged = true;
      break;
    }
    if (needs_linearize) {
      linearize(state);
      needs_linearize = false;
    }

    Eigen::MatrixXd damped = h;
    damped.diagonal().array() += lambda;
    const Eigen::VectorXd delta = damped.ldlt().solve(-b);
    if (!delta.allFinite()) {
      lambda = std::min(lambda * config.lambda_factor, config.lambda_max);
      report.iterations.push_back({cost, false, lambda});
      continue;
    }

    WindowState candidate = state;
    detail::apply_step(candidate, delta, layout, config);
    const double new_cost =
        detail::evaluate_cost(candidate, observations, cam, config, nullptr, nullptr);

    if (new_cost < cost) {
      const double relative = (cost - new_cost) / std::max(cost, 1e-300);
      // Gain ratio of actual versus model reduction; the damping only
      // relaxes when the quadratic model is trustworthy, otherwise the next
      // near-undamped proposal would overshoot the nonlinear line factors
      // and waste an iteration.
      const double model_red = -(2.0 * b.dot(delta) + delta.dot(h * delta));
      const double gain = model_red > 0.0 ? (cost - new_cost) / model_red : 0.0;
      state = std::move(candidate);
      detail::snap_scale(state, gauge_scale);
      cost = new_cost;
      if (gain > 0.25) lambda = std::max(lambda / config.lambda_factor, config.lambda_min);
      report.iterations.push_back({cost, true, lambda});
      report.accepted_costs.push_back(cost);
      needs_linearize = true;
      if (relative < config.tol) {
        report.converged = true;
        break;
      }
    } else {
      lambda = lambda * config.lambda_factor;
      report.iterations.push_back({new_cost, false, lambda});
      if (lambda > config.lambda_max) break;
    }
  }

  detail::snap_scale(state, gauge_scale);
  report.final_cost = cost;
  double point_sq = 0.0, line_sq = 0.0;
  int point_count = 0, line_count = 0;
  int c_drop = 0, d_drop = 0;
  detail::evaluate_cost(state, observations, cam, config, &c_drop, &d_drop, &point_sq, &point_count,
                        &line_sq, &line_count);
  report.point_rmse_px = point_count ? std::sqrt(point_sq / point_count) : 0.0;
  report.line_rmse_px = line_count ? std::sqrt(line_sq / line_count) : 0.0;
  return {std::move(state), std::move(report)};
}

struct SlidePolicy {
  int capacity = 10;
};

struct SlideReport {
  bool dropped_oldest = false;
  int reanchored_points = 0;
  int dropped_points = 0;
  int dropped_lines = 0;
};

/// Window maintenance without a marginalization prior: below capacity the
/// new keyframe is appended; at capacity the oldest keyframe is dropped,
/// points anchored there are re-anchored to their next-oldest observing
/// keyframe (inverse distance recomputed from the current estimate, which
/// leaves reprojection residuals unchanged), and landmarks with fewer than
/// two remaining observations are removed. Observations are remapped in
/// place.
inline SlideReport slide_window(WindowState& state, const KeyframeState& new_keyframe,
                                std::vector<Observation>& observations, const SlidePolicy& policy) {
  SlideReport report;
  if (static_cast<int>(state.keyframes.size()) < policy.capacity) {
    state.keyframes.push_back(new_keyframe);
    return report;
  }
  report.dropped_oldest = true;

  // Drop observations made from keyframe 0.
  std::vector<Observation> kept_obs;
  kept_obs.reserve(observations.size());
  for (const Observation& obs : observations)
    if (obs.keyframe != 0) kept_obs.push_back(obs);

  // Remaining observation counts per landmark.
  std::vector<int> point_obs(state.points.size(), 0);
  std::vector<int> line_obs(state.lines.size(), 0);
  for (const Observation& obs : kept_obs) {
    if (obs.kind == FeatureKind::point)
      ++point_obs[obs.feature];
    else
      ++line_obs[obs.feature];
  }

  // Re-anchor points anchored at the dropped keyframe to their next-oldest
  // observing keyframe, preserving the current world-space estimate.
  std::vector<int> next_anchor(state.points.size(), -1);
  for (const Observation& obs : kept_obs) {
    if (obs.kind != FeatureKind::point) continue;
    int& a = next_anchor[obs.feature];
    if (a < 0 || obs.keyframe < a) a = obs.keyframe;
  }
  for (std::size_t i = 0; i < state.points.size(); ++i) {
    if (state.points[i].anchor != 0 || point_obs[i] < 2) continue;
    const Eigen::Vector3d x_w = state.point_in_world(static_cast<int>(i));
    const int anchor = next_anchor[i];
    const Eigen::Vector3d x_ca = state.world_to_camera(anchor) * x_w;
    const double dist = x_ca.norm();
    if (dist <= 0.0) {
      point_obs[i] = 0;  // degenerate; drop below
      continue;
    }
    state.points[i].anchor = anchor;
    state.points[i].bearing = x_ca / dist;
    state.points[i].lambda = 1.0 / dist;
    ++report.reanchored_points;
  }

  // Compact landmark lists, dropping those with fewer than two remaining
  // observations.
  std::vector<int> point_remap(state.points.size(), -1);
  std::vector<int> line_remap(state.lines.size(), -1);
  std::vector<PointLandmark> kept_points;
  std::vector<OrthonormalLine> kept_lines;
  for (std::size_t i = 0; i < state.points.size(); ++i) {
    if (point_obs[i] >= 2) {
      point_remap[i] = static_cast<int>(kept_points.size());
      kept_points.push_back(state.points[i]);
    } else {
      ++report.dropped_points;
    }
  }
  for (std::size_t j = 0; j < state.lines.size(); ++j) {
    if (line_obs[j] >= 2) {
      line_remap[j] = static_cast<int>(kept_lines.size());
      kept_lines.push_back(state.lines[j]);
    } else {
      ++report.dropped_lines;
    }
  }

  std::vector<Observation> final_obs;
  final_obs.reserve(kept_obs.size());
  for (Observation obs : kept_obs) {
    const int remapped = obs.kind == FeatureKind::point ? point_remap[obs.feature]
                                                        : line_remap[obs.feature];
    if (remapped < 0) continue;
    obs.feature = remapped;
    --obs.keyframe;
    final_obs.push_back(obs);
  }

  state.keyframes.erase(state.keyframes.begin());
  for (PointLandmark& lm : kept_points) --lm.anchor;
  state.points = std::move(kept_points);
  state.lines = std::move(kept_lines);
  state.keyframes.push_back(new_keyframe);
  observations = std::move(final_obs);
  return report;
}

/// Matched segments of one line feature across several keyframes.
struct LineTrack {
  std::vector<std::pair<int, SegmentObservation>> views;  // (keyframe, segment)
};

struct TriangulationConfig {
  double min_baseline = 0.05;  // meters between the two camera centers
  double residual_gate_sigma = 3.0;
  double sigma_px = 1.0;
  // Practical parallel-plane test: interpretation planes must subtend at
  // least this angle, otherwise the line is unobservable in the window.
  double min_plane_angle = 1.0 * std::numbers::pi / 180.0;
};

enum class TriangulationStatus {
  accepted,
  short_track,
  small_baseline,
  parallel_planes,
  degenerate_line,
  residual_gate,
};

struct TriangulationOutcome {
  int track = -1;
  TriangulationStatus status = TriangulationStatus::accepted;
  int line_index = -1;  // index into WindowState::lines when accepted
};

/// Initializes new space lines from tracks: the two observations with the
/// widest baseline triangulate via the dual Plücker construction; the line
/// is accepted only if its midpoint residual passes the gate in every
/// observing frame.
inline std::vector<TriangulationOutcome> triangulate_new_lines(WindowState& state,
                                                               const std::vector<LineTrack>& tracks,
                                                               const CameraModel& cam,
                                                               const TriangulationConfig& config = {}) {
  std::vector<TriangulationOutcome> outcomes;
  outcomes.reserve(tracks.size());
  const double gate = config.residual_gate_sigma * config.sigma_px;

  for (std::size_t t = 0; t < tracks.size(); ++t) {
    TriangulationOutcome outcome;
    outcome.track = static_cast<int>(t);
    const auto& views = tracks[t].views;
    if (views.size() < 2) {
      outcome.status = TriangulationStatus::short_track;
      outcomes.push_back(outcome);
      continue;
    }

    // Widest-baseline pair of observing keyframes.
    int best_i = -1, best_j = -1;
    double best_baseline = -1.0;
    for (std::size_t i = 0; i < views.size(); ++i) {
      for (std::size_t j = i + 1; j < views.size(); ++j) {
        const double baseline = (state.camera_pose_in_world(views[i].first).t -
                                 state.camera_pose_in_world(views[j].first).t)
                                    .norm();
        if (baseline > best_baseline) {
          best_baseline = baseline;
          best_i = static_cast<int>(i);
          best_j = static_cast<int>(j);
        }
      }
    }
    if (best_baseline <= config.min_baseline) {
      outcome.status = TriangulationStatus::small_baseline;
      outcomes.push_back(outcome);
      continue;
    }

    auto view_segment = [](const SegmentObservation& s) { return make_segment(s.p1, s.p2); };
    OrthonormalLine line;
    try {
      const Plane pi1 = plane_from_observation(state.camera_pose_in_world(views[best_i].first),
                                               view_segment(views[best_i].second), cam);
      const Plane pi2 = plane_from_observation(state.camera_pose_in_world(views[best_j].first),
                                               view_segment(views[best_j].second), cam);
      const double sin_angle = pi1.normal().normalized().cross(pi2.normal().normalized()).norm();
      if (sin_angle <= std::sin(config.min_plane_angle)) {
        outcome.status = TriangulationStatus::parallel_planes;
        outcomes.push_back(outcome);
        continue;
      }
      line = to_orthonormal(triangulate_dual_plucker(pi1, pi2));
    } catch (const DegenerateError&) {
      outcome.status = TriangulationStatus::degenerate_line;
      outcomes.push_back(outcome);
      continue;
    }

    bool ok = true;
    try {
      const PluckerLine l_w = from_orthonormal(line);
      for (const auto& [kf, seg] : views) {
        const Eigen::Vector3d l = project_line(transform_line(l_w, state.world_to_camera(kf)), cam);
        if (std::abs(point_line_residual(seg.midpoint, l)) > gate) {
          ok = false;
          break;
        }
      }
    } catch (const DegenerateError&) {
      ok = false;
    }
    if (!ok) {
      outcome.status = TriangulationStatus::residual_gate;
      outcomes.push_back(outcome);
      continue;
    }

    outcome.line_index = static_cast<int>(state.lines.size());
    state.lines.push_back(line);
    outcomes.push_back(outcome);
  }
  return outcomes;
}

}  // namespace linekit
