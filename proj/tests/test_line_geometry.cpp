#include <catch2/catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "linekit/line_geometry.hpp"
#include "oracles.hpp"

using namespace linekit;
using Catch::Approx;
constexpr double kPi = std::numbers::pi;

namespace {

double plucker_gap(const PluckerLine& a, const PluckerLine& b) {
  const PluckerLine na = plucker_normalized(a);
  const PluckerLine nb = plucker_normalized(b);
  Eigen::Matrix<double, 6, 1> va, vb;
  va << na.n, na.d;
  vb << nb.n, nb.d;
  return std::min((va - vb).norm(), (va + vb).norm());
}

double point_on_line_gap(const Eigen::Vector3d& x, const PluckerLine& line) {
  // For a point on the line, x cross d = n (after common normalization).
  const Eigen::Vector3d d = line.d / line.d.norm();
  const Eigen::Vector3d n = line.n / line.d.norm();
  return (x.cross(d) - n).norm();
}

}  // namespace

TEST_CASE("plane_from_observation basic geometry") {
  const CameraModel cam(400.0, 400.0, 0.0, 0.0);
  const Pose identity;
  const auto seg = make_segment({-50.0, 0.0}, {50.0, 0.0});

  const Plane plane = plane_from_observation(identity, seg, cam);
  const Eigen::Vector3d n = plane.normal().normalized();
  REQUIRE(std::abs(std::abs(n.y()) - 1.0) < 1e-12);
  REQUIRE(std::abs(plane.coeffs(3)) < 1e-12);
}

TEST_CASE("plane_from_observation passes through camera center and the true line") {
  std::mt19937_64 rng(41);
  int done = 0;
  while (done < 50) {
    const CameraModel cam(460.0, 455.0, 370.0, 235.0);
    const Pose pose_wc = oracles::random_pose(rng, 2.0);
    std::uniform_real_distribution<double> uz(2.0, 9.0);
    std::normal_distribution<double> n01(0.0, 1.0);
    const Eigen::Vector3d a_c(n01(rng), n01(rng), uz(rng));
    const Eigen::Vector3d b_c(n01(rng), n01(rng), uz(rng));
    if ((b_c - a_c).norm() < 0.3) continue;
    ++done;
    const auto seg = make_segment(cam.project(a_c), cam.project(b_c));

    const Plane plane = plane_from_observation(pose_wc, seg, cam);
    REQUIRE(std::abs(plane.eval(pose_wc.t)) < 1e-12 * (1.0 + plane.normal().norm()));

    // Any point on the world-frame 3D line lies on the plane.
    const Eigen::Vector3d aw = pose_wc * a_c;
    const Eigen::Vector3d bw = pose_wc * b_c;
    for (double t : {0.0, 0.3, 1.0, 2.5}) {
      const Eigen::Vector3d x = aw + t * (bw - aw);
      REQUIRE(std::abs(plane.eval(x)) < 1e-9 * (1.0 + plane.normal().norm() * x.norm()));
    }
  }
}

TEST_CASE("plane_from_observation rejects coincident endpoints") {
  const CameraModel cam(400.0, 400.0, 320.0, 240.0);
  LineSegment2D seg;
  seg.p1 = seg.p2 = Eigen::Vector2d(100.0, 120.0);
  REQUIRE_THROWS_AS(plane_from_observation(Pose(), seg, cam), DegenerateError);
}

TEST_CASE("triangulate_dual_plucker on coordinate planes") {
  Plane z0, y0;
  z0.coeffs = Eigen::Vector4d(0, 0, 1, 0);
  y0.coeffs = Eigen::Vector4d(0, 1, 0, 0);
  const PluckerLine line = triangulate_dual_plucker(z0, y0);
  REQUIRE(line.d.normalized().cwiseAbs().isApprox(Eigen::Vector3d(1, 0, 0), 1e-12));
  REQUIRE(line.n.norm() < 1e-12);
}

TEST_CASE("triangulate_dual_plucker on offset planes") {
  Plane z1, y0;
  z1.coeffs = Eigen::Vector4d(0, 0, 1, -1);  // z = 1
  y0.coeffs = Eigen::Vector4d(0, 1, 0, 0);   // y = 0
  const PluckerLine line = triangulate_dual_plucker(z1, y0);
  REQUIRE(plucker_is_orthogonal(line));
  REQUIRE(point_on_line_gap({0.0, 0.0, 1.0}, line) < 1e-12);
  REQUIRE(point_on_line_gap({5.0, 0.0, 1.0}, line) < 1e-12);

  // Swapping the arguments yields the same line up to homogeneous sign/scale.
  const PluckerLine swapped = triangulate_dual_plucker(y0, z1);
  REQUIRE(plucker_gap(line, swapped) < 1e-12);
}

TEST_CASE("triangulate_dual_plucker rejects parallel planes") {
  Plane a, b;
  a.coeffs = Eigen::Vector4d(0, 0, 1, -1);
  b.coeffs = Eigen::Vector4d(0, 0, 2, 3);
  REQUIRE_THROWS_AS(triangulate_dual_plucker(a, b), DegenerateError);
}

TEST_CASE("to_orthonormal axis-aligned example") {
  const PluckerLine line{{1, 0, 0}, {0, 1, 0}};
  const OrthonormalLine o = to_orthonormal(line);
  REQUIRE(o.U.isApprox(Eigen::Matrix3d::Identity(), 1e-12));
  REQUIRE(o.theta() == Approx(kPi / 4).margin(1e-12));
}

TEST_CASE("to_orthonormal is scale invariant and rejects degenerate lines") {
  std::mt19937_64 rng(7);
  const PluckerLine line = oracles::random_plucker(rng);
  const OrthonormalLine a = to_orthonormal(line);
  const OrthonormalLine b = to_orthonormal({3.7 * line.n, 3.7 * line.d});
  REQUIRE(a.U.isApprox(b.U, 1e-12));
  REQUIRE(a.W.isApprox(b.W, 1e-12));

  REQUIRE_THROWS_AS(to_orthonormal(PluckerLine{{0, 0, 0}, {0, 0, 1}}), DegenerateError);
  REQUIRE_THROWS_AS(to_orthonormal(PluckerLine{{1, 0, 0}, {0, 0, 0}}), DegenerateError);
}

TEST_CASE("to_orthonormal produces exactly orthonormal factors") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const OrthonormalLine o = to_orthonormal(oracles::random_plucker(rng));
    REQUIRE((o.U.transpose() * o.U - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    REQUIRE(o.U.determinant() == Approx(1.0).margin(1e-12));
    REQUIRE((o.W.transpose() * o.W - Eigen::Matrix2d::Identity()).norm() < 1e-12);
  }
}

TEST_CASE("from_orthonormal inverts the axis-aligned example") {
  OrthonormalLine o;
  o.W = rot2(kPi / 4);
  const PluckerLine line = from_orthonormal(o);
  REQUIRE(line.n.isApprox(Eigen::Vector3d(std::sqrt(0.5), 0, 0), 1e-12));
  REQUIRE(line.d.isApprox(Eigen::Vector3d(0, std::sqrt(0.5), 0), 1e-12));
}

TEST_CASE("orthonormal round trip") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 1000; ++i) {
    const PluckerLine line = oracles::random_plucker(rng);
    const PluckerLine back = from_orthonormal(to_orthonormal(line));
    REQUIRE(plucker_is_orthogonal(back));
    REQUIRE(std::sqrt(back.n.squaredNorm() + back.d.squaredNorm()) == Approx(1.0).margin(1e-12));
    REQUIRE(plucker_gap(line, back) < 1e-9);
  }
}

TEST_CASE("from_orthonormal with theta = 0 yields a direction-free line") {
  OrthonormalLine o;  // W = I: theta = 0
  const PluckerLine line = from_orthonormal(o);
  REQUIRE(line.d.norm() == 0.0);
  REQUIRE_THROWS_AS(to_orthonormal(line), DegenerateError);
}

TEST_CASE("transform_line identity, rotation, and composition") {
  std::mt19937_64 rng(17);
  const PluckerLine line = oracles::random_plucker(rng);

  const PluckerLine same = transform_line(line, Pose());
  REQUIRE(same.n.isApprox(line.n, 1e-14));
  REQUIRE(same.d.isApprox(line.d, 1e-14));

  const Pose rot(oracles::random_rotation(rng), Eigen::Vector3d::Zero());
  const PluckerLine rotated = transform_line(line, rot);
  REQUIRE(rotated.n.norm() == Approx(line.n.norm()));
  REQUIRE(rotated.d.norm() == Approx(line.d.norm()));
  REQUIRE(rotated.n.isApprox(rot.q * line.n, 1e-12));

  for (int i = 0; i < 100; ++i) {
    const PluckerLine l = oracles::random_plucker(rng);
    const Pose t1 = oracles::random_pose(rng);
    const Pose t2 = oracles::random_pose(rng);
    const PluckerLine two_step = transform_line(transform_line(l, t1), t2);
    const PluckerLine composed = transform_line(l, t2 * t1);
    REQUIRE((two_step.n - composed.n).norm() < 1e-10 * (1.0 + composed.n.norm()));
    REQUIRE((two_step.d - composed.d).norm() < 1e-10 * (1.0 + composed.d.norm()));
    REQUIRE(plucker_is_orthogonal(two_step));
  }
}

TEST_CASE("transform_line round trip through the inverse pose") {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 100; ++i) {
    const PluckerLine line = oracles::random_plucker(rng);
    const Pose pose = oracles::random_pose(rng);
    const PluckerLine back = transform_line(transform_line(line, pose), pose.inverse());
    REQUIRE((back.n - line.n).norm() < 1e-10 * (1.0 + line.n.norm()));
    REQUIRE((back.d - line.d).norm() < 1e-10 * (1.0 + line.d.norm()));
  }
}

TEST_CASE("project_line examples") {
  const CameraModel unit_cam(1.0, 1.0, 0.0, 0.0);
  const PluckerLine line{{0, 1, 0}, {1, 0, 0}};
  const Eigen::Vector3d l = project_line(line, unit_cam);
  REQUIRE(l.isApprox(Eigen::Vector3d(0, 1, 0), 1e-14));

  const Eigen::Vector3d scaled = project_line({3.0 * line.n, 3.0 * line.d}, unit_cam);
  REQUIRE(scaled.isApprox(3.0 * l, 1e-14));

  // A line through the optical center has n parallel to the view axis.
  REQUIRE_THROWS_AS(project_line(PluckerLine{{0, 0, 1}, {1, 0, 0}}, unit_cam), DegenerateError);
}

TEST_CASE("projected endpoints lie on the projected line") {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    const auto cfg = oracles::random_line_observation(rng);
    const PluckerLine lw = from_orthonormal(cfg.line);
    const PluckerLine lc = transform_line(lw, cfg.pose_cw);
    const Eigen::Vector3d l = project_line(lc, cfg.cam);

    // Sample points on the camera-frame line, project, test incidence.
    const Eigen::Vector3d d = lc.d.normalized();
    const Eigen::Vector3d closest = lc.d.cross(lc.n) / lc.d.squaredNorm();
    for (double t : {-1.0, 0.2, 0.7}) {
      const Eigen::Vector3d x = closest + t * d;
      if (x.z() < 0.5) continue;
      const Eigen::Vector2d px = cfg.cam.project(x);
      REQUIRE(std::abs(point_line_residual(px, l)) < 1e-9);
    }
  }
}

TEST_CASE("point_line_residual examples") {
  REQUIRE(point_line_residual({0.0, 0.0}, {0.0, 1.0, -5.0}) == Approx(-5.0));
  REQUIRE(point_line_residual({3.0, 5.0}, {0.0, 1.0, -5.0}) == Approx(0.0).margin(1e-12));
  const double r1 = point_line_residual({7.0, 2.0}, {0.3, -1.2, 4.0});
  const double r2 = point_line_residual({7.0, 2.0}, {0.3 * 9.0, -1.2 * 9.0, 4.0 * 9.0});
  REQUIRE(r1 == Approx(r2).margin(1e-12));
}

TEST_CASE("residual_jacobian matches central finite differences") {
  std::mt19937_64 rng(29);
  const double step = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const auto cfg = oracles::random_line_observation(rng);
    const ResidualJacobian jac = residual_jacobian(cfg.pose_cw, cfg.line, cfg.midpoint, cfg.cam);

    Eigen::Matrix<double, 1, 6> fd_pose;
    Eigen::Matrix<double, 1, 4> fd_line;
    oracles::fd_line_jacobians(cfg, step, fd_pose, fd_line);

    const double pose_scale = std::max(1e-6, fd_pose.norm());
    const double line_scale = std::max(1e-6, fd_line.norm());
    REQUIRE((jac.pose - fd_pose).norm() / pose_scale < 1e-5);
    REQUIRE((jac.line - fd_line).norm() / line_scale < 1e-5);
  }
}

TEST_CASE("residual_jacobian has no spurious stationarity at zero residual") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 20; ++i) {
    auto cfg = oracles::random_line_observation(rng);
    // Move the midpoint onto the projected line: residual becomes 0.
    const PluckerLine lc = transform_line(from_orthonormal(cfg.line), cfg.pose_cw);
    const Eigen::Vector3d l = project_line(lc, cfg.cam);
    const double r = point_line_residual(cfg.midpoint, l);
    const Eigen::Vector2d normal = Eigen::Vector2d(l.x(), l.y()) / std::hypot(l.x(), l.y());
    cfg.midpoint -= r * normal;
    REQUIRE(std::abs(oracles::line_residual_chain(cfg.pose_cw, cfg.line, cfg.midpoint, cfg.cam)) <
            1e-9);

    const ResidualJacobian jac = residual_jacobian(cfg.pose_cw, cfg.line, cfg.midpoint, cfg.cam);
    REQUIRE(jac.pose.norm() > 1e-6);

    // Translating the camera along the line direction never changes the
    // residual; that direction must lie in the nullspace of the translation
    // block.
    const Eigen::Vector3d along = lc.d.normalized();
    REQUIRE(std::abs(jac.pose.block<1, 3>(0, 0).dot(along)) < 1e-9);
  }
}

TEST_CASE("update_orthonormal group behavior") {
  std::mt19937_64 rng(37);
  const OrthonormalLine o = to_orthonormal(oracles::random_plucker(rng));

  const OrthonormalLine same = update_orthonormal(o, Eigen::Vector4d::Zero());
  REQUIRE(same.U.isApprox(o.U, 1e-15));
  REQUIRE(same.W.isApprox(o.W, 1e-15));

  std::normal_distribution<double> n(0.0, 0.3);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector4d delta(n(rng), n(rng), n(rng), n(rng));
    const OrthonormalLine back = update_orthonormal(update_orthonormal(o, delta), -delta);
    REQUIRE((back.U - o.U).norm() < 1e-12);
    REQUIRE((back.W - o.W).norm() < 1e-12);
  }
}

TEST_CASE("update_orthonormal agrees with the first-order update to O(|delta|^2)") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(-1e-2, 1e-2);
  double worst_ratio = 0.0;
  for (int i = 0; i < 200; ++i) {
    const OrthonormalLine o = to_orthonormal(oracles::random_plucker(rng));
    const Eigen::Vector4d delta(u(rng), u(rng), u(rng), u(rng));
    const OrthonormalLine exact = update_orthonormal(o, delta);

    Eigen::Matrix2d w_skew;
    w_skew << 0.0, -delta(3), delta(3), 0.0;
    const Eigen::Matrix3d u_first = o.U * (Eigen::Matrix3d::Identity() + skew(delta.head<3>()));
    const Eigen::Matrix2d w_first = o.W * (Eigen::Matrix2d::Identity() + w_skew);

    const double gap = (exact.U - u_first).norm() + (exact.W - w_first).norm();
    const double d2 = delta.squaredNorm();
    if (d2 > 0.0) worst_ratio = std::max(worst_ratio, gap / d2);
  }
  REQUIRE(worst_ratio < 2.0);  // gap <= C |delta|^2 with a modest constant
}

TEST_CASE("orthogonality is preserved across the line pipeline") {
  std::mt19937_64 rng(47);
  for (int i = 0; i < 1000; ++i) {
    const PluckerLine line = oracles::random_plucker(rng);
    const Pose pose = oracles::random_pose(rng);
    const PluckerLine moved = transform_line(line, pose);
    REQUIRE(std::abs(moved.n.dot(moved.d)) < 1e-9 * (moved.n.norm() * moved.d.norm() + 1.0));
  }
}
