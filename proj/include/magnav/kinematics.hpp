#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace magnav::kin {

using JointVector = Eigen::Matrix<double, 6, 1>;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Pose {
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
};

// Standard DH convention: A_i = Rz(theta_i) Tz(d_i) Tx(a_i) Rx(alpha_i)
struct DhParameters {
  std::array<double, 6> a;
  std::array<double, 6> d;
  std::array<double, 6> alpha;

  static DhParameters ur5() {
    DhParameters p;
    p.a = {0.0, -0.425, -0.39225, 0.0, 0.0, 0.0};
    p.d = {0.089159, 0.0, 0.0, 0.10915, 0.09465, 0.0823};
    p.alpha = {1.5707963267948966, 0.0, 0.0, 1.5707963267948966,
               -1.5707963267948966, 0.0};
    return p;
  }
};

// Fixed working plane: tool at height z with a constant orientation,
// magnet face parallel to the table.
struct PlaneConstraint {
  double z = 0.10;
  Mat3 rotation;

  // yaw about the downward tool axis; the default was chosen so the
  // wrist stays well conditioned across the whole workspace
  static PlaneConstraint tool_down(double z, double yaw);
};

Pose forward_kinematics(const DhParameters& dh, const JointVector& q);

struct IkResult {
  std::vector<JointVector> solutions;  // empty: target unreachable
  bool singular = false;  // wrist center on base axis or wrist aligned
};

IkResult inverse_kinematics(const DhParameters& dh, const Pose& target);

// Nearest candidate by Euclidean joint distance; ties resolved toward
// the lower candidate index.  Precondition: candidates nonempty.
JointVector select_solution(const std::vector<JointVector>& candidates,
                            const JointVector& reference);

Pose plane_target(const PlaneConstraint& plane, const Vec2& xy);

// Elbow-up tabletop posture used as the branch reference before any
// solution has been selected.
JointVector home_joints();

double normalize_angle(double a);  // into (-pi, pi]

}  // namespace magnav::kin
