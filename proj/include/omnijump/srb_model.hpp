#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "omnijump/common.hpp"
#include "omnijump/rotation.hpp"

namespace omnijump {

/// Leg order: front-left, front-right, rear-left, rear-right.
enum class Leg : int { FL = 0, FR = 1, RL = 2, RR = 3 };

struct LegGeometry {
  std::array<Vec3, kNumLegs> hip_offset{
      Vec3(0.19, 0.049, 0.0), Vec3(0.19, -0.049, 0.0), Vec3(-0.19, 0.049, 0.0),
      Vec3(-0.19, -0.049, 0.0)};
  double l1 = 0.062;  // abduction offset
  double l2 = 0.209;  // thigh
  double l3 = 0.195;  // shank
};

/// Single-rigid-body model with massless 3-DoF legs.
struct SrbModel {
  double mass = 9.0;
  Mat3 inertia = Vec3(0.07, 0.26, 0.242).asDiagonal();
  LegGeometry legs;
  double tau_max = 24.0;
  double g_mag = 9.81;

  Vec3 gravity() const { return Vec3(0.0, 0.0, -g_mag); }

  /// +1 for left legs, -1 for right legs.
  static double side_sign(int leg) { return (leg % 2 == 0) ? 1.0 : -1.0; }

  void validate() const {
    if (!(mass > 0.0)) throw Error(ErrorCode::ConfigError, "mass must be positive");
    if (!(legs.l2 > 0.0) || !(legs.l3 > 0.0) || legs.l1 < 0.0)
      throw Error(ErrorCode::ConfigError, "link lengths must be positive");
    if (!(tau_max > 0.0)) throw Error(ErrorCode::ConfigError, "tau_max must be positive");
    if (!(g_mag > 0.0)) throw Error(ErrorCode::ConfigError, "g_mag must be positive");
    if ((inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw Error(ErrorCode::ConfigError, "inertia must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> eig(inertia);
    if (!(eig.eigenvalues().minCoeff() > 0.0))
      throw Error(ErrorCode::ConfigError, "inertia must be positive definite");
  }
};

struct RobotState {
  Vec3 p_com = Vec3::Zero();
  Vec3 theta = Vec3::Zero();  // (roll, pitch, yaw)
  Mat3 R = Mat3::Identity();  // body -> world
  Vec3 v_com = Vec3::Zero();
  Vec3 omega_b = Vec3::Zero();
  Vec12 q = Vec12::Zero();
  Vec12 dq = Vec12::Zero();

  void set_rotation(const Mat3& rot) {
    R = rot;
    theta = rotation_to_euler(rot);
  }
  void set_euler(const Vec3& euler) {
    theta = euler;
    R = euler_to_rotation(euler);
  }
  Vec3 q_leg(int leg) const { return q.segment<3>(3 * leg); }
  Vec3 dq_leg(int leg) const { return dq.segment<3>(3 * leg); }
};

/// CoM-to-foot vectors (world frame) and contact flags.
struct FootSet {
  std::array<Vec3, kNumLegs> r{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  std::array<bool, kNumLegs> contact{true, true, true, true};

  int num_contacts() const {
    return static_cast<int>(std::count(contact.begin(), contact.end(), true));
  }
};

// Joint order per leg: abduction about body x, hip pitch about y, knee about y.
// Zero configuration has the leg pointing straight down. Positive pitch
// rotations follow the right-hand rule about +y, so the knee-backward branch
// has q_knee <= 0.

inline Vec3 leg_forward_kinematics(int leg, const Vec3& q_leg, const SrbModel& model) {
  const auto& g = model.legs;
  const double s = SrbModel::side_sign(leg);
  const double c0 = std::cos(q_leg[0]), s0 = std::sin(q_leg[0]);
  const double s1 = std::sin(q_leg[1]), c1 = std::cos(q_leg[1]);
  const double s12 = std::sin(q_leg[1] + q_leg[2]), c12 = std::cos(q_leg[1] + q_leg[2]);
  // Sagittal-plane point before abduction.
  const double x = -g.l2 * s1 - g.l3 * s12;
  const double y = s * g.l1;
  const double z = -g.l2 * c1 - g.l3 * c12;
  return g.hip_offset[leg] + Vec3(x, c0 * y - s0 * z, s0 * y + c0 * z);
}

inline Mat3 leg_jacobian(int leg, const Vec3& q_leg, const SrbModel& model) {
  const auto& g = model.legs;
  const double s = SrbModel::side_sign(leg);
  const double c0 = std::cos(q_leg[0]), s0 = std::sin(q_leg[0]);
  const double s1 = std::sin(q_leg[1]), c1 = std::cos(q_leg[1]);
  const double s12 = std::sin(q_leg[1] + q_leg[2]), c12 = std::cos(q_leg[1] + q_leg[2]);
  const double y = s * g.l1;
  const double z = -g.l2 * c1 - g.l3 * c12;

  const double dx_dq1 = -g.l2 * c1 - g.l3 * c12;
  const double dz_dq1 = g.l2 * s1 + g.l3 * s12;
  const double dx_dq2 = -g.l3 * c12;
  const double dz_dq2 = g.l3 * s12;

  Mat3 j;
  j(0, 0) = 0.0;
  j(1, 0) = -s0 * y - c0 * z;
  j(2, 0) = c0 * y - s0 * z;
  j(0, 1) = dx_dq1;
  j(1, 1) = -s0 * dz_dq1;
  j(2, 1) = c0 * dz_dq1;
  j(0, 2) = dx_dq2;
  j(1, 2) = -s0 * dz_dq2;
  j(2, 2) = c0 * dz_dq2;
  return j;
}

/// Knee-backward inverse kinematics. Throws OutOfReach outside the workspace.
inline Vec3 leg_inverse_kinematics(int leg, const Vec3& p_foot, const SrbModel& model) {
  constexpr double kTol = 1e-12;
  const auto& g = model.legs;
  const double s = SrbModel::side_sign(leg);
  const Vec3 local = p_foot - g.hip_offset[leg];
  const double y = s * g.l1;

  const double r_yz2 = local.y() * local.y() + local.z() * local.z();
  const double sag2 = r_yz2 - g.l1 * g.l1;
  if (sag2 < -kTol) throw Error(ErrorCode::OutOfReach, "target inside abduction offset");
  const double sag = std::sqrt(std::max(sag2, 0.0));

  // Rotate (y, -sag) onto the target's (y, z).
  const double q0 = std::atan2(local.z(), local.y()) - std::atan2(-sag, y);

  const double x = local.x();
  const double d = std::sqrt(x * x + sag * sag);
  if (d > g.l2 + g.l3 + kTol || d < std::abs(g.l2 - g.l3) - kTol)
    throw Error(ErrorCode::OutOfReach, "target outside leg reach annulus");

  const double cos_knee =
      std::clamp((d * d - g.l2 * g.l2 - g.l3 * g.l3) / (2.0 * g.l2 * g.l3), -1.0, 1.0);
  const double q2 = -std::acos(cos_knee);

  // Sagittal target is (x, -sag); the chain at q1 = 0 reaches (vx, vz).
  const double vx = -g.l3 * std::sin(q2);
  const double vz = -g.l2 - g.l3 * std::cos(q2);
  const double q1 = std::atan2(x, -sag) - std::atan2(vx, vz);

  auto wrap = [](double a) { return std::remainder(a, 2.0 * M_PI); };
  return Vec3(wrap(q0), wrap(q1), q2);
}

/// Foot position in the body frame for all four legs.
inline std::array<Vec3, kNumLegs> feet_in_body(const Vec12& q, const SrbModel& model) {
  std::array<Vec3, kNumLegs> out;
  for (int leg = 0; leg < kNumLegs; ++leg)
    out[leg] = leg_forward_kinematics(leg, q.segment<3>(3 * leg), model);
  return out;
}

/// CoM-to-foot vectors in world frame from the joint configuration.
inline FootSet foot_set_from_state(const RobotState& state, const SrbModel& model,
                                   const std::array<bool, kNumLegs>& contact) {
  FootSet feet;
  feet.contact = contact;
  const auto body = feet_in_body(state.q, model);
  for (int leg = 0; leg < kNumLegs; ++leg) feet.r[leg] = state.R * body[leg];
  return feet;
}

/// Joint configuration placing each foot at `foot_body[leg]` (body frame).
inline Vec12 stance_joint_angles(const std::array<Vec3, kNumLegs>& foot_body,
                                 const SrbModel& model) {
  Vec12 q;
  for (int leg = 0; leg < kNumLegs; ++leg)
    q.segment<3>(3 * leg) = leg_inverse_kinematics(leg, foot_body[leg], model);
  return q;
}

/// Feet directly below the abduction offset at the given CoM height, level body.
inline std::array<Vec3, kNumLegs> nominal_foot_layout(const SrbModel& model, double height) {
  std::array<Vec3, kNumLegs> feet;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Vec3& hip = model.legs.hip_offset[leg];
    feet[leg] = Vec3(hip.x(), hip.y() + SrbModel::side_sign(leg) * model.legs.l1, -height);
  }
  return feet;
}

/// Level, resting four-foot stance at the given CoM height.
inline RobotState nominal_stance(const SrbModel& model, double height, double yaw = 0.0) {
  RobotState s;
  s.p_com = Vec3(0.0, 0.0, height);
  s.set_euler(Vec3(0.0, 0.0, yaw));
  s.q = stance_joint_angles(nominal_foot_layout(model, height), model);
  return s;
}

}  // namespace omnijump
