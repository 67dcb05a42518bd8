#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>

#include "omnijump/common.hpp"
#include "omnijump/qp.hpp"
#include "omnijump/rotation.hpp"
#include "omnijump/srb_model.hpp"

namespace omnijump {

/// Virtual-model gains and GRF QP weights. Defaults are the tuned hardware
/// hyperparameters for a Mini-Cheetah-class robot.
struct VmcGains {
  Vec3 kp_p{1070.0, 1070.0, 1070.0};
  Vec3 kd_p{12.0, 12.0, 10.0};
  Vec3 kp_w{800.0, 800.0, 800.0};
  Vec3 kd_w{20.0, 10.0, 20.0};
  Vec6 Q_w = (Vec6() << 1.0, 1.0, 10.0, 20.0, 10.0, 25.0).finished();  // force rows first
  Vec3 R_w{5e-5, 50e-5, 2e-5};  // per joint, repeated for each leg
  Vec3 kcp{0.0, 0.0, 0.0};
  Vec3 kcd{15.0, 15.0, 15.0};
  Vec3 omega_ref = Vec3::Zero();
  double mu = 0.5;
  double f_min = 5.0;
  double f_max = 250.0;

  void validate() const {
    auto nonneg = [](const auto& v) { return (v.array() >= 0.0).all(); };
    if (!nonneg(kp_p) || !nonneg(kd_p) || !nonneg(kp_w) || !nonneg(kd_w) || !nonneg(Q_w) ||
        !nonneg(R_w) || !nonneg(kcp) || !nonneg(kcd))
      throw Error(ErrorCode::ConfigError, "VMC gains must be non-negative");
    if (!(mu > 0.0)) throw Error(ErrorCode::ConfigError, "friction coefficient must be positive");
    if (!(f_min >= 0.0 && f_min < f_max))
      throw Error(ErrorCode::ConfigError, "require 0 <= f_min < f_max");
  }
};

/// World-frame ground reaction forces; entries of swing feet are zero.
struct GrfCommand {
  std::array<Vec3, kNumLegs> f{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  std::array<bool, kNumLegs> contact{false, false, false, false};
  int qp_iterations = 0;
};

struct VirtualAccelerations {
  Vec3 linear = Vec3::Zero();   // m/s^2, world
  Vec3 angular = Vec3::Zero();  // rad/s^2, body
};

/// Attitude error e_R = log(R^T R_ref), body frame. With this ordering a
/// positive gain on e_R rotates the body toward the reference.
inline Vec3 attitude_error(const Mat3& R, const Mat3& R_ref) { return so3_log(R.transpose() * R_ref); }

inline VirtualAccelerations virtual_accelerations(const RobotState& state, const Vec3& ref_p,
                                                  const Vec3& ref_v, const Mat3& ref_R,
                                                  const Vec3& ref_omega, const VmcGains& gains) {
  VirtualAccelerations out;
  out.linear = gains.kp_p.cwiseProduct(ref_p - state.p_com) + gains.kd_p.cwiseProduct(ref_v - state.v_com);
  out.angular = gains.kp_w.cwiseProduct(attitude_error(state.R, ref_R)) +
                gains.kd_w.cwiseProduct(ref_omega - state.omega_b);
  return out;
}

struct SrbConstraint {
  Eigen::Matrix<double, 6, 12> M;
  Vec6 N;
};

/// Wrench map M f = N. Swing feet get zero blocks. The angular row is the
/// world-frame moment R I_B alpha.
inline SrbConstraint build_srb_constraint(const RobotState& state, const FootSet& feet,
                                          const VirtualAccelerations& acc, const SrbModel& model) {
  if (feet.num_contacts() == 0) throw Error(ErrorCode::NoContact, "no feet in contact");
  SrbConstraint c;
  c.M.setZero();
  for (int leg = 0; leg < kNumLegs; ++leg) {
    if (!feet.contact[leg]) continue;
    c.M.block<3, 3>(0, 3 * leg).setIdentity();
    c.M.block<3, 3>(3, 3 * leg) = skew(feet.r[leg]);
  }
  c.N.head<3>() = model.mass * acc.linear - model.mass * model.gravity();
  c.N.tail<3>() = state.R * (model.inertia * acc.angular);
  return c;
}

struct FrictionCone {
  Eigen::MatrixXd G;
  Eigen::VectorXd c_l;
  Eigen::VectorXd c_u;
};

/// Five rows per contact foot: two per tangent direction and one double-bounded
/// normal row. Tangents are the heading-frame x/y axes; the ground is flat.
inline FrictionCone build_friction_cone(const FootSet& feet, const VmcGains& gains,
                                        double heading = 0.0, const Vec3& normal = Vec3::UnitZ()) {
  const int nc = feet.num_contacts();
  const Mat3 rz = rot_z(heading);
  Vec3 t1 = rz.col(0), t2 = rz.col(1);
  const Vec3 n = normal.normalized();
  t1 = (t1 - t1.dot(n) * n).normalized();
  t2 = n.cross(t1);
  const double inf = std::numeric_limits<double>::infinity();

  FrictionCone cone;
  cone.G = Eigen::MatrixXd::Zero(5 * nc, 3 * nc);
  cone.c_l.resize(5 * nc);
  cone.c_u.resize(5 * nc);
  for (int k = 0; k < nc; ++k) {
    const int r = 5 * k, col = 3 * k;
    const Vec3 mn = gains.mu * n;
    cone.G.block<1, 3>(r + 0, col) = (t1 - mn).transpose();
    cone.G.block<1, 3>(r + 1, col) = (t1 + mn).transpose();
    cone.G.block<1, 3>(r + 2, col) = (t2 - mn).transpose();
    cone.G.block<1, 3>(r + 3, col) = (t2 + mn).transpose();
    cone.G.block<1, 3>(r + 4, col) = n.transpose();
    cone.c_l.segment<5>(r) << -inf, 0.0, -inf, 0.0, gains.f_min;
    cone.c_u.segment<5>(r) << 0.0, inf, 0.0, inf, gains.f_max;
  }
  return cone;
}

/// Maps contact-foot world forces to joint torques: tau_leg = -J^T R^T f.
inline Eigen::MatrixXd contact_torque_map(const RobotState& state, const FootSet& feet,
                                          const SrbModel& model) {
  const int nc = feet.num_contacts();
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(3 * nc, 3 * nc);
  int k = 0;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    if (!feet.contact[leg]) continue;
    T.block<3, 3>(3 * k, 3 * k) = -leg_jacobian(leg, state.q_leg(leg), model).transpose() * state.R.transpose();
    ++k;
  }
  return T;
}

/// Assembles the GRF QP over contact-foot forces only.
inline QpProblem build_grf_qp(const RobotState& state, const FootSet& feet,
                              const VirtualAccelerations& acc, const VmcGains& gains,
                              const SrbModel& model, double heading = 0.0) {
  const SrbConstraint wrench = build_srb_constraint(state, feet, acc, model);
  const int nc = feet.num_contacts();
  Eigen::MatrixXd M(6, 3 * nc);
  int k = 0;
  for (int leg = 0; leg < kNumLegs; ++leg)
    if (feet.contact[leg]) M.middleCols<3>(3 * k++) = wrench.M.middleCols<3>(3 * leg);

  // Wrench weights act in the heading frame.
  const Mat3 rz = rot_z(heading);
  Mat6 Q = Mat6::Zero();
  Q.topLeftCorner<3, 3>() = rz * gains.Q_w.head<3>().asDiagonal() * rz.transpose();
  Q.bottomRightCorner<3, 3>() = rz * gains.Q_w.tail<3>().asDiagonal() * rz.transpose();

  const Eigen::MatrixXd T = contact_torque_map(state, feet, model);
  Eigen::VectorXd r_diag(3 * nc);
  for (int i = 0; i < nc; ++i) r_diag.segment<3>(3 * i) = gains.R_w;

  QpProblem qp;
  qp.H = M.transpose() * Q * M + T.transpose() * r_diag.asDiagonal() * T;
  qp.H = 0.5 * (qp.H + qp.H.transpose());
  qp.g = -M.transpose() * Q * wrench.N;
  const FrictionCone cone = build_friction_cone(feet, gains, heading);
  qp.G = cone.G;
  qp.c_l = cone.c_l;
  qp.c_u = cone.c_u;
  return qp;
}

/// Solves the GRF QP. Throws Error(Infeasible) when the cone admits no solution.
inline GrfCommand solve_grf(const RobotState& state, const FootSet& feet,
                            const VirtualAccelerations& acc, const VmcGains& gains,
                            const SrbModel& model, QpSolver& solver, double heading = 0.0) {
  const QpProblem qp = build_grf_qp(state, feet, acc, gains, model, heading);
  const QpSolution sol = solver.solve(qp);
  if (sol.status != QpStatus::Optimal)
    throw Error(ErrorCode::Infeasible, std::string("GRF QP ") + to_string(sol.status));
  GrfCommand out;
  out.contact = feet.contact;
  out.qp_iterations = sol.iterations;
  int k = 0;
  for (int leg = 0; leg < kNumLegs; ++leg)
    if (feet.contact[leg]) out.f[leg] = sol.x.segment<3>(3 * k++);
  return out;
}

inline GrfCommand solve_grf(const RobotState& state, const FootSet& feet,
                            const VirtualAccelerations& acc, const VmcGains& gains,
                            const SrbModel& model, double heading = 0.0) {
  QpSolver solver;
  return solve_grf(state, feet, acc, gains, model, solver, heading);
}

inline Vec12 clamp_torques(const Vec12& tau, double tau_max) {
  return tau.cwiseMax(-tau_max).cwiseMin(tau_max);
}

/// Saturation that scales each leg's torque vector as a whole, so the foot
/// force keeps its direction.
inline Vec12 scale_leg_torques(const Vec12& tau, double tau_max) {
  Vec12 out = tau;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const double peak = tau.segment<3>(3 * leg).cwiseAbs().maxCoeff();
    if (peak > tau_max) out.segment<3>(3 * leg) *= tau_max / peak;
  }
  return clamp_torques(out, tau_max);  // the scaled peak can land one ulp high
}

/// Joint torques: contact legs get -J^T R^T f; every leg gets the Cartesian
/// PD term J^T (kcp e_p + kcd e_v) on body-frame foot references. Clamped.
inline Vec12 grf_to_torques(const RobotState& state, const GrfCommand& grf,
                            const std::array<Vec3, kNumLegs>& ref_feet_p,
                            const std::array<Vec3, kNumLegs>& ref_feet_v, const VmcGains& gains,
                            const SrbModel& model) {
  Vec12 tau = Vec12::Zero();
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Vec3 q = state.q_leg(leg);
    const Mat3 J = leg_jacobian(leg, q, model);
    const Vec3 p_foot = leg_forward_kinematics(leg, q, model);
    const Vec3 v_foot = J * state.dq_leg(leg);
    Vec3 t = J.transpose() * (gains.kcp.cwiseProduct(ref_feet_p[leg] - p_foot) +
                              gains.kcd.cwiseProduct(ref_feet_v[leg] - v_foot));
    if (grf.contact[leg]) t -= J.transpose() * (state.R.transpose() * grf.f[leg]);
    tau.segment<3>(3 * leg) = t;
  }
  return scale_leg_torques(tau, model.tau_max);
}

struct TrackingReference {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 omega = Vec3::Zero();
  std::array<Vec3, kNumLegs> feet_p{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};  // body frame
  std::array<Vec3, kNumLegs> feet_v{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};  // body frame
};

struct TrackingOutput {
  VirtualAccelerations acc;
  GrfCommand grf;
  Vec12 tau = Vec12::Zero();
  std::int64_t solve_ns = 0;
};

/// One tracker per control loop; owns the QP workspace.
class VmcTracker {
 public:
  VmcTracker(SrbModel model, VmcGains gains) : model_(std::move(model)), gains_(std::move(gains)) {}

  TrackingOutput track(const RobotState& state, const FootSet& feet, const TrackingReference& ref,
                       double heading = 0.0) {
    const auto start = std::chrono::steady_clock::now();
    TrackingOutput out;
    out.acc = virtual_accelerations(state, ref.p, ref.v, ref.R, ref.omega, gains_);
    out.grf = solve_grf(state, feet, out.acc, gains_, model_, solver_, heading);
    out.tau = grf_to_torques(state, out.grf, ref.feet_p, ref.feet_v, gains_, model_);
    out.solve_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();
    return out;
  }

  const SrbModel& model() const { return model_; }
  const VmcGains& gains() const { return gains_; }

 private:
  SrbModel model_;
  VmcGains gains_;
  QpSolver solver_;
};

}  // namespace omnijump
