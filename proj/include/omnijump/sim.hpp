#pragma once

#include <array>
#include <cmath>
#include <string>

#include "omnijump/common.hpp"
#include "omnijump/rotation.hpp"
#include "omnijump/srb_model.hpp"

namespace omnijump {

struct SimConfig {
  double dt = 1e-3;
  double ground_height = 0.0;
  double k_g = 1e4;
  double d_g = 100.0;
  double mu_sim = 0.6;
  double max_joint_speed = 40.0;  // rad/s, unloaded legs
  double divergence_limit = 1e3;  // |p|, |v|, |omega| bound

  void validate() const {
    if (!(dt > 0.0)) throw Error(ErrorCode::ConfigError, "dt must be positive");
    if (k_g < 0.0 || d_g < 0.0) throw Error(ErrorCode::ConfigError, "contact constants must be >= 0");
    if (!(mu_sim > 0.0)) throw Error(ErrorCode::ConfigError, "mu_sim must be positive");
  }
};

/// Joint-level command. `tau` is the full motor torque evaluated at the state
/// the controller saw; the PD fields describe the joint impedance included in
/// it, which the simulator uses to move unloaded (swing) legs.
struct LowLevelCommand {
  Vec12 tau = Vec12::Zero();
  Vec12 q_des = Vec12::Zero();
  Vec12 dq_des = Vec12::Zero();
  Vec12 kp = Vec12::Zero();
  Vec12 kd = Vec12::Zero();
};

struct SimState {
  RobotState robot;
  double time = 0.0;
  std::array<Vec3, kNumLegs> foot_world{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  std::array<bool, kNumLegs> contact{false, false, false, false};
  std::array<Vec3, kNumLegs> grf{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
};

/// Resting stance with feet anchored on the ground.
inline SimState make_stance_sim_state(const RobotState& robot, const SrbModel& model) {
  SimState s;
  s.robot = robot;
  const auto body = feet_in_body(robot.q, model);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    s.foot_world[leg] = robot.p_com + robot.R * body[leg];
    s.contact[leg] = true;
  }
  return s;
}

/// Penalty ground force on a foot: spring-damper normal plus viscous
/// tangential friction clamped to the Coulomb limit.
inline Vec3 apply_contact(const Vec3& foot_p, const Vec3& foot_v, const SimConfig& config) {
  const double pen = config.ground_height - foot_p.z();
  if (pen <= 0.0) return Vec3::Zero();
  const double fz = config.k_g * pen + config.d_g * std::max(0.0, -foot_v.z());
  Vec3 ft(-config.d_g * foot_v.x(), -config.d_g * foot_v.y(), 0.0);
  const double limit = config.mu_sim * fz;
  if (ft.norm() > limit) ft *= limit / ft.norm();
  return Vec3(ft.x(), ft.y(), fz);
}

namespace detail {

inline bool finite(const Vec3& v) { return v.allFinite(); }

inline void check_divergence(const SimState& s, const SimConfig& config) {
  const auto& r = s.robot;
  if (!finite(r.p_com) || !finite(r.v_com) || !finite(r.omega_b) || !r.q.allFinite() ||
      !r.R.allFinite())
    throw Error(ErrorCode::SimulationDiverged, "non-finite state");
  if (r.p_com.norm() > config.divergence_limit || r.v_com.norm() > config.divergence_limit ||
      r.omega_b.norm() > config.divergence_limit)
    throw Error(ErrorCode::SimulationDiverged, "state norm beyond limit");
  if (r.p_com.z() < config.ground_height)
    throw Error(ErrorCode::SimulationDiverged, "CoM below ground");
}

}  // namespace detail

/// Advances one time step. Contact legs are massless: their torques map to
/// foot forces quasi-statically and their joint angles follow the body with
/// the foot pinned. Swing legs have no load, so their joints move at the rate
/// that zeroes the PD torque.
inline SimState step(const SimState& sim, const LowLevelCommand& cmd, const SimConfig& config,
                     const SrbModel& model) {
  SimState next = sim;
  const RobotState& r = sim.robot;
  RobotState& n = next.robot;
  const auto body_feet = feet_in_body(r.q, model);

  Vec3 force = model.mass * model.gravity();
  Vec3 torque_b = Vec3::Zero();
  std::array<bool, kNumLegs> slipping{false, false, false, false};

  for (int leg = 0; leg < kNumLegs; ++leg) {
    Vec3 f = Vec3::Zero();
    const Vec3 q_leg = r.q_leg(leg);
    const Mat3 J = leg_jacobian(leg, q_leg, model);
    if (sim.contact[leg]) {
      const Mat3 Jt = J.transpose();
      if (std::abs(Jt.determinant()) < 1e-9) {
        log_warning("singular leg Jacobian in contact; leg force dropped");
      } else {
        const Vec3 f_body = -Jt.partialPivLu().solve(cmd.tau.segment<3>(3 * leg));
        f = r.R * f_body;
      }
      if (f.z() <= 0.0) {
        next.contact[leg] = false;  // leg pulls: lift off
        f.setZero();
      } else {
        const Vec2 ft = f.head<2>();
        const double limit = config.mu_sim * f.z();
        if (ft.norm() > limit) {
          f.head<2>() = ft * (limit / ft.norm());
          slipping[leg] = true;
        }
      }
    } else {
      const Vec3 p_foot = r.p_com + r.R * body_feet[leg];
      const Vec3 v_foot = r.v_com + r.R * (r.omega_b.cross(body_feet[leg]) + J * r.dq_leg(leg));
      f = apply_contact(p_foot, v_foot, config);
    }
    next.grf[leg] = f;
    force += f;
    torque_b += body_feet[leg].cross(r.R.transpose() * f);
  }

  // Rigid body. Trapezoidal position update is exact under constant force.
  const double dt = config.dt;
  const Vec3 acc = force / model.mass;
  n.v_com = r.v_com + acc * dt;
  n.p_com = r.p_com + 0.5 * (r.v_com + n.v_com) * dt;
  const Vec3 Iw = model.inertia * r.omega_b;
  const Vec3 alpha = model.inertia.ldlt().solve(torque_b - r.omega_b.cross(Iw));
  n.omega_b = r.omega_b + alpha * dt;
  n.set_rotation(r.R * so3_exp(n.omega_b * dt));
  next.time = sim.time + dt;

  // Legs.
  const double max_reach = model.legs.l2 + model.legs.l3;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Vec3 q_old = r.q_leg(leg);
    if (next.contact[leg]) {
      if (slipping[leg]) {
        // The foot slides with the hip while staying on the ground.
        Vec3 p = n.p_com + n.R * body_feet[leg];
        p.z() = config.ground_height;
        next.foot_world[leg] = p;
      }
      const Vec3 target = n.R.transpose() * (next.foot_world[leg] - n.p_com);
      const Vec3 local = target - model.legs.hip_offset[leg];
      const double sag2 = local.y() * local.y() + local.z() * local.z() - model.legs.l1 * model.legs.l1;
      const double reach = std::sqrt(std::max(sag2, 0.0) + local.x() * local.x());
      if (reach >= max_reach) {
        next.contact[leg] = false;  // leg fully extended: lift off
      } else {
        Vec3 q_new;
        try {
          q_new = leg_inverse_kinematics(leg, target, model);
        } catch (const Error&) {
          throw Error(ErrorCode::SimulationDiverged, "leg collapsed under the body");
        }
        n.q.segment<3>(3 * leg) = q_new;
        n.dq.segment<3>(3 * leg) = (q_new - q_old) / dt;
        continue;
      }
    }
    // Unloaded leg.
    Vec3 dq = Vec3::Zero();
    for (int j = 0; j < 3; ++j) {
      const int idx = 3 * leg + j;
      if (cmd.kd[idx] > 0.0)
        dq[j] = cmd.dq_des[idx] + cmd.kp[idx] * (cmd.q_des[idx] - r.q[idx]) / cmd.kd[idx];
    }
    dq = dq.cwiseMax(-config.max_joint_speed).cwiseMin(config.max_joint_speed);
    n.dq.segment<3>(3 * leg) = dq;
    n.q.segment<3>(3 * leg) = q_old + dq * dt;

    const Vec3 p_body = leg_forward_kinematics(leg, n.q.segment<3>(3 * leg), model);
    const Vec3 p_foot = n.p_com + n.R * p_body;
    next.foot_world[leg] = p_foot;
    const Vec3 v_foot = n.v_com +
                        n.R * (n.omega_b.cross(p_body) + leg_jacobian(leg, n.q.segment<3>(3 * leg), model) * dq);
    if (p_foot.z() <= config.ground_height && v_foot.z() < 0.0) {
      next.contact[leg] = true;  // touchdown
      next.foot_world[leg].z() = config.ground_height;
    }
  }

  detail::check_divergence(next, config);
  return next;
}

}  // namespace omnijump
