#pragma once

#include <algorithm>
#include <functional>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "omnijump/common.hpp"
#include "omnijump/minjerk.hpp"
#include "omnijump/rotation.hpp"
#include "omnijump/sim.hpp"
#include "omnijump/srb_model.hpp"
#include "omnijump/vmc.hpp"

namespace omnijump {

enum class Phase { Preparing = 0, Flight = 1, Landing = 2 };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Preparing: return "Preparing";
    case Phase::Flight: return "Flight";
    case Phase::Landing: return "Landing";
  }
  return "Unknown";
}

struct PhaseSchedule {
  double t_prepare_end = 0.0;
  double t_flight_end = std::numeric_limits<double>::infinity();
};

/// Half-open, left-closed phase intervals.
inline Phase phase_at(double t, const PhaseSchedule& schedule) {
  if (t < schedule.t_prepare_end) return Phase::Preparing;
  if (t < schedule.t_flight_end) return Phase::Flight;
  return Phase::Landing;
}

/// Ballistic time until the CoM height returns to `z_land`.
inline double estimate_flight_duration(const Vec3& takeoff_v, const Vec3& takeoff_p,
                                       const SrbModel& model, double z_land) {
  const double g = model.g_mag;
  const double vz = takeoff_v.z();
  const double dz = takeoff_p.z() - z_land;
  if (vz <= 0.0 && dz <= 0.0) throw Error(ErrorCode::NoLanding, "CoM does not rise above landing height");
  const double disc = vz * vz + 2.0 * g * dz;
  if (disc < 0.0) throw Error(ErrorCode::NoLanding, "apex below landing height");
  return (vz + std::sqrt(disc)) / g;
}

/// Target expressed in the heading frame, position relative to the start.
struct JumpCommand {
  BoundaryState end_state;
  double yaw_direction = 0.0;

  BoundaryState to_world(const Vec3& start_p) const {
    const Mat3 rz = rot_z(yaw_direction);
    return {start_p + rz * end_state.p, rz * end_state.v, rz * end_state.a};
  }
};

inline JumpCommand make_jump_command(const Vec3& dp, const Vec3& v, const Vec3& a, double yaw = 0.0) {
  JumpCommand c;
  c.end_state = {dp, v, a};
  c.yaw_direction = yaw;
  return c;
}

struct ExecutiveConfig {
  SrbModel model;
  PlannerLimits planner;
  VmcGains prepare_gains;
  VmcGains landing_gains;
  SimConfig sim;
  double flight_kp = 40.0;
  double flight_kd = 1.0;
  double landing_kp = 30.0;
  double landing_kd = 1.5;
  double stance_height = 0.28;
  double landing_leg_height = 0.30;  // foot depth below CoM in the landing pose
  double flight_blend_time = 0.15;   // takeoff posture -> landing pose ramp
  double control_rate = 1000.0;
  double landing_rate = 500.0;
  double settle_time = 1.0;

  void validate() const {
    model.validate();
    planner.validate();
    prepare_gains.validate();
    landing_gains.validate();
    sim.validate();
    if (!(control_rate > 0.0) || !(landing_rate > 0.0))
      throw Error(ErrorCode::ConfigError, "control rates must be positive");
    if (!(stance_height > 0.0) || !(landing_leg_height > 0.0))
      throw Error(ErrorCode::ConfigError, "stance heights must be positive");
    if (flight_blend_time < 0.0)
      throw Error(ErrorCode::ConfigError, "flight blend time must be non-negative");
    if (flight_kp < 0.0 || flight_kd < 0.0 || landing_kp < 0.0 || landing_kd < 0.0)
      throw Error(ErrorCode::ConfigError, "joint PD gains must be non-negative");
  }
};

/// Joint configuration of the landing crouch (feet below the hips).
inline Vec12 landing_pose(const ExecutiveConfig& config) {
  return stance_joint_angles(nominal_foot_layout(config.model, config.landing_leg_height), config.model);
}

inline LowLevelCommand joint_pd_command(const RobotState& state, const Vec12& q_des, const Vec12& dq_des,
                                        double kp, double kd, const SrbModel& model) {
  LowLevelCommand cmd;
  cmd.q_des = q_des;
  cmd.dq_des = dq_des;
  cmd.kp.setConstant(kp);
  cmd.kd.setConstant(kd);
  cmd.tau = clamp_torques(kp * (q_des - state.q) + kd * (dq_des - state.dq), model.tau_max);
  return cmd;
}

/// Flight: pure joint PD toward the landing pose.
inline LowLevelCommand flight_tick(const RobotState& state, const Vec12& landing_q, double kp,
                                   double kd, const SrbModel& model) {
  return joint_pd_command(state, landing_q, Vec12::Zero(), kp, kd, model);
}

/// Flight PD setpoint: a quintic ramp from the takeoff posture to the landing
/// pose, so feet clear the ground before the legs swing forward.
inline std::pair<Vec12, Vec12> flight_setpoint(const Vec12& q_takeoff, const Vec12& landing_q,
                                               double elapsed, double blend_time) {
  if (blend_time <= 0.0 || elapsed >= blend_time) return {landing_q, Vec12::Zero()};
  const double u = std::max(elapsed, 0.0) / blend_time;
  const double s = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
  const double ds = 30.0 * u * u * (1.0 - u) * (1.0 - u) / blend_time;
  const Vec12 delta = landing_q - q_takeoff;
  return {q_takeoff + s * delta, ds * delta};
}

struct TickRecord {
  double t = 0.0;
  Phase phase = Phase::Preparing;
  Vec3 ref_p = Vec3::Zero();
  Vec3 ref_v = Vec3::Zero();
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 theta = Vec3::Zero();
  std::array<Vec3, kNumLegs> grf{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  Vec12 tau = Vec12::Zero();
  std::array<bool, kNumLegs> contact{};
  int qp_iterations = 0;
  std::int64_t solve_ns = 0;
  bool solved = false;
};

struct JumpSummary {
  Vec3 start_p = Vec3::Zero();
  Vec3 final_p = Vec3::Zero();
  Vec3 takeoff_p = Vec3::Zero();
  Vec3 takeoff_v = Vec3::Zero();
  double apex_height = 0.0;
  double apex_rise = 0.0;
  Vec3 settled_theta = Vec3::Zero();
  bool all_feet_in_contact = false;
  double peak_torque = 0.0;
  PhaseSchedule schedule;
  double first_touchdown = std::numeric_limits<double>::quiet_NaN();
  double duration = 0.0;
  // latency block (non-reproducible)
  double mean_solve_ns = 0.0;
  double p95_solve_ns = 0.0;
  int num_solves = 0;
};

struct JumpLog {
  std::vector<TickRecord> ticks;
  JumpSummary summary;
  SimState final_state;
};

/// Drives one jump: plan, then prepare / flight / landing against the
/// simulator. Single-threaded and deterministic.
class JumpExecutive {
 public:
  explicit JumpExecutive(ExecutiveConfig config)
      : config_(std::move(config)),
        prepare_(config_.model, config_.prepare_gains),
        landing_q_(landing_pose(config_)) {
    config_.validate();
  }

  const ExecutiveConfig& config() const { return config_; }
  const Vec12& landing_q() const { return landing_q_; }

  /// Optional per-tick observer, called before each simulator step.
  std::function<void(const TickRecord&)> on_tick;

  /// Plans the takeoff trajectory; throws PlanningFailed.
  PiecewiseQuintic plan(const JumpCommand& command, const RobotState& start, double t0 = 0.0) const {
    BoundaryState s{start.p_com, start.v_com, Vec3::Zero()};
    try {
      return plan_jump_trajectory(s, command.to_world(start.p_com), config_.planner,
                                  command.yaw_direction, t0);
    } catch (const Error& e) {
      throw Error(ErrorCode::PlanningFailed, e.code(), e.what());
    }
  }

  /// Preparing: track the planned trajectory with the virtual-model QP.
  TrackingOutput prepare_tick(double t, const RobotState& state, const std::array<bool, kNumLegs>& contact,
                              const PiecewiseQuintic& traj, const std::array<Vec3, kNumLegs>& anchors,
                              double heading) {
    TrackingReference ref;
    ref.p = evaluate(traj, t, 0);
    ref.v = evaluate(traj, t, 1);
    ref.R = rot_z(heading);
    ref.omega = config_.prepare_gains.omega_ref;
    const auto body = feet_in_body(state.q, config_.model);
    for (int leg = 0; leg < kNumLegs; ++leg) {
      if (contact[leg]) {
        ref.feet_p[leg] = ref.R.transpose() * (anchors[leg] - ref.p);
        ref.feet_v[leg] = ref.R.transpose() * (-ref.v);
      } else {
        ref.feet_p[leg] = body[leg];
        ref.feet_v[leg] = Vec3::Zero();
      }
    }
    const FootSet feet = foot_set_from_state(state, config_.model, contact);
    try {
      return prepare_.track(state, feet, ref, heading);
    } catch (const Error& e) {
      throw Error(ErrorCode::TrackingFailed, e.code(), e.what());
    }
  }

  struct LandingReference {
    Vec3 p = Vec3::Zero();
    double yaw = 0.0;
  };

  /// Landing: QP with a gravity-balancing reference at rest plus joint PD toward
  /// the posture that reaches the current footholds from the reference pose.
  /// Feet not yet in contact keep the flight PD.
  std::pair<LowLevelCommand, TrackingOutput> landing_tick(const RobotState& state,
                                                          const std::array<bool, kNumLegs>& contact,
                                                          const LandingReference& lref) {
    const SrbModel& model = config_.model;
    LowLevelCommand cmd = flight_tick(state, landing_q_, config_.flight_kp, config_.flight_kd, model);
    TrackingOutput out;
    FootSet feet = foot_set_from_state(state, model, contact);
    if (feet.num_contacts() == 0) return {cmd, out};

    TrackingReference ref;
    ref.p = lref.p;
    ref.v = Vec3::Zero();
    ref.R = rot_z(lref.yaw);
    ref.omega = Vec3::Zero();
    VmcGains gains = config_.landing_gains;
    const auto body = feet_in_body(state.q, model);
    const auto start = std::chrono::steady_clock::now();
    try {
      out.acc = virtual_accelerations(state, ref.p, ref.v, ref.R, ref.omega, gains);
      out.grf = solve_grf(state, feet, out.acc, gains, model, landing_solver_, lref.yaw);
    } catch (const Error& e) {
      throw Error(ErrorCode::TrackingFailed, e.code(), e.what());
    }
    for (int leg = 0; leg < kNumLegs; ++leg) {
      if (!contact[leg]) continue;
      const Vec3 q = state.q_leg(leg);
      const Mat3 J = leg_jacobian(leg, q, model);
      const Vec3 foot_world = state.p_com + state.R * body[leg];
      Vec3 q_ref = q;
      try {
        q_ref = leg_inverse_kinematics(leg, ref.R.transpose() * (foot_world - ref.p), model);
      } catch (const Error&) {
        // unreachable reference posture: PD only damps
      }
      const Vec3 tau_ff = -J.transpose() * (state.R.transpose() * out.grf.f[leg]);
      for (int j = 0; j < 3; ++j) {
        const int idx = 3 * leg + j;
        cmd.q_des[idx] = q_ref[j];
        cmd.dq_des[idx] = 0.0;
        cmd.kp[idx] = config_.landing_kp;
        cmd.kd[idx] = config_.landing_kd;
        cmd.tau[idx] = tau_ff[j] + config_.landing_kp * (q_ref[j] - q[j]) - config_.landing_kd * state.dq[idx];
      }
    }
    cmd.tau = scale_leg_torques(cmd.tau, model.tau_max);
    out.tau = cmd.tau;
    out.solve_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();
    return {cmd, out};
  }

  /// Full jump against the simulator, starting from a resting stance.
  JumpLog run(const JumpCommand& command, const SimState& initial) {
    const SrbModel& model = config_.model;
    const double dt = config_.sim.dt;
    const double heading = command.yaw_direction;
    const PiecewiseQuintic traj = plan(command, initial.robot, initial.time);

    JumpLog log;
    PhaseSchedule schedule;
    schedule.t_prepare_end = traj.end_time();
    SimState sim = initial;
    const std::array<Vec3, kNumLegs> anchors = sim.foot_world;
    const double start_yaw = initial.robot.theta.z();
    std::optional<LandingReference> landing_ref;

    const auto every = [dt](double rate) {
      return std::max<long>(1, std::lround(1.0 / (rate * dt)));
    };
    const long control_div = every(config_.control_rate);
    const long landing_div = every(config_.landing_rate);

    JumpSummary& sum = log.summary;
    sum.start_p = sim.robot.p_com;
    sum.apex_height = sim.robot.p_com.z();
    bool flight_started = false;
    double flight_start = 0.0;
    Vec12 q_takeoff = sim.robot.q;
    LowLevelCommand cmd;
    TrackingOutput last;
    long k = 0;
    double t_end = std::numeric_limits<double>::infinity();
    std::vector<double> solve_times;

    while (sim.time < t_end - 0.5 * dt) {
      const double t = sim.time;
      const Phase phase = phase_at(t, schedule);
      TickRecord rec;
      rec.t = t;
      rec.phase = phase;
      bool ticked = false;

      if (phase == Phase::Preparing) {
        rec.ref_p = evaluate(traj, t, 0);
        rec.ref_v = evaluate(traj, t, 1);
        if (k % control_div == 0) {
          ticked = true;
          if (std::none_of(sim.contact.begin(), sim.contact.end(), [](bool c) { return c; })) {
            cmd = flight_tick(sim.robot, landing_q_, config_.flight_kp, config_.flight_kd, model);
            last = TrackingOutput{};
          } else {
            last = prepare_tick(t, sim.robot, sim.contact, traj, anchors, heading);
            cmd = LowLevelCommand{};
            cmd.tau = last.tau;
            rec.solved = true;
          }
        }
      } else if (phase == Phase::Flight) {
        if (!flight_started) {
          flight_started = true;
          k = 0;
          flight_start = t;
          q_takeoff = sim.robot.q;
          sum.takeoff_p = sim.robot.p_com;
          sum.takeoff_v = sim.robot.v_com;
          double flight = 0.0;
          try {
            flight = estimate_flight_duration(sim.robot.v_com, sim.robot.p_com, model,
                                              config_.landing_leg_height + config_.sim.ground_height);
          } catch (const Error&) {
            flight = 0.0;
          }
          schedule.t_flight_end = t + flight;
          t_end = schedule.t_flight_end + config_.settle_time;
          if (flight <= 0.0) continue;
        }
        rec.ref_p = sim.robot.p_com;
        rec.ref_v = sim.robot.v_com;
        if (k % control_div == 0) {
          ticked = true;
          const auto [q_des, dq_des] =
              flight_setpoint(q_takeoff, landing_q_, t - flight_start, config_.flight_blend_time);
          cmd = joint_pd_command(sim.robot, q_des, dq_des, config_.flight_kp, config_.flight_kd, model);
          // Feet still on the ground at the switch are unloaded so they release.
          for (int leg = 0; leg < kNumLegs; ++leg)
            if (sim.contact[leg]) cmd.tau.segment<3>(3 * leg).setZero();
          last = TrackingOutput{};
        }
      } else {
        if (!flight_started) {
          // Prepare ended without a flight interval (cannot happen with a finite schedule).
          flight_started = true;
        }
        if (!landing_ref && std::any_of(sim.contact.begin(), sim.contact.end(), [](bool c) { return c; })) {
          landing_ref = LandingReference{
              Vec3(sim.robot.p_com.x(), sim.robot.p_com.y(), config_.stance_height + config_.sim.ground_height),
              start_yaw};
          if (std::isnan(sum.first_touchdown)) sum.first_touchdown = t;
        }
        if (landing_ref) {
          rec.ref_p = landing_ref->p;
        } else {
          rec.ref_p = sim.robot.p_com;
        }
        if (k % landing_div == 0) {
          ticked = true;
          if (landing_ref) {
            auto [c, out] = landing_tick(sim.robot, sim.contact, *landing_ref);
            cmd = c;
            last = out;
            rec.solved = out.grf.qp_iterations > 0 || std::any_of(sim.contact.begin(), sim.contact.end(), [](bool c) { return c; });
          } else {
            cmd = flight_tick(sim.robot, landing_q_, config_.flight_kp, config_.flight_kd, model);
            last = TrackingOutput{};
          }
        }
      }

      if (ticked && rec.solved) solve_times.push_back(static_cast<double>(last.solve_ns));
      rec.p = sim.robot.p_com;
      rec.v = sim.robot.v_com;
      rec.theta = sim.robot.theta;
      rec.grf = last.grf.f;
      rec.tau = cmd.tau;
      rec.contact = sim.contact;
      rec.qp_iterations = rec.solved ? last.grf.qp_iterations : 0;
      rec.solve_ns = rec.solved ? last.solve_ns : 0;
      sum.peak_torque = std::max(sum.peak_torque, cmd.tau.cwiseAbs().maxCoeff());
      if (on_tick) on_tick(rec);
      log.ticks.push_back(rec);

      sim = step(sim, cmd, config_.sim, model);
      sum.apex_height = std::max(sum.apex_height, sim.robot.p_com.z());
      ++k;
      if (sim.time > schedule.t_prepare_end + 10.0)
        throw Error(ErrorCode::SimulationDiverged, "jump did not terminate");
    }

    sum.schedule = schedule;
    sum.final_p = sim.robot.p_com;
    sum.apex_rise = sum.apex_height - sum.takeoff_p.z();
    sum.settled_theta = sim.robot.theta;
    sum.all_feet_in_contact = std::all_of(sim.contact.begin(), sim.contact.end(), [](bool c) { return c; });
    sum.duration = sim.time - initial.time;
    sum.num_solves = static_cast<int>(solve_times.size());
    if (!solve_times.empty()) {
      sum.mean_solve_ns = std::accumulate(solve_times.begin(), solve_times.end(), 0.0) / solve_times.size();
      std::sort(solve_times.begin(), solve_times.end());
      sum.p95_solve_ns = solve_times[static_cast<std::size_t>(0.95 * (solve_times.size() - 1))];
    }
    log.final_state = sim;
    return log;
  }

 private:
  ExecutiveConfig config_;
  VmcTracker prepare_;
  QpSolver landing_solver_;
  Vec12 landing_q_;
};

/// Level resting stance on the ground for the configured stance height.
inline SimState initial_sim_state(const ExecutiveConfig& config, const Vec3& xy = Vec3::Zero(),
                                  double yaw = 0.0) {
  RobotState r = nominal_stance(config.model, config.stance_height, yaw);
  r.p_com += Vec3(xy.x(), xy.y(), config.sim.ground_height);
  return make_stance_sim_state(r, config.model);
}

inline JumpLog run_jump(const JumpCommand& command, const SimState& initial, const ExecutiveConfig& config) {
  JumpExecutive exec(config);
  return exec.run(command, initial);
}

struct ChainResult {
  std::vector<JumpLog> logs;
  int failed_index = -1;  // -1 when every jump completed
  std::string error;
  ErrorCode error_code = ErrorCode::PlanningFailed;
};

/// Runs jumps back to back, each starting from the previous settled state and
/// heading. Commands are in the body heading frame; their yaw is added to the
/// settled yaw. Stops at the first failure.
inline ChainResult run_chain(const std::vector<JumpCommand>& commands, const SimState& initial,
                             const ExecutiveConfig& config) {
  ChainResult out;
  JumpExecutive exec(config);
  SimState state = initial;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    JumpCommand cmd = commands[i];
    cmd.yaw_direction += state.robot.theta.z();
    try {
      out.logs.push_back(exec.run(cmd, state));
    } catch (const Error& e) {
      out.failed_index = static_cast<int>(i);
      out.error = e.what();
      out.error_code = e.code();
      return out;
    }
    state = out.logs.back().final_state;
  }
  return out;
}

}  // namespace omnijump
