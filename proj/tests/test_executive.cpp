#include <gtest/gtest.h>

#include "omnijump/executive.hpp"

using namespace omnijump;

namespace {

// Default vertical acceleration target used by the CLI.
constexpr double kAz = 13.0;

JumpCommand hop(const Vec3& dp, const Vec3& v, double yaw = 0.0) {
  return make_jump_command(dp, v, Vec3(0, 0, kAz), yaw);
}

bool airborne(const TickRecord& r) { return std::none_of(r.contact.begin(), r.contact.end(), [](bool c) { return c; }); }

Vec3 net_force(const GrfCommand& grf) {
  Vec3 f = Vec3::Zero();
  for (const Vec3& x : grf.f) f += x;
  return f;
}

}  // namespace

TEST(PhaseAt, HalfOpenIntervals) {
  PhaseSchedule s{0.5, 1.0};
  EXPECT_EQ(phase_at(0.0, s), Phase::Preparing);
  EXPECT_EQ(phase_at(0.5, s), Phase::Flight);
  EXPECT_EQ(phase_at(0.999, s), Phase::Flight);
  EXPECT_EQ(phase_at(2.0, s), Phase::Landing);
}

TEST(FlightDuration, LevelLanding) {
  const SrbModel m;
  EXPECT_NEAR(estimate_flight_duration(Vec3(0, 0, 2.5), Vec3(0, 0, 0.3), m, 0.3), 2 * 2.5 / 9.81, 1e-12);
  EXPECT_NEAR(2 * 2.5 / 9.81, 0.5097, 1e-4);
}

TEST(FlightDuration, LowerLandingUsesLargerRoot) {
  const SrbModel m;
  const double t = estimate_flight_duration(Vec3(0, 0, 2.5), Vec3(0, 0, 0.4), m, 0.3);
  // Oracle: larger root of -g/2 t^2 + v t + 0.1 = 0 via the conjugate form.
  const double a = -0.5 * 9.81, b = 2.5, c = 0.1;
  const double q = -0.5 * (b + std::sqrt(b * b - 4 * a * c));
  EXPECT_NEAR(t, q / a, 1e-12);
  EXPECT_NEAR(t, 0.546, 1e-3);
}

TEST(FlightDuration, NoLanding) {
  try {
    estimate_flight_duration(Vec3::Zero(), Vec3(0, 0, 0.3), SrbModel{}, 0.3);
    FAIL() << "expected NoLanding";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoLanding);
  }
}

TEST(FlightTick, PdLaw) {
  const ExecutiveConfig c;
  const Vec12 pose = landing_pose(c);
  RobotState s;
  s.q = pose;
  EXPECT_EQ(flight_tick(s, pose, c.flight_kp, c.flight_kd, c.model).tau, Vec12::Zero());
  s.q[4] -= 0.1;
  const Vec12 tau = flight_tick(s, pose, c.flight_kp, c.flight_kd, c.model).tau;
  EXPECT_NEAR(tau[4], 4.0, 1e-12);
  EXPECT_EQ(tau.cwiseAbs().sum(), std::abs(tau[4]));
}

TEST(FlightSetpoint, QuinticBlend) {
  const Vec12 a = Vec12::Zero(), b = Vec12::Ones();
  auto [q0, dq0] = flight_setpoint(a, b, 0.0, 0.2);
  EXPECT_EQ(q0, a);
  EXPECT_EQ(dq0, Vec12::Zero());
  auto [qm, dqm] = flight_setpoint(a, b, 0.1, 0.2);
  EXPECT_NEAR(qm[0], 0.5, 1e-15);
  EXPECT_NEAR(dqm[0], 1.875 / 0.2, 1e-12);  // peak slope 15/8 of the quintic
  auto [q1, dq1] = flight_setpoint(a, b, 0.3, 0.2);
  EXPECT_EQ(q1, b);
  EXPECT_EQ(dq1, Vec12::Zero());
  // Finite-difference check of the rate.
  const double h = 1e-6;
  const double fd = (flight_setpoint(a, b, 0.05 + h, 0.2).first[0] - flight_setpoint(a, b, 0.05 - h, 0.2).first[0]) / (2 * h);
  EXPECT_NEAR(flight_setpoint(a, b, 0.05, 0.2).second[0], fd, 1e-6);
}

TEST(PrepareTick, AtRestOnTrajectoryStartSupportsWeight) {
  const ExecutiveConfig c;
  JumpExecutive exec(c);
  const SimState s = initial_sim_state(c);
  const PiecewiseQuintic traj = exec.plan(hop(Vec3::Zero(), Vec3(0, 0, 1.5)), s.robot);
  const TrackingOutput out = exec.prepare_tick(0.0, s.robot, s.contact, traj, s.foot_world, 0.0);
  EXPECT_NEAR(net_force(out.grf).z(), c.model.mass * c.model.g_mag, 1e-5);
  EXPECT_LE(out.tau.cwiseAbs().maxCoeff(), c.model.tau_max);
}

TEST(PrepareTick, UpwardDemandExceedsWeight) {
  const ExecutiveConfig c;
  JumpExecutive exec(c);
  const SimState s = initial_sim_state(c);
  const PiecewiseQuintic traj = exec.plan(hop(Vec3(0, 0, 0.05), Vec3(0, 0, 1.5)), s.robot);
  const double t = traj.end_time() - 0.01;
  ASSERT_GT(evaluate(traj, t).z(), s.robot.p_com.z());  // reference above the resting body and rising
  const TrackingOutput out = exec.prepare_tick(t, s.robot, s.contact, traj, s.foot_world, 0.0);
  EXPECT_GT(net_force(out.grf).z(), c.model.mass * c.model.g_mag);
  EXPECT_LE(out.tau.cwiseAbs().maxCoeff(), c.model.tau_max);
}

TEST(LandingTick, SettledStanceBalancesGravity) {
  const ExecutiveConfig c;
  JumpExecutive exec(c);
  const SimState s = initial_sim_state(c);
  const auto [cmd, out] = exec.landing_tick(s.robot, s.contact, {s.robot.p_com, 0.0});
  EXPECT_NEAR(net_force(out.grf).z(), c.model.mass * c.model.g_mag, 1e-3);
  // At the reference posture the joint PD adds nothing: tau equals -J^T R^T f.
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Mat3 J = leg_jacobian(leg, s.robot.q_leg(leg), c.model);
    const Vec3 ff = -J.transpose() * (s.robot.R.transpose() * out.grf.f[leg]);
    EXPECT_LT((cmd.tau.segment<3>(3 * leg) - ff).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(LandingTick, RollIsOpposed) {
  const ExecutiveConfig c;
  JumpExecutive exec(c);
  SimState s = initial_sim_state(c);
  s.robot.set_euler(Vec3(0.1, 0.0, 0.0));
  const FootSet feet = foot_set_from_state(s.robot, c.model, s.contact);
  const auto [cmd, out] = exec.landing_tick(s.robot, s.contact, {s.robot.p_com, 0.0});
  Vec3 moment = Vec3::Zero();
  for (int leg = 0; leg < kNumLegs; ++leg) moment += feet.r[leg].cross(out.grf.f[leg]);
  EXPECT_LT(moment.x(), 0.0);
}

TEST(RunJump, MinimalHopApex) {
  const ExecutiveConfig c;
  const JumpLog log = run_jump(hop(Vec3::Zero(), Vec3(0, 0, 1.5)), initial_sim_state(c), c);
  const double expected = 1.5 * 1.5 / (2 * c.model.g_mag);
  EXPECT_NEAR(expected, 0.1147, 1e-4);
  EXPECT_NEAR(log.summary.apex_rise, expected, 0.05 * expected);
  // Ballistic consistency with the speed actually reached at takeoff.
  const double vz = log.summary.takeoff_v.z();
  EXPECT_NEAR(log.summary.apex_rise, vz * vz / (2 * c.model.g_mag), 1e-3);
  EXPECT_TRUE(log.summary.all_feet_in_contact);
}

TEST(RunJump, FrontLeftCornerLands) {
  const ExecutiveConfig c;
  const JumpLog log = run_jump(hop(Vec3(0.15, 0.1, 0.0), Vec3(0.3, 0.16, 2.5)), initial_sim_state(c), c);
  EXPECT_TRUE(log.summary.all_feet_in_contact);
  EXPECT_LT(std::abs(log.summary.settled_theta.x()), 0.2);
  EXPECT_LT(std::abs(log.summary.settled_theta.y()), 0.2);
  EXPECT_GT(log.summary.final_p.x(), 0.0);
  EXPECT_GT(log.summary.final_p.y(), 0.0);
}

TEST(RunJump, OutOfRangeIsPlanningFailure) {
  const ExecutiveConfig c;
  try {
    run_jump(hop(Vec3::Zero(), Vec3(0, 0, 4.0)), initial_sim_state(c), c);
    FAIL() << "expected PlanningFailed";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PlanningFailed);
    EXPECT_EQ(e.cause(), ErrorCode::CommandOutOfRange);
  }
}

TEST(RunJump, PhasesTorquesAndBallisticFlight) {
  const ExecutiveConfig c;
  for (const JumpCommand& cmd : {hop(Vec3::Zero(), Vec3(0, 0, 1.5)), hop(Vec3(-0.15, 0.1, 0.0), Vec3(-0.3, 0.16, 2.5)),
                                 hop(Vec3(0.1, 0.0, 0.0), Vec3(0.2, 0.0, 2.0), 0.8)}) {
    const JumpLog log = run_jump(cmd, initial_sim_state(c, Vec3::Zero(), 0.8 * (cmd.yaw_direction != 0.0)), c);
    ASSERT_FALSE(log.ticks.empty());
    int airborne_pairs = 0;
    for (std::size_t i = 0; i < log.ticks.size(); ++i) {
      const TickRecord& r = log.ticks[i];
      EXPECT_LE(r.tau.cwiseAbs().maxCoeff(), c.model.tau_max + 1e-12);
      if (i == 0) continue;
      const TickRecord& p = log.ticks[i - 1];
      EXPECT_GE(static_cast<int>(r.phase), static_cast<int>(p.phase));
      // Main flight window only: later rebounds may graze the ground.
      if (airborne(p) && airborne(r) && r.t <= log.summary.first_touchdown) {
        ++airborne_pairs;
        const double dt = r.t - p.t;
        EXPECT_LT((r.v.head<2>() - p.v.head<2>()).cwiseAbs().maxCoeff(), 1e-6);
        EXPECT_NEAR((r.v.z() - p.v.z()) / dt, -c.model.g_mag, 1e-9);
      }
    }
    EXPECT_GT(airborne_pairs, 100);
  }
}

TEST(RunJump, Deterministic) {
  const ExecutiveConfig c;
  const JumpCommand cmd = hop(Vec3(0.1, -0.05, 0.0), Vec3(0.2, -0.1, 2.0));
  const JumpLog a = run_jump(cmd, initial_sim_state(c), c);
  const JumpLog b = run_jump(cmd, initial_sim_state(c), c);
  ASSERT_EQ(a.ticks.size(), b.ticks.size());
  for (std::size_t i = 0; i < a.ticks.size(); ++i) {
    ASSERT_EQ(a.ticks[i].p, b.ticks[i].p);
    ASSERT_EQ(a.ticks[i].tau, b.ticks[i].tau);
  }
}

TEST(RunChain, TwoIdenticalJumps) {
  const ExecutiveConfig c;
  const JumpCommand cmd = hop(Vec3(0.1, 0.0, 0.0), Vec3(0.2, 0.0, 2.0));
  const ChainResult r = run_chain({cmd, cmd}, initial_sim_state(c), c);
  ASSERT_EQ(r.failed_index, -1) << r.error;
  ASSERT_EQ(r.logs.size(), 2u);
  for (const JumpLog& log : r.logs) EXPECT_TRUE(log.summary.all_feet_in_contact);
  // The second jump starts where the first ended.
  EXPECT_EQ(r.logs[1].summary.start_p, r.logs[0].summary.final_p);
  const double d0 = (r.logs[0].summary.final_p - r.logs[0].summary.start_p).head<2>().norm();
  const double d1 = (r.logs[1].summary.final_p - r.logs[1].summary.start_p).head<2>().norm();
  EXPECT_NEAR(d1, d0, 0.2 * d0);
}

TEST(RunChain, StopsAtFirstBadCommand) {
  const ExecutiveConfig c;
  const JumpCommand good = hop(Vec3::Zero(), Vec3(0, 0, 1.5));
  const JumpCommand bad = hop(Vec3::Zero(), Vec3(0, 0, 5.0));
  const ChainResult r = run_chain({good, bad, good}, initial_sim_state(c), c);
  EXPECT_EQ(r.failed_index, 1);
  EXPECT_EQ(r.error_code, ErrorCode::PlanningFailed);
  EXPECT_EQ(r.logs.size(), 1u);
}

TEST(RunChain, NetDisplacementTracksCommands) {
  const ExecutiveConfig c;
  const std::vector<JumpCommand> cmds{hop(Vec3(0.15, 0.0, 0.0), Vec3(0.3, 0.0, 2.0)),
                                      hop(Vec3(0.0, 0.1, 0.0), Vec3(0.0, 0.16, 2.0)),
                                      hop(Vec3(-0.15, 0.0, 0.0), Vec3(-0.3, 0.0, 2.0))};
  const ChainResult r = run_chain(cmds, initial_sim_state(c), c);
  ASSERT_EQ(r.failed_index, -1) << r.error;
  // Each landing adds flight drift on top of the commanded offset; predict it
  // from the takeoff state of every jump.
  Vec3 predicted = Vec3::Zero();
  for (const JumpLog& log : r.logs) {
    const JumpSummary& s = log.summary;
    const double flight = estimate_flight_duration(s.takeoff_v, s.takeoff_p, c.model, c.landing_leg_height);
    predicted += (s.takeoff_p - s.start_p) + s.takeoff_v * flight;
  }
  const Vec3 net = r.logs.back().summary.final_p - r.logs.front().summary.start_p;
  EXPECT_NEAR(net.x(), predicted.x(), 0.2 * predicted.head<2>().norm());
  EXPECT_NEAR(net.y(), predicted.y(), 0.2 * predicted.head<2>().norm());
}
