#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

#include "omnijump/common.hpp"
#include "omnijump/rotation.hpp"

namespace omnijump {

using Mat6x6 = Eigen::Matrix<double, 6, 6>;
using Coeffs = Eigen::Matrix<double, 6, 1>;

inline constexpr int kNumSegments = 3;

struct BoundaryState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
};

/// Axis-aligned box of admissible values.
struct Range3 {
  Vec3 lo;
  Vec3 hi;
  bool contains(const Vec3& x, double tol = 1e-12) const {
    return ((x - lo).array() >= -tol).all() && ((hi - x).array() >= -tol).all();
  }
};

struct PlannerLimits {
  double v_max = 0.8;
  double a_max = 12.0;
  double duration_floor = 0.02;
  // The final segment carries the crouch and push-off, so it is stretched to at
  // least launch_duration, but never past a total of max_prepare_duration.
  double launch_duration = 0.42;
  double max_prepare_duration = 0.5;
  int cost_order = 3;
  // Command box, expressed in the heading frame. Position is relative to start.
  Range3 end_position{Vec3(-0.15, -0.1, -0.05), Vec3(0.15, 0.1, 0.05)};
  Range3 end_velocity{Vec3(-0.3, -0.16, 1.5), Vec3(0.3, 0.16, 3.5)};
  Range3 end_acceleration{Vec3(-20.0, -20.0, 10.0), Vec3(20.0, 20.0, 40.0)};
  bool enforce_ranges = true;

  void validate() const {
    if (!(v_max > 0.0) || !(a_max > 0.0))
      throw Error(ErrorCode::ConfigError, "planner v_max and a_max must be positive");
    if (!(duration_floor > 0.0)) throw Error(ErrorCode::ConfigError, "duration_floor must be positive");
    if (launch_duration < 0.0 || !(max_prepare_duration > 0.0))
      throw Error(ErrorCode::ConfigError, "planner durations must be positive");
    if (cost_order < 3 || cost_order > 4) throw Error(ErrorCode::ConfigError, "cost_order must be 3 (jerk) or 4 (snap)");
    for (const Range3* r : {&end_position, &end_velocity, &end_acceleration})
      if (!((r->hi - r->lo).array() >= 0.0).all())
        throw Error(ErrorCode::ConfigError, "command range lower bound exceeds upper bound");
  }
};

/// Three quintic segments per axis in local segment time.
struct PiecewiseQuintic {
  // coeffs[axis].row(segment) = a_0 .. a_5
  std::array<Eigen::Matrix<double, kNumSegments, 6>, 3> coeffs{};
  std::array<double, kNumSegments + 1> knots{};

  double start_time() const { return knots.front(); }
  double end_time() const { return knots.back(); }
  double duration() const { return knots.back() - knots.front(); }
};

inline double falling_factorial(int i, int k) {
  double r = 1.0;
  for (int j = 0; j < k; ++j) r *= static_cast<double>(i - j);
  return r;
}

/// Integrated squared `order`-th derivative of a quintic over [0, T]:
/// J = p^T Q p.
inline Mat6x6 build_jerk_hessian(double duration, int order = 3) {
  Mat6x6 q = Mat6x6::Zero();
  for (int i = order; i < 6; ++i) {
    for (int j = order; j < 6; ++j) {
      const int power = i + j - 2 * order + 1;
      q(i, j) = falling_factorial(i, order) * falling_factorial(j, order) *
                std::pow(duration, power) / power;
    }
  }
  return q;
}

/// Maps coefficients to [s(0), s'(0), s''(0), s(T), s'(T), s''(T)].
inline Mat6x6 build_mapping_matrix(double duration) {
  Mat6x6 m = Mat6x6::Zero();
  for (int d = 0; d < 3; ++d) {
    m(d, d) = falling_factorial(d, d);
    for (int i = d; i < 6; ++i)
      m(3 + d, i) = falling_factorial(i, d) * std::pow(duration, i - d);
  }
  return m;
}

/// Closed-form inverse of build_mapping_matrix.
inline Mat6x6 mapping_matrix_inverse(double duration) {
  const double t = duration, t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
  Mat6x6 inv = Mat6x6::Zero();
  inv(0, 0) = 1.0;
  inv(1, 1) = 1.0;
  inv(2, 2) = 0.5;
  inv.row(3) << -10.0 / t3, -6.0 / t2, -1.5 / t, 10.0 / t3, -4.0 / t2, 0.5 / t;
  inv.row(4) << 15.0 / t4, 8.0 / t3, 1.5 / t2, -15.0 / t4, 7.0 / t3, -1.0 / t2;
  inv.row(5) << -6.0 / t5, -3.0 / t4, -0.5 / t3, 6.0 / t5, -3.0 / t4, 0.5 / t3;
  return inv;
}

/// Derivative values (p, v, a) at the four knots of one axis.
/// Knot-major layout: index = 3 * knot + derivative order.
using KnotDerivatives = Eigen::Matrix<double, 12, 1>;

// Fixed: all derivatives at the two ends, positions at interior knots.
// Free: velocity and acceleration at the two interior knots.
/// Cost of one segment as a quadratic form in its endpoint derivatives
/// (p0, v0, a0, pT, vT, aT). Built from the unit-duration form and scaled by
/// powers of T, which avoids the cancellation in M^-T Q M^-1 for short T.
inline Mat6x6 endpoint_cost_block(double duration, int order = 3) {
  const Mat6x6 unit_inv = mapping_matrix_inverse(1.0);
  const Mat6x6 unit = unit_inv.transpose() * build_jerk_hessian(1.0, order) * unit_inv;
  Vec6 s;
  s << 1.0, duration, duration * duration, 1.0, duration, duration * duration;
  return std::pow(duration, 1 - 2 * order) * (s.asDiagonal() * unit * s.asDiagonal());
}

inline constexpr std::array<int, 8> kFixedIndices{0, 1, 2, 3, 6, 9, 10, 11};
inline constexpr std::array<int, 4> kFreeIndices{4, 5, 7, 8};

/// Matrices of the closed-form unconstrained reformulation.
struct JerkCostMatrices {
  std::array<Mat6x6, kNumSegments> Q;
  std::array<Mat6x6, kNumSegments> M;
  Eigen::Matrix<double, 18, 12> C;  // [fixed; free] -> stacked segment endpoint derivatives
  Eigen::Matrix<double, 12, 12> R;  // C^T M^-T Q M^-1 C
  Eigen::Matrix<double, 8, 8> R_ff;
  Eigen::Matrix<double, 8, 4> R_fp;
  Eigen::Matrix<double, 4, 4> R_pp;
};

inline JerkCostMatrices build_cost_matrices(const std::array<double, kNumSegments>& durations,
                                            int order = 3) {
  JerkCostMatrices out;
  out.C.setZero();
  // Column c of C selects knot-derivative index `ordered[c]`.
  std::array<int, 12> ordered{};
  std::copy(kFixedIndices.begin(), kFixedIndices.end(), ordered.begin());
  std::copy(kFreeIndices.begin(), kFreeIndices.end(), ordered.begin() + 8);
  for (int seg = 0; seg < kNumSegments; ++seg) {
    for (int row = 0; row < 6; ++row) {
      const int knot_index = 3 * seg + row;  // rows 0..2 at seg start, 3..5 at seg end
      const auto it = std::find(ordered.begin(), ordered.end(), knot_index);
      out.C(6 * seg + row, static_cast<int>(it - ordered.begin())) = 1.0;
    }
  }
  Eigen::Matrix<double, 18, 18> block = Eigen::Matrix<double, 18, 18>::Zero();
  for (int seg = 0; seg < kNumSegments; ++seg) {
    out.Q[seg] = build_jerk_hessian(durations[seg], order);
    out.M[seg] = build_mapping_matrix(durations[seg]);
    block.block<6, 6>(6 * seg, 6 * seg) = endpoint_cost_block(durations[seg], order);
  }
  out.R = out.C.transpose() * block * out.C;
  out.R = 0.5 * (out.R + out.R.transpose());
  out.R_ff = out.R.topLeftCorner<8, 8>();
  out.R_fp = out.R.topRightCorner<8, 4>();
  out.R_pp = out.R.bottomRightCorner<4, 4>();
  return out;
}

/// Per-segment coefficients from the full set of knot derivatives.
inline Eigen::Matrix<double, kNumSegments, 6> coefficients_from_knots(
    const KnotDerivatives& knots, const std::array<double, kNumSegments>& durations) {
  Eigen::Matrix<double, kNumSegments, 6> coeffs;
  for (int seg = 0; seg < kNumSegments; ++seg) {
    Coeffs d = knots.segment<6>(3 * seg);
    // Work on the displacement: pT - p0 is exact for nearby positions, while
    // scaling each endpoint by 1/T^5 first would cancel catastrophically.
    d[3] -= d[0];
    const double p0 = d[0];
    d[0] = 0.0;
    coeffs.row(seg) = (mapping_matrix_inverse(durations[seg]) * d).transpose();
    coeffs(seg, 0) = p0;
  }
  return coeffs;
}

/// Total cost sum_j p_j^T Q_j p_j.
inline double trajectory_cost(const Eigen::Matrix<double, kNumSegments, 6>& coeffs,
                              const std::array<double, kNumSegments>& durations, int order = 3) {
  double cost = 0.0;
  for (int seg = 0; seg < kNumSegments; ++seg) {
    const Coeffs p = coeffs.row(seg).transpose();
    cost += p.dot(build_jerk_hessian(durations[seg], order) * p);
  }
  return cost;
}

/// Fixed derivative values of one axis, in kFixedIndices order.
using FixedDerivatives = Eigen::Matrix<double, 8, 1>;

inline FixedDerivatives make_fixed(double p0, double v0, double a0, double p1, double p2,
                                   double p3, double v3, double a3) {
  FixedDerivatives f;
  f << p0, v0, a0, p1, p2, p3, v3, a3;
  return f;
}

/// Optimal free interior derivatives for several axes sharing one time
/// allocation. Columns of `fixed` are axes; returns full knot derivatives.
template <int Axes>
Eigen::Matrix<double, 12, Axes> solve_knot_derivatives(
    const Eigen::Matrix<double, 8, Axes>& fixed, const JerkCostMatrices& cost) {
  Eigen::LLT<Eigen::Matrix4d> llt(cost.R_pp);
  const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  if (!(rcond > 1e-12))
    throw Error(ErrorCode::IllConditioned, "free-derivative block is ill-conditioned");
  // The cost only sees position differences; removing the start position
  // keeps the large 1/T^5 weights from cancelling on absolute coordinates.
  Eigen::Matrix<double, 8, Axes> local = fixed;
  for (int row : {3, 4, 5}) local.row(row) -= fixed.row(0);
  local.row(0).setZero();
  const Eigen::Matrix<double, 4, Axes> free = -llt.solve(cost.R_fp.transpose() * local);
  Eigen::Matrix<double, 12, Axes> knots;
  for (int i = 0; i < 8; ++i) knots.row(kFixedIndices[i]) = fixed.row(i);
  for (int i = 0; i < 4; ++i) knots.row(kFreeIndices[i]) = free.row(i);
  return knots;
}

/// Minimum-cost coefficients for one axis.
inline Eigen::Matrix<double, kNumSegments, 6> solve_closed_form(
    const FixedDerivatives& fixed, const std::array<double, kNumSegments>& durations,
    int order = 3) {
  for (double d : durations)
    if (!(d > 0.0)) throw Error(ErrorCode::IllConditioned, "segment durations must be positive");
  const JerkCostMatrices cost = build_cost_matrices(durations, order);
  const KnotDerivatives knots = solve_knot_derivatives<1>(fixed, cost);
  return coefficients_from_knots(knots, durations);
}

/// Single segment with all six endpoint derivatives [p0, v0, a0, pT, vT, aT]
/// fixed: the constraints determine the quintic, so no free block remains.
inline Coeffs solve_single_segment(const Coeffs& endpoint, double duration) {
  if (!(duration > 0.0)) throw Error(ErrorCode::IllConditioned, "segment duration must be positive");
  return mapping_matrix_inverse(duration) * endpoint;
}

/// Trapezoidal (or triangular) velocity profile over the straight-line
/// distance: [accelerate, cruise, decelerate] durations.
inline std::array<double, kNumSegments> allocate_times(const Vec3& p_start, const Vec3& p_end,
                                                       double v_max, double a_max,
                                                       double floor = 0.02) {
  const double dist = (p_end - p_start).norm();
  double t_acc = v_max / a_max;
  const double d_acc = 0.5 * v_max * t_acc;
  double t_cruise = 0.0;
  if (2.0 * d_acc <= dist) {
    t_cruise = (dist - 2.0 * d_acc) / v_max;
  } else {
    t_acc = std::sqrt(a_max * dist) / a_max;
  }
  return {std::max(t_acc, floor), std::max(t_cruise, floor), std::max(t_acc, floor)};
}

/// Fraction of the straight-line distance covered by the trapezoidal profile
/// after the normalized time s in [0, 1] (the profile is time-scaled to unit length).
inline double profile_fraction(double dist, double v_max, double a_max, double s) {
  s = std::clamp(s, 0.0, 1.0);
  if (dist <= 1e-12) return s;
  double t_acc = v_max / a_max;
  double v_peak = v_max;
  double t_cruise = 0.0;
  if (v_max * t_acc <= dist) {
    t_cruise = (dist - v_max * t_acc) / v_max;
  } else {
    t_acc = std::sqrt(dist / a_max);
    v_peak = a_max * t_acc;
  }
  const double total = 2.0 * t_acc + t_cruise;
  const double t = s * total;
  const double d_acc = 0.5 * v_peak * t_acc;
  double d;
  if (t <= t_acc) {
    d = 0.5 * a_max * t * t;
  } else if (t <= t_acc + t_cruise) {
    d = d_acc + v_peak * (t - t_acc);
  } else {
    const double r = total - t;
    d = dist - 0.5 * a_max * r * r;
  }
  return d / dist;
}

/// Fractions of the straight-line distance at the two interior knots, for the
/// trapezoidal profile stretched over the given segment durations.
inline std::array<double, 2> waypoint_fractions(double dist, double v_max, double a_max,
                                                const std::array<double, kNumSegments>& durations) {
  const double total = durations[0] + durations[1] + durations[2];
  return {profile_fraction(dist, v_max, a_max, durations[0] / total),
          profile_fraction(dist, v_max, a_max, (durations[0] + durations[1]) / total)};
}

inline Vec3 evaluate(const PiecewiseQuintic& traj, double t, int order = 0) {
  t = std::clamp(t, traj.knots.front(), traj.knots.back());
  int seg = 0;
  while (seg < kNumSegments - 1 && t >= traj.knots[seg + 1]) ++seg;
  const double tau = t - traj.knots[seg];
  Vec3 out;
  for (int axis = 0; axis < 3; ++axis) {
    double value = 0.0;
    // Horner on the differentiated polynomial.
    for (int i = 5; i >= order; --i)
      value = value * tau + falling_factorial(i, order) * traj.coeffs[axis](seg, i);
    out[axis] = value;
  }
  return out;
}

inline BoundaryState evaluate_state(const PiecewiseQuintic& traj, double t) {
  return {evaluate(traj, t, 0), evaluate(traj, t, 1), evaluate(traj, t, 2)};
}

inline double trajectory_cost(const PiecewiseQuintic& traj, int order = 3) {
  std::array<double, kNumSegments> durations{};
  for (int seg = 0; seg < kNumSegments; ++seg) durations[seg] = traj.knots[seg + 1] - traj.knots[seg];
  double cost = 0.0;
  for (int axis = 0; axis < 3; ++axis) cost += trajectory_cost(traj.coeffs[axis], durations, order);
  return cost;
}

/// Throws CommandOutOfRange if the end state leaves the command box. The box
/// is expressed in the frame yawed by `heading`.
inline void check_command_ranges(const BoundaryState& start, const BoundaryState& end,
                                 const PlannerLimits& limits, double heading = 0.0) {
  if (!limits.enforce_ranges) return;
  const Mat3 to_heading = rot_z(heading).transpose();
  const Vec3 dp = to_heading * (end.p - start.p);
  const Vec3 v = to_heading * end.v;
  const Vec3 a = to_heading * end.a;
  constexpr double kTol = 1e-9;
  if (!limits.end_position.contains(dp, kTol))
    throw Error(ErrorCode::CommandOutOfRange, "end position outside command range");
  if (!limits.end_velocity.contains(v, kTol))
    throw Error(ErrorCode::CommandOutOfRange, "end velocity outside command range");
  if (!limits.end_acceleration.contains(a, kTol))
    throw Error(ErrorCode::CommandOutOfRange, "end acceleration outside command range");
}

/// Minimum-jerk CoM trajectory from `start` to `end`, beginning at `t0`.
inline PiecewiseQuintic plan_jump_trajectory(const BoundaryState& start, const BoundaryState& end,
                                             const PlannerLimits& limits, double heading = 0.0,
                                             double t0 = 0.0) {
  check_command_ranges(start, end, limits, heading);
  auto durations = allocate_times(start.p, end.p, limits.v_max, limits.a_max, limits.duration_floor);
  // Stretch the launch segment; squeeze the lead-in segments if the total
  // would exceed the preparation budget.
  durations[2] = std::max(durations[2], limits.launch_duration);
  const double head = durations[0] + durations[1];
  const double room = std::max(limits.max_prepare_duration - durations[2], 2.0 * limits.duration_floor);
  if (head > room) {
    // Shrink only the part above the floor so neither segment drops below it.
    const double f = limits.duration_floor;
    const double k = (room - 2.0 * f) / (head - 2.0 * f);
    durations[0] = f + (durations[0] - f) * k;
    durations[1] = f + (durations[1] - f) * k;
  }
  const auto frac = waypoint_fractions((end.p - start.p).norm(), limits.v_max, limits.a_max, durations);
  const Vec3 p1 = start.p + frac[0] * (end.p - start.p);
  const Vec3 p2 = start.p + frac[1] * (end.p - start.p);

  Eigen::Matrix<double, 8, 3> fixed;
  for (int axis = 0; axis < 3; ++axis)
    fixed.col(axis) = make_fixed(start.p[axis], start.v[axis], start.a[axis], p1[axis], p2[axis],
                                 end.p[axis], end.v[axis], end.a[axis]);
  const JerkCostMatrices cost = build_cost_matrices(durations, limits.cost_order);
  const Eigen::Matrix<double, 12, 3> knots = solve_knot_derivatives<3>(fixed, cost);

  PiecewiseQuintic traj;
  traj.knots[0] = t0;
  for (int seg = 0; seg < kNumSegments; ++seg) traj.knots[seg + 1] = traj.knots[seg] + durations[seg];
  for (int axis = 0; axis < 3; ++axis)
    traj.coeffs[axis] = coefficients_from_knots(knots.col(axis), durations);
  return traj;
}

/// CSV with columns t,x,y,z,vx,vy,vz,ax,ay,az.
inline void write_trajectory_csv(std::ostream& os, const PiecewiseQuintic& traj,
                                 double rate_hz = 1000.0) {
  os << "t,x,y,z,vx,vy,vz,ax,ay,az\n";
  const auto n = static_cast<long>(std::floor(traj.duration() * rate_hz + 1e-9));
  for (long k = 0; k <= n; ++k) {
    const double t = traj.start_time() + static_cast<double>(k) / rate_hz;
    const BoundaryState s = evaluate_state(traj, t);
    os << t;
    for (const Vec3* v : {&s.p, &s.v, &s.a})
      for (int i = 0; i < 3; ++i) os << ',' << (*v)[i];
    os << '\n';
  }
}

}  // namespace omnijump
