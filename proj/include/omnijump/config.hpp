#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "omnijump/executive.hpp"

namespace omnijump {

using Json = nlohmann::json;

namespace detail {

inline Json vec_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

template <typename V>
void read_vec(const Json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  const Json& a = j.at(key);
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != out.size())
    throw Error(ErrorCode::ConfigError, std::string("'") + key + "' must be an array of " +
                                            std::to_string(out.size()) + " numbers");
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = a[static_cast<std::size_t>(i)].get<double>();
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const std::string& section) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "section '" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw Error(ErrorCode::ConfigError, "unknown key '" + section + "." + it.key() + "'");
  }
}

inline Json gains_json(const VmcGains& g) {
  return {{"kp_p", vec_json(g.kp_p)}, {"kd_p", vec_json(g.kd_p)}, {"kp_w", vec_json(g.kp_w)},
          {"kd_w", vec_json(g.kd_w)}, {"Q_w", vec_json(g.Q_w)},   {"R_w", vec_json(g.R_w)},
          {"kcp", vec_json(g.kcp)},   {"kcd", vec_json(g.kcd)},   {"omega_ref", vec_json(g.omega_ref)},
          {"mu", g.mu},               {"f_min", g.f_min},         {"f_max", g.f_max}};
}

inline void gains_from(const Json& j, VmcGains& g, const std::string& section) {
  reject_unknown(j, {"kp_p", "kd_p", "kp_w", "kd_w", "Q_w", "R_w", "kcp", "kcd", "omega_ref", "mu", "f_min", "f_max"},
                 section);
  read_vec(j, "kp_p", g.kp_p);
  read_vec(j, "kd_p", g.kd_p);
  read_vec(j, "kp_w", g.kp_w);
  read_vec(j, "kd_w", g.kd_w);
  read_vec(j, "Q_w", g.Q_w);
  read_vec(j, "R_w", g.R_w);
  read_vec(j, "kcp", g.kcp);
  read_vec(j, "kcd", g.kcd);
  read_vec(j, "omega_ref", g.omega_ref);
  read(j, "mu", g.mu);
  read(j, "f_min", g.f_min);
  read(j, "f_max", g.f_max);
}

}  // namespace detail

/// Full configuration as nested JSON sections.
inline Json config_to_json(const ExecutiveConfig& c) {
  using detail::vec_json;
  Json hips = Json::array();
  for (const Vec3& h : c.model.legs.hip_offset) hips.push_back(vec_json(h));
  const PlannerLimits& p = c.planner;
  return {
      {"model",
       {{"mass", c.model.mass},
        {"inertia_diag", vec_json(c.model.inertia.diagonal())},
        {"hip_offsets", hips},
        {"l1", c.model.legs.l1},
        {"l2", c.model.legs.l2},
        {"l3", c.model.legs.l3},
        {"tau_max", c.model.tau_max},
        {"g_mag", c.model.g_mag}}},
      {"planner",
       {{"v_max", p.v_max},
        {"a_max", p.a_max},
        {"duration_floor", p.duration_floor},
        {"launch_duration", p.launch_duration},
        {"max_prepare_duration", p.max_prepare_duration},
        {"cost_order", p.cost_order},
        {"end_position_lo", vec_json(p.end_position.lo)},
        {"end_position_hi", vec_json(p.end_position.hi)},
        {"end_velocity_lo", vec_json(p.end_velocity.lo)},
        {"end_velocity_hi", vec_json(p.end_velocity.hi)},
        {"end_acceleration_lo", vec_json(p.end_acceleration.lo)},
        {"end_acceleration_hi", vec_json(p.end_acceleration.hi)}}},
      {"vmc", detail::gains_json(c.prepare_gains)},
      {"landing",
       {{"gains", detail::gains_json(c.landing_gains)},
        {"kp", c.landing_kp},
        {"kd", c.landing_kd},
        {"stance_height", c.stance_height},
        {"rate", c.landing_rate},
        {"settle_time", c.settle_time}}},
      {"flight",
       {{"kp", c.flight_kp},
        {"kd", c.flight_kd},
        {"landing_leg_height", c.landing_leg_height},
        {"blend_time", c.flight_blend_time}}},
      {"sim",
       {{"dt", c.sim.dt},
        {"ground_height", c.sim.ground_height},
        {"k_g", c.sim.k_g},
        {"d_g", c.sim.d_g},
        {"mu_sim", c.sim.mu_sim},
        {"max_joint_speed", c.sim.max_joint_speed},
        {"divergence_limit", c.sim.divergence_limit}}},
      {"executive", {{"control_rate", c.control_rate}}},
  };
}

/// Overlays `j` on the defaults. Missing keys keep their default; unknown keys
/// and malformed values are ConfigError.
inline ExecutiveConfig config_from_json(const Json& j) {
  using detail::read;
  using detail::read_vec;
  using detail::reject_unknown;
  ExecutiveConfig c;
  try {
    reject_unknown(j, {"model", "planner", "vmc", "landing", "flight", "sim", "executive"}, "<root>");
    if (j.contains("model")) {
      const Json& m = j.at("model");
      reject_unknown(m, {"mass", "inertia_diag", "inertia", "hip_offsets", "l1", "l2", "l3", "tau_max", "g_mag"},
                     "model");
      read(m, "mass", c.model.mass);
      if (m.contains("inertia_diag")) {
        Vec3 d = c.model.inertia.diagonal();
        read_vec(m, "inertia_diag", d);
        c.model.inertia = d.asDiagonal();
      }
      if (m.contains("inertia")) {
        Eigen::Matrix<double, 9, 1> flat;
        read_vec(m, "inertia", flat);
        c.model.inertia = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(flat.data());
      }
      if (m.contains("hip_offsets")) {
        const Json& h = m.at("hip_offsets");
        if (!h.is_array() || h.size() != kNumLegs)
          throw Error(ErrorCode::ConfigError, "'model.hip_offsets' must list four 3-vectors");
        for (int leg = 0; leg < kNumLegs; ++leg) {
          Json wrap = {{"v", h[static_cast<std::size_t>(leg)]}};
          read_vec(wrap, "v", c.model.legs.hip_offset[leg]);
        }
      }
      read(m, "l1", c.model.legs.l1);
      read(m, "l2", c.model.legs.l2);
      read(m, "l3", c.model.legs.l3);
      read(m, "tau_max", c.model.tau_max);
      read(m, "g_mag", c.model.g_mag);
    }
    if (j.contains("planner")) {
      const Json& p = j.at("planner");
      reject_unknown(p, {"v_max", "a_max", "duration_floor", "launch_duration", "max_prepare_duration",
                         "cost_order", "end_position_lo", "end_position_hi", "end_velocity_lo",
                         "end_velocity_hi", "end_acceleration_lo", "end_acceleration_hi"},
                     "planner");
      PlannerLimits& l = c.planner;
      read(p, "v_max", l.v_max);
      read(p, "a_max", l.a_max);
      read(p, "duration_floor", l.duration_floor);
      read(p, "launch_duration", l.launch_duration);
      read(p, "max_prepare_duration", l.max_prepare_duration);
      read(p, "cost_order", l.cost_order);
      read_vec(p, "end_position_lo", l.end_position.lo);
      read_vec(p, "end_position_hi", l.end_position.hi);
      read_vec(p, "end_velocity_lo", l.end_velocity.lo);
      read_vec(p, "end_velocity_hi", l.end_velocity.hi);
      read_vec(p, "end_acceleration_lo", l.end_acceleration.lo);
      read_vec(p, "end_acceleration_hi", l.end_acceleration.hi);
    }
    if (j.contains("vmc")) detail::gains_from(j.at("vmc"), c.prepare_gains, "vmc");
    if (j.contains("landing")) {
      const Json& l = j.at("landing");
      reject_unknown(l, {"gains", "kp", "kd", "stance_height", "rate", "settle_time"}, "landing");
      if (l.contains("gains")) detail::gains_from(l.at("gains"), c.landing_gains, "landing.gains");
      read(l, "kp", c.landing_kp);
      read(l, "kd", c.landing_kd);
      read(l, "stance_height", c.stance_height);
      read(l, "rate", c.landing_rate);
      read(l, "settle_time", c.settle_time);
    }
    if (j.contains("flight")) {
      const Json& f = j.at("flight");
      reject_unknown(f, {"kp", "kd", "landing_leg_height", "blend_time"}, "flight");
      read(f, "kp", c.flight_kp);
      read(f, "kd", c.flight_kd);
      read(f, "landing_leg_height", c.landing_leg_height);
      read(f, "blend_time", c.flight_blend_time);
    }
    if (j.contains("sim")) {
      const Json& s = j.at("sim");
      reject_unknown(s, {"dt", "ground_height", "k_g", "d_g", "mu_sim", "max_joint_speed", "divergence_limit"},
                     "sim");
      read(s, "dt", c.sim.dt);
      read(s, "ground_height", c.sim.ground_height);
      read(s, "k_g", c.sim.k_g);
      read(s, "d_g", c.sim.d_g);
      read(s, "mu_sim", c.sim.mu_sim);
      read(s, "max_joint_speed", c.sim.max_joint_speed);
      read(s, "divergence_limit", c.sim.divergence_limit);
    }
    if (j.contains("executive")) {
      const Json& e = j.at("executive");
      reject_unknown(e, {"control_rate"}, "executive");
      read(e, "control_rate", c.control_rate);
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  c.validate();
  return c;
}

inline ExecutiveConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return config_from_json(j);
}

inline ExecutiveConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace omnijump
