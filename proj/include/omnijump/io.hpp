#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

#include "json.hpp"
#include "omnijump/executive.hpp"

namespace omnijump {

struct LogOptions {
  bool include_timing = false;  // solve_ns column; varies run to run
  bool jump_column = false;     // leading jump index, for chained runs
};

namespace detail {

// Shortest round-trip formatting keeps the CSV byte-reproducible.
inline void put_num(std::ostream& os, double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  os << buf;
}

}  // namespace detail

inline void write_log_header(std::ostream& os, const LogOptions& opt = {}) {
  if (opt.jump_column) os << "jump,";
  os << "t,phase";
  for (const char* g : {"ref_p", "ref_v", "p", "v"})
    for (const char* a : {"x", "y", "z"}) os << ',' << g << '_' << a;
  os << ",roll,pitch,yaw";
  for (int leg = 0; leg < kNumLegs; ++leg)
    for (const char* a : {"x", "y", "z"}) os << ",f" << leg << '_' << a;
  for (int j = 0; j < 12; ++j) os << ",tau" << j;
  for (int leg = 0; leg < kNumLegs; ++leg) os << ",contact" << leg;
  os << ",qp_iterations";
  if (opt.include_timing) os << ",solve_ns";
  os << '\n';
}

inline void write_log_row(std::ostream& os, const TickRecord& r, const LogOptions& opt = {}, int jump = 0) {
  using detail::put_num;
  if (opt.jump_column) os << jump << ',';
  put_num(os, r.t);
  os << ',' << to_string(r.phase);
  for (const Vec3* v : {&r.ref_p, &r.ref_v, &r.p, &r.v, &r.theta})
    for (int i = 0; i < 3; ++i) {
      os << ',';
      put_num(os, (*v)[i]);
    }
  for (const Vec3& f : r.grf)
    for (int i = 0; i < 3; ++i) {
      os << ',';
      put_num(os, f[i]);
    }
  for (int j = 0; j < 12; ++j) {
    os << ',';
    put_num(os, r.tau[j]);
  }
  for (bool c : r.contact) os << ',' << (c ? 1 : 0);
  os << ',' << r.qp_iterations;
  if (opt.include_timing) os << ',' << r.solve_ns;
  os << '\n';
}

inline void write_log_csv(std::ostream& os, const std::vector<TickRecord>& ticks, const LogOptions& opt = {},
                          int jump = 0) {
  write_log_header(os, opt);
  for (const TickRecord& r : ticks) write_log_row(os, r, opt, jump);
}

inline nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

/// Jump summary. Everything outside "latency" is deterministic.
inline nlohmann::json summary_json(const JumpSummary& s) {
  nlohmann::json j;
  j["start_position"] = vec3_json(s.start_p);
  j["final_position"] = vec3_json(s.final_p);
  j["displacement"] = vec3_json(s.final_p - s.start_p);
  j["takeoff_position"] = vec3_json(s.takeoff_p);
  j["takeoff_velocity"] = vec3_json(s.takeoff_v);
  j["apex_height"] = s.apex_height;
  j["apex_rise"] = s.apex_rise;
  j["landing_attitude"] = {{"roll", s.settled_theta.x()}, {"pitch", s.settled_theta.y()}, {"yaw", s.settled_theta.z()}};
  j["all_feet_in_contact"] = s.all_feet_in_contact;
  j["peak_torque"] = s.peak_torque;
  j["schedule"] = {{"t_prepare_end", s.schedule.t_prepare_end}, {"t_flight_end", s.schedule.t_flight_end}};
  j["first_touchdown"] = std::isnan(s.first_touchdown) ? nlohmann::json(nullptr) : nlohmann::json(s.first_touchdown);
  j["duration"] = s.duration;
  j["latency"] = {{"num_solves", s.num_solves}, {"mean_solve_ns", s.mean_solve_ns}, {"p95_solve_ns", s.p95_solve_ns}};
  return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

}  // namespace omnijump
