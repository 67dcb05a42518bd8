#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "omnijump/bench.hpp"
#include "omnijump/config.hpp"
#include "omnijump/executive.hpp"
#include "omnijump/io.hpp"

namespace omnijump::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfig = 2,
  kPlanning = 3,
  kTracking = 4,
};

/// Landing acceptance: four feet down and level within this many radians.
inline constexpr double kSettledTilt = 0.2;

struct TargetArgs {
  double dx = 0.0, dy = 0.0, dz = 0.0;
  double vx = 0.0, vy = 0.0, vz = 1.5;
  double az = 13.0;  // m/s^2; calibrated against realized takeoff speed (README)
  double yaw = 0.0;

  JumpCommand command(double heading) const {
    return make_jump_command(Vec3(dx, dy, dz), Vec3(vx, vy, vz), Vec3(0.0, 0.0, az), heading);
  }
};

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError: return kConfig;
    case ErrorCode::PlanningFailed:
    case ErrorCode::CommandOutOfRange:
    case ErrorCode::IllConditioned: return kPlanning;
    default: return kTracking;
  }
}

inline bool landed(const JumpSummary& s) {
  return s.all_feet_in_contact && std::abs(s.settled_theta.x()) < kSettledTilt &&
         std::abs(s.settled_theta.y()) < kSettledTilt;
}

inline std::string landing_failure(const JumpSummary& s) {
  std::ostringstream ss;
  ss << "landing failed: feet_in_contact=" << s.all_feet_in_contact << " roll=" << s.settled_theta.x()
     << " pitch=" << s.settled_theta.y();
  return ss.str();
}

/// Parses "dx=0.1,vz=2.5,..." into a target on top of `base`.
inline TargetArgs parse_target(const std::string& text, TargetArgs base = {}) {
  const std::map<std::string, double TargetArgs::*> keys{
      {"dx", &TargetArgs::dx}, {"dy", &TargetArgs::dy}, {"dz", &TargetArgs::dz}, {"vx", &TargetArgs::vx},
      {"vy", &TargetArgs::vy}, {"vz", &TargetArgs::vz}, {"az", &TargetArgs::az}, {"yaw", &TargetArgs::yaw}};
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--jump", "expected key=value, got '" + item + "'");
    const auto it = keys.find(item.substr(0, eq));
    if (it == keys.end()) throw CLI::ValidationError("--jump", "unknown key '" + item.substr(0, eq) + "'");
    try {
      std::size_t used = 0;
      const std::string value = item.substr(eq + 1);
      base.*(it->second) = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::logic_error&) {
      throw CLI::ValidationError("--jump", "bad number in '" + item + "'");
    }
  }
  return base;
}

struct Options {
  std::string config_path;
  std::string out = ".";
  double dt = 0.0;
  bool force = false;
  bool timing = false;
  TargetArgs target;
  std::vector<std::string> chain;
  std::uint64_t seed = 1;
  int samples = 10000;
};

inline ExecutiveConfig load(const Options& o) {
  ExecutiveConfig c = o.config_path.empty() ? ExecutiveConfig{} : load_config(o.config_path);
  if (o.dt > 0.0) c.sim.dt = o.dt;
  if (o.force) c.planner.enforce_ranges = false;
  c.validate();
  return c;
}

inline std::filesystem::path prepare_out(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

inline int cmd_jump(const Options& o, std::ostream& out, std::ostream& err) {
  const ExecutiveConfig config = load(o);
  const SimState initial = initial_sim_state(config, Vec3::Zero(), o.target.yaw);
  JumpLog log;
  try {
    log = run_jump(o.target.command(o.target.yaw), initial, config);
  } catch (const Error& e) {
    err << "jump: " << e.what() << '\n';
    return exit_code_for(e.code());
  }
  const auto dir = prepare_out(o.out);
  std::ostringstream csv;
  write_log_csv(csv, log.ticks, LogOptions{o.timing, false});
  write_text_file((dir / "log.csv").string(), csv.str());
  write_text_file((dir / "summary.json").string(), summary_json(log.summary).dump(2) + "\n");
  const JumpSummary& s = log.summary;
  out << "apex_rise " << s.apex_rise << " m, takeoff vz " << s.takeoff_v.z() << " m/s, settled roll "
      << s.settled_theta.x() << " pitch " << s.settled_theta.y() << ", peak torque " << s.peak_torque << " Nm\n";
  if (!landed(s)) {
    err << "jump: " << landing_failure(s) << '\n';
    return kTracking;
  }
  return kOk;
}

inline int cmd_chain(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.chain.empty()) throw CLI::ValidationError("--jump", "chain needs at least one --jump");
  const ExecutiveConfig config = load(o);
  std::vector<JumpCommand> commands;
  for (const std::string& item : o.chain) {
    const TargetArgs t = parse_target(item);
    commands.push_back(t.command(t.yaw));
  }
  const SimState initial = initial_sim_state(config, Vec3::Zero(), o.target.yaw);
  const ChainResult result = run_chain(commands, initial, config);

  const auto dir = prepare_out(o.out);
  std::ostringstream csv;
  const LogOptions opt{o.timing, true};
  write_log_header(csv, opt);
  nlohmann::json jumps = nlohmann::json::array();
  int failed = result.failed_index;
  std::string reason = result.error;
  int code = failed >= 0 ? exit_code_for(result.error_code) : kOk;
  for (std::size_t i = 0; i < result.logs.size(); ++i) {
    for (const TickRecord& r : result.logs[i].ticks) write_log_row(csv, r, opt, static_cast<int>(i));
    jumps.push_back(summary_json(result.logs[i].summary));
    if (failed < 0 && !landed(result.logs[i].summary)) {
      failed = static_cast<int>(i);
      reason = landing_failure(result.logs[i].summary);
      code = kTracking;
      break;
    }
  }
  write_text_file((dir / "log.csv").string(), csv.str());
  nlohmann::json chain = {{"jumps", jumps}, {"completed", failed < 0 ? result.logs.size() : std::size_t(failed)}};
  chain["failed_index"] = failed < 0 ? nlohmann::json(nullptr) : nlohmann::json(failed);
  if (!result.logs.empty()) {
    const Vec3 net = result.logs.back().summary.final_p - result.logs.front().summary.start_p;
    chain["net_displacement"] = vec3_json(net);
  }
  write_text_file((dir / "chain.json").string(), chain.dump(2) + "\n");
  if (failed >= 0) {
    err << "chain: jump " << failed << " failed: " << reason << '\n';
    return code;
  }
  out << "chain: " << result.logs.size() << " jumps completed\n";
  return kOk;
}

inline int cmd_bench(const Options& o, std::ostream& out, std::ostream&) {
  if (o.samples < kMinBenchSamples)
    throw CLI::ValidationError("--samples", "must be at least " + std::to_string(kMinBenchSamples));
  const ExecutiveConfig config = load(o);
  BenchOptions opt;
  opt.samples = o.samples;
  opt.seed = o.seed;
  const BenchReport r = run_bench(config, opt);
  const auto dir = prepare_out(o.out);
  const nlohmann::json j = bench_json(r);
  write_text_file((dir / "bench.json").string(), j.dump(2) + "\n");
  out << "samples " << r.n_samples << " seed " << r.seed << " input_hash " << j["input_hash"].get<std::string>()
      << '\n';
  for (const auto& [name, s] : {std::pair{"plan", r.plan_ns}, std::pair{"track", r.track_ns},
                                std::pair{"total", r.total_ns}})
    out << name << " ns: mean " << s.mean << " median " << s.median << " p95 " << s.p95 << " max " << s.max << '\n';
  out << "machine " << r.machine << '\n';
  return kOk;
}

inline void add_target_flags(CLI::App* app, Options& o) {
  TargetArgs& t = o.target;
  app->add_option("--dx", t.dx, "end position x, m (heading frame)");
  app->add_option("--dy", t.dy, "end position y, m");
  app->add_option("--dz", t.dz, "end position z, m");
  app->add_option("--vx", t.vx, "end velocity x, m/s");
  app->add_option("--vy", t.vy, "end velocity y, m/s");
  app->add_option("--vz", t.vz, "end velocity z, m/s");
  app->add_option("--az", t.az, "end acceleration z, m/s^2");
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Omnidirectional quadruped jump planner, tracker and simulator"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "JSON configuration file");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--dt", o.dt, "simulation time step, s")->check(CLI::PositiveNumber);
  app.add_option("--yaw", o.target.yaw, "initial heading, rad");
  app.add_option("--seed", o.seed, "random seed");
  app.add_flag("--force", o.force, "skip command range checks");
  app.add_flag("--timing", o.timing, "add solve_ns column to log.csv");

  CLI::App* jump = app.add_subcommand("jump", "single jump");
  add_target_flags(jump, o);
  CLI::App* chain = app.add_subcommand("chain", "consecutive jumps from each settled state");
  chain->add_option("--jump", o.chain, "target as k=v list (dx,dy,dz,vx,vy,vz,az,yaw); repeatable")->required();
  CLI::App* bench = app.add_subcommand("bench", "planner + tracker latency benchmark");
  bench->add_option("--samples", o.samples, "number of timed samples (>= 100)");
  for (CLI::App* sub : {jump, chain, bench}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
    if (*jump) return cmd_jump(o, out, err);
    if (*chain) return cmd_chain(o, out, err);
    return cmd_bench(o, out, err);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kTracking;
  }
}

}  // namespace omnijump::cli
