#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#if defined(__linux__)
#include <sched.h>
#endif

#include "json.hpp"
#include "omnijump/executive.hpp"

namespace omnijump {

struct LatencyStats {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double max = 0.0;
  double min = 0.0;
};

struct BenchReport {
  int n_samples = 0;
  std::uint64_t seed = 0;
  std::uint64_t input_hash = 0;
  LatencyStats plan_ns;
  LatencyStats track_ns;
  LatencyStats total_ns;
  std::string machine;
};

struct BenchOptions {
  int samples = 10000;
  int warmup = 100;
  std::uint64_t seed = 1;
  bool pin_thread = true;
};

inline constexpr int kMinBenchSamples = 100;

/// Nearest-rank percentile of a sorted sample, p in [0, 100].
inline double percentile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double rank = std::ceil(p / 100.0 * static_cast<double>(sorted.size()));
  const auto idx = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(sorted.size()))) - 1;
  return sorted[idx];
}

inline LatencyStats latency_stats(std::vector<double> v) {
  LatencyStats s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.median = percentile_sorted(v, 50.0);
  s.p95 = percentile_sorted(v, 95.0);
  s.max = v.back();
  s.min = v.front();
  return s;
}

/// 64-bit FNV-1a over raw bytes.
class Fnv1a {
 public:
  void add(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 1099511628211ull;
    }
  }
  void add(double x) { add(&x, sizeof(x)); }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 14695981039346656037ull;
};

inline std::string machine_descriptor() {
  std::string cpu = "unknown cpu";
  std::ifstream in("/proc/cpuinfo");
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  }
  std::string compiler = "unknown compiler";
#if defined(__clang__)
  compiler = "clang " __clang_version__;
#elif defined(__GNUC__)
  compiler = "gcc " __VERSION__;
#endif
  return cpu + "; " + compiler;
}

/// One benchmark input: a jump command plus the evaluation time fraction
/// of the tracking cycle.
struct BenchSample {
  BoundaryState end;
  double u = 0.0;
};

/// Deterministic input sequence, uniform over the configured command box.
inline std::vector<BenchSample> bench_inputs(const PlannerLimits& limits, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  std::vector<BenchSample> out(static_cast<std::size_t>(n));
  for (BenchSample& s : out) {
    for (int i = 0; i < 3; ++i) s.end.p[i] = uniform(limits.end_position.lo[i], limits.end_position.hi[i]);
    for (int i = 0; i < 3; ++i) s.end.v[i] = uniform(limits.end_velocity.lo[i], limits.end_velocity.hi[i]);
    s.end.a = Vec3(0.0, 0.0, uniform(limits.end_acceleration.lo.z(), limits.end_acceleration.hi.z()));
    s.u = uniform(0.0, 1.0);
  }
  return out;
}

inline std::uint64_t hash_inputs(const std::vector<BenchSample>& inputs) {
  Fnv1a h;
  for (const BenchSample& s : inputs) {
    for (const Vec3* v : {&s.end.p, &s.end.v, &s.end.a})
      for (int i = 0; i < 3; ++i) h.add((*v)[i]);
    h.add(s.u);
  }
  return h.value();
}

/// Times plan_jump_trajectory plus one full tracking cycle (reference in,
/// torque command out) per sample. Simulator stepping is excluded.
inline BenchReport run_bench(const ExecutiveConfig& config, const BenchOptions& opt) {
  if (opt.samples < kMinBenchSamples)
    throw std::invalid_argument("bench needs at least " + std::to_string(kMinBenchSamples) + " samples");
#if defined(__linux__)
  if (opt.pin_thread) {
    cpu_set_t set;
    CPU_ZERO(&set);
    const int cpu = sched_getcpu();
    CPU_SET(cpu >= 0 ? cpu : 0, &set);
    sched_setaffinity(0, sizeof(set), &set);
  }
#endif
  const SrbModel& model = config.model;
  const SimState stance = initial_sim_state(config);
  const RobotState& state = stance.robot;
  const std::array<bool, kNumLegs> contact{true, true, true, true};
  const FootSet feet = foot_set_from_state(state, model, contact);
  const BoundaryState start{state.p_com, Vec3::Zero(), Vec3::Zero()};
  VmcTracker tracker(model, config.prepare_gains);

  const std::vector<BenchSample> inputs = bench_inputs(config.planner, opt.samples, opt.seed);
  const std::vector<BenchSample> warm = bench_inputs(config.planner, opt.warmup, opt.seed ^ 0x9e3779b97f4a7c15ull);

  double sink = 0.0;
  auto cycle = [&](const BenchSample& s, double* plan_ns, double* track_ns) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    BoundaryState end = s.end;
    end.p += start.p;
    const PiecewiseQuintic traj = plan_jump_trajectory(start, end, config.planner);
    const auto t1 = clock::now();
    const double t = traj.start_time() + s.u * traj.duration();
    TrackingReference ref;
    ref.p = evaluate(traj, t, 0);
    ref.v = evaluate(traj, t, 1);
    ref.omega = config.prepare_gains.omega_ref;
    for (int leg = 0; leg < kNumLegs; ++leg) {
      ref.feet_p[leg] = ref.R.transpose() * (stance.foot_world[leg] - ref.p);
      ref.feet_v[leg] = -ref.v;
    }
    const TrackingOutput out = tracker.track(state, feet, ref);
    const auto t2 = clock::now();
    sink += out.tau.sum();
    if (plan_ns) *plan_ns = std::chrono::duration<double, std::nano>(t1 - t0).count();
    if (track_ns) *track_ns = std::chrono::duration<double, std::nano>(t2 - t1).count();
  };

  for (const BenchSample& s : warm) cycle(s, nullptr, nullptr);

  std::vector<double> plan(inputs.size()), track(inputs.size()), total(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    cycle(inputs[i], &plan[i], &track[i]);
    total[i] = plan[i] + track[i];
  }
  if (!std::isfinite(sink)) throw Error(ErrorCode::TrackingFailed, "non-finite benchmark output");

  BenchReport r;
  r.n_samples = opt.samples;
  r.seed = opt.seed;
  r.input_hash = hash_inputs(inputs);
  r.plan_ns = latency_stats(plan);
  r.track_ns = latency_stats(track);
  r.total_ns = latency_stats(total);
  r.machine = machine_descriptor();
  return r;
}

inline nlohmann::json stats_json(const LatencyStats& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"p95", s.p95}, {"max", s.max}, {"min", s.min}};
}

inline nlohmann::json bench_json(const BenchReport& r) {
  char hash[19];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(r.input_hash));
  return {{"n_samples", r.n_samples},
          {"seed", r.seed},
          {"input_hash", hash},
          {"unit", "ns"},
          {"plan", stats_json(r.plan_ns)},
          {"track", stats_json(r.track_ns)},
          {"total", stats_json(r.total_ns)},
          {"machine", r.machine}};
}

}  // namespace omnijump
