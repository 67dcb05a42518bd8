#pragma once

#include <array>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Dense>

namespace omnijump {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;

inline constexpr int kNumLegs = 4;

enum class ErrorCode {
  OutOfReach,
  IllConditioned,
  CommandOutOfRange,
  NoContact,
  Infeasible,
  NoLanding,
  PlanningFailed,
  TrackingFailed,
  SimulationDiverged,
  ConfigError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfReach: return "OutOfReach";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::CommandOutOfRange: return "CommandOutOfRange";
    case ErrorCode::NoContact: return "NoContact";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NoLanding: return "NoLanding";
    case ErrorCode::PlanningFailed: return "PlanningFailed";
    case ErrorCode::TrackingFailed: return "TrackingFailed";
    case ErrorCode::SimulationDiverged: return "SimulationDiverged";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Library error. `cause` carries the underlying code when an error is
/// wrapped by a higher layer (e.g. PlanningFailed caused by CommandOutOfRange).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), cause_(code) {}
  Error(ErrorCode code, ErrorCode cause, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + "(" + to_string(cause) + "): " + what),
        code_(code),
        cause_(cause) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  ErrorCode code_;
  ErrorCode cause_;
};

/// Warning sink; defaults to stderr. Replace to silence or redirect.
inline std::function<void(const std::string&)>& warning_handler() {
  static std::function<void(const std::string&)> handler = [](const std::string& msg) {
    std::cerr << "[omnijump] warning: " << msg << '\n';
  };
  return handler;
}

inline void log_warning(const std::string& msg) {
  if (warning_handler()) warning_handler()(msg);
}

}  // namespace omnijump
