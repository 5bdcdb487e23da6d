#pragma once

#include <stdexcept>
#include <string>

namespace planedepth {

enum class ErrorKind {
  InvalidInput,
  DegenerateRay,
  RankDeficient,
  NoConsensus,
  NoData,
  InfeasibleNode,
  InvalidRoadPlane,
  ModeMismatch,
  NoOverlap,
  Parse,
  Calib,
  Range,
  InvalidScene,
  Io,
};

inline const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::DegenerateRay: return "degenerate ray";
    case ErrorKind::RankDeficient: return "rank deficient";
    case ErrorKind::NoConsensus: return "no consensus";
    case ErrorKind::NoData: return "no data";
    case ErrorKind::InfeasibleNode: return "infeasible node";
    case ErrorKind::InvalidRoadPlane: return "invalid road plane";
    case ErrorKind::ModeMismatch: return "mode mismatch";
    case ErrorKind::NoOverlap: return "no overlap";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Calib: return "calibration error";
    case ErrorKind::Range: return "range error";
    case ErrorKind::InvalidScene: return "invalid scene";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

}  // namespace planedepth
