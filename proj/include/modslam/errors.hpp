#pragma once

#include <stdexcept>
#include <string>

namespace modslam {

/// Bad argument to a pure function (non-finite input, non-rotation matrix, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Filesystem or decode failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration rejected during parsing, override application or validation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input too degenerate for a closed-form estimator (coincident points, ...).
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tracker failed to converge or the problem was ill-conditioned.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure inside a pipeline stage, tagged with the frame that caused it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, long frame, const std::string& what)
      : std::runtime_error(stage + " failed at frame " + std::to_string(frame) +
                           ": " + what),
        stage_(std::move(stage)),
        frame_(frame) {}

  const std::string& stage() const { return stage_; }
  long frame() const { return frame_; }

 private:
  std::string stage_;
  long frame_;
};

}  // namespace modslam
