#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace warpsync {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Whether a record's positions are depths (cm) or ages (yr).
enum class ScaleKind { Depth, Age };

/// AgeDepth builds a new chronology; AgeToAge corrects an existing age scale.
enum class Mode { AgeDepth, AgeToAge };

enum class Strategy { Single, Double, UQ };

/// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  [[nodiscard]] virtual int exit_code() const noexcept { return 4; }
};

/// Invalid or inconsistent configuration, detected before any compute.
class ConfigError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 2; }
};

/// Malformed or unusable input data.
class DataError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 3; }
};

/// Failure during computation (sampler initialisation, unwritable output, ...).
class RuntimeFailure : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 4; }
};

std::string_view to_string(Mode mode);
std::string_view to_string(Strategy strategy);
std::string_view to_string(ScaleKind kind);
Mode parse_mode(std::string_view text);
Strategy parse_strategy(std::string_view text);

}  // namespace warpsync
