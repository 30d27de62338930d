#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace pso {

using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;

// Raised when an argument violates an operation's precondition.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised on malformed input files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a computation produces NaN or infinity.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Direction { Sublevel, Superlevel };

inline const char* to_string(Direction d) {
  return d == Direction::Sublevel ? "sublevel" : "superlevel";
}

Direction parse_direction(const std::string& s);

}  // namespace pso
