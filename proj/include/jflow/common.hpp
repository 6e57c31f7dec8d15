#pragma once

#include <Eigen/Dense>

#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>

namespace jflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// All recoverable failures in the library are reported with this type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A check was asked to run where its hypotheses do not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

inline void require_same_size(const Vector& u, const Vector& v, const char* where) {
  if (u.size() != v.size())
    throw Error(std::string(where) + ": dimension mismatch (" + std::to_string(u.size()) +
                " vs " + std::to_string(v.size()) + ")");
}

/// Solver tolerances. JFLOW_TOL overrides the resolvent tolerance.
struct Tolerances {
  double resolvent = 1e-8;
  double lifted = 1e-6;
  double indicator = 1e-9;
};

inline Tolerances default_tolerances() {
  Tolerances t;
  if (const char* env = std::getenv("JFLOW_TOL")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end != env && v > 0.0) t.resolvent = v;
  }
  return t;
}

}  // namespace jflow
