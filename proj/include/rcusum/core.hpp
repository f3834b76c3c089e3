#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace rcusum {

using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;
using ArrayXd = Eigen::ArrayXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Bad user input: malformed config, out-of-range parameter, shape mismatch.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure could not produce a trustworthy answer.
class NumericError : public std::runtime_error {
 public:
  enum class Kind { no_positive_root, mgf_diverges, quadrature, bracket, other };

  NumericError(Kind kind, const std::string& what, double detail = 0.0)
      : std::runtime_error(what), kind_(kind), detail_(detail) {}

  Kind kind() const noexcept { return kind_; }
  /// Residual estimate or last finite argument, depending on kind().
  double detail() const noexcept { return detail_; }

 private:
  Kind kind_;
  double detail_;
};

/// Requested a density of a distribution that has none (point mass).
class NoDensityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller broke a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace rcusum
