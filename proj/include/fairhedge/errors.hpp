#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>

namespace fairhedge {

namespace detail {
inline std::string short_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}
}  // namespace detail

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Errors caused by the inputs: malformed models, invalid generators, bad flags.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Errors raised when the numerics cannot produce a meaningful answer.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ModelError : public InputError {
 public:
  enum class Kind { kStructure, kProbability, kPositivity, kCoverage, kDimension, kSchema, kParse };

  ModelError(Kind kind, std::string node, const std::string& what)
      : InputError(node.empty() ? what : what + " [node " + node + "]"),
        kind_(kind),
        node_(std::move(node)) {}

  Kind kind() const { return kind_; }
  const std::string& node() const { return node_; }

 private:
  Kind kind_;
  std::string node_;
};

/// The candidate generator does not produce a strictly positive value process.
class NonPositiveNumeraire : public InputError {
 public:
  NonPositiveNumeraire(std::string node, double value)
      : InputError("numeraire is not strictly positive at node " + node + " (value " +
                   detail::short_number(value) + ")"),
        node_(std::move(node)),
        value_(value) {}

  const std::string& node() const { return node_; }
  double value() const { return value_; }

 private:
  std::string node_;
  double value_;
};

/// The weighted covariance matrix of the asset increments is (numerically) singular.
class SingularCovariance : public NumericalError {
 public:
  SingularCovariance(std::string node, double rcond)
      : SingularCovariance("singular conditional covariance", std::move(node), rcond) {}

  const std::string& node() const { return node_; }
  double rcond() const { return rcond_; }

 protected:
  SingularCovariance(const std::string& what, std::string node, double rcond)
      : NumericalError(what + " at node " + node + " (rcond " + detail::short_number(rcond) +
                       "); the assets are redundant there"),
        node_(std::move(node)),
        rcond_(rcond) {}

 private:
  std::string node_;
  double rcond_;
};

class ZeroConditionalVariance : public SingularCovariance {
 public:
  ZeroConditionalVariance(std::string node, double rcond)
      : SingularCovariance("zero conditional variance", std::move(node), rcond) {}
};

/// The global regression has no unique parameter vector.
class RankDeficientDesign : public NumericalError {
 public:
  RankDeficientDesign(long column, double pivot_ratio)
      : NumericalError("rank-deficient regression design (pivot ratio " +
                       detail::short_number(pivot_ratio) + " at column " + std::to_string(column) + ")"),
        column_(column),
        pivot_ratio_(pivot_ratio) {}

  long column() const { return column_; }
  double pivot_ratio() const { return pivot_ratio_; }

 private:
  long column_;
  double pivot_ratio_;
};

class HorizonNotOne : public InputError {
 public:
  explicit HorizonNotOne(int horizon)
      : InputError("interest-rate comparison needs a one-period model, got horizon " +
                   std::to_string(horizon)) {}
};

/// A perturbation size lies outside the range where the numeraire family stays positive.
class FamilyBoundsError : public InputError {
 public:
  FamilyBoundsError(double eps, const std::string& what)
      : InputError(what + " (eps = " + detail::short_number(eps) + ")"), eps_(eps) {}
  double eps() const { return eps_; }

 private:
  double eps_;
};

/// Wraps a numerical failure of a re-solve inside a perturbation sweep.
class PerturbationFailure : public NumericalError {
 public:
  PerturbationFailure(double eps, const std::string& cause)
      : NumericalError("decomposition failed at eps = " + detail::short_number(eps) + ": " + cause),
        eps_(eps) {}
  double eps() const { return eps_; }

 private:
  double eps_;
};

}  // namespace fairhedge
