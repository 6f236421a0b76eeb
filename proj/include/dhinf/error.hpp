#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace dhinf {

/// Base class of every error raised by the library. `kind()` is stable and is
/// what the C API maps onto its status codes.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    kStructural,
    kParse,
    kValidation,
    kSingular,
    kConvergence,
    kDegenerateRoot,
    kNormalization,
    kUnstable,
    kUnboundedRadius,
    kDerivativeUndefined,
    kArgument,
    kAssumption,
    kNoStabilizer,
  };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class StructuralError : public Error {
 public:
  explicit StructuralError(const std::string& w) : Error(Kind::kStructural, w) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& field, const std::string& w)
      : Error(Kind::kParse, "field '" + field + "': " + w), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& w) : Error(Kind::kValidation, w) {}
};

/// The characteristic matrix is singular at `point()`, i.e. it is a root.
class SingularityError : public Error {
 public:
  explicit SingularityError(std::complex<double> s)
      : Error(Kind::kSingular, "characteristic matrix singular at s = " + format(s)), s_(s) {}
  std::complex<double> point() const noexcept { return s_; }

 private:
  static std::string format(std::complex<double> s) {
    return std::to_string(s.real()) + (s.imag() < 0 ? " - " : " + ") +
           std::to_string(std::abs(s.imag())) + "j";
  }
  std::complex<double> s_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& w, std::complex<double> best)
      : Error(Kind::kConvergence, w), best_(best) {}
  std::complex<double> best_iterate() const noexcept { return best_; }

 private:
  std::complex<double> best_;
};

class DegenerateRootError : public Error {
 public:
  explicit DegenerateRootError(const std::string& w) : Error(Kind::kDegenerateRoot, w) {}
};

class NormalizationError : public Error {
 public:
  explicit NormalizationError(const std::string& w) : Error(Kind::kNormalization, w) {}
};

class UnstableError : public Error {
 public:
  UnstableError(const std::string& w, double abscissa)
      : Error(Kind::kUnstable, w), abscissa_(abscissa) {}
  double abscissa() const noexcept { return abscissa_; }

 private:
  double abscissa_;
};

class UnboundedRadiusError : public Error {
 public:
  explicit UnboundedRadiusError(const std::string& w) : Error(Kind::kUnboundedRadius, w) {}
};

class DerivativeUndefinedError : public Error {
 public:
  explicit DerivativeUndefinedError(const std::string& w)
      : Error(Kind::kDerivativeUndefined, w) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& w) : Error(Kind::kArgument, w) {}
};

class AssumptionError : public Error {
 public:
  explicit AssumptionError(const std::string& w) : Error(Kind::kAssumption, w) {}
};

class NoStabilizerError : public Error {
 public:
  NoStabilizerError(const std::string& w, double best)
      : Error(Kind::kNoStabilizer, w), best_(best) {}
  double best_abscissa() const noexcept { return best_; }

 private:
  double best_;
};

}  // namespace dhinf
