#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace finsler {

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A value left the region where an operation is defined (sqrt of a negative,
/// a point outside a field's domain, 1 - kappa b^2 <= 0, ...).
class DomainError : public Error
{
public:
  DomainError(const std::string& operation, double value, const std::string& detail = {})
    : Error(format(operation, value, detail)), operation_(operation), value_(value)
  {}

  const std::string& operation() const noexcept { return operation_; }
  double value() const noexcept { return value_; }

private:
  static std::string format(const std::string& op, double value, const std::string& detail)
  {
    std::ostringstream os;
    os.precision(17);
    os << "domain violation in " << op << " (value " << value << ")";
    if (!detail.empty()) os << ": " << detail;
    return os.str();
  }

  std::string operation_;
  double value_;
};

/// y lies on (or within the guard band of) the singular cone of the metric,
/// where the spray denominators vanish.
class SingularDirection : public Error
{
public:
  using Error::Error;
};

class SingularMatrix : public Error
{
public:
  using Error::Error;
};

/// b^2 below the admissible floor; 1/b^2 appears in most characterization formulas.
class SmallBetaNorm : public Error
{
public:
  explicit SmallBetaNorm(double b2)
    : Error("b^2 = " + std::to_string(b2) + " is below the admissible floor"), b2_(b2)
  {}
  double b2() const noexcept { return b2_; }

private:
  double b2_;
};

class PreconditionError : public Error
{
public:
  using Error::Error;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

}  // namespace finsler
