#pragma once

#include <stdexcept>
#include <string>

namespace mpp {

// Base of every error the library raises. `kind()` is a stable identifier the
// CLI uses for reports and exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define MPP_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  };

MPP_DEFINE_ERROR(InvalidArgument)
MPP_DEFINE_ERROR(KernelHit)
MPP_DEFINE_ERROR(DimTooSmall)
MPP_DEFINE_ERROR(BudgetExceeded)
MPP_DEFINE_ERROR(CapExceeded)
MPP_DEFINE_ERROR(DegenerateSample)
MPP_DEFINE_ERROR(NoConvergence)
MPP_DEFINE_ERROR(NonPositiveEigenfunction)
MPP_DEFINE_ERROR(DegenerateNode)
MPP_DEFINE_ERROR(ModeError)
MPP_DEFINE_ERROR(GridTooCoarse)
MPP_DEFINE_ERROR(UnsupportedDimension)
MPP_DEFINE_ERROR(UsageError)

#undef MPP_DEFINE_ERROR

// Parse failures carry the 1-based line and the offending field name.
class ParseError : public Error {
 public:
  ParseError(int line, std::string field, const std::string& what)
      : Error("ParseError", "line " + std::to_string(line) + ", field '" +
                                field + "': " + what),
        line_(line),
        field_(std::move(field)) {}
  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int line_;
  std::string field_;
};

}  // namespace mpp
