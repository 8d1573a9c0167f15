#ifndef OVBSENS_ERRORS_HPP
#define OVBSENS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ovbsens {

// Base class for all library errors. Data-shaped problems (bad files, bad
// columns) and numeric problems (domain violations, singular blocks) derive
// from the two subclasses below so the CLI can map them to exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// --- covkernel ---
struct NotSymmetric final : DataError {
  using DataError::DataError;
};
struct NotPositiveDefinite final : NumericError {
  using NumericError::NumericError;
};
struct SingularConditionerBlock final : NumericError {
  using NumericError::NumericError;
};
struct DegenerateTargetVariance final : NumericError {
  using NumericError::NumericError;
};

// --- ingest ---
struct MissingColumn final : DataError {
  using DataError::DataError;
};
struct ConstantColumn final : DataError {
  using DataError::DataError;
};
struct TooFewRows final : DataError {
  using DataError::DataError;
};
struct ParseError final : DataError {
  using DataError::DataError;
};
struct RoleMismatch final : DataError {
  using DataError::DataError;
};

// --- identify / frontier ---
struct KnifeEdgeViolated final : NumericError {
  using NumericError::NumericError;
};
struct DomainError final : NumericError {
  using NumericError::NumericError;
};
struct LinearDependence final : NumericError {
  using NumericError::NumericError;
};
struct SolverFailure final : NumericError {
  using NumericError::NumericError;
};
struct EmptyConstraint final : NumericError {
  using NumericError::NumericError;
};

// --- simsel ---
struct CapExceeded final : NumericError {
  using NumericError::NumericError;
};
struct AssumptionViolated final : NumericError {
  using NumericError::NumericError;
};
struct AllDegenerate final : NumericError {
  using NumericError::NumericError;
};

// --- calibrate ---
struct DegenerateIndex final : NumericError {
  using NumericError::NumericError;
};

}  // namespace ovbsens

#endif  // OVBSENS_ERRORS_HPP
