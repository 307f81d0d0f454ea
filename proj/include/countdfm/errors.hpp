#pragma once

#include <stdexcept>
#include <string>

namespace countdfm {

// Exception taxonomy shared across the library. The CLI maps these onto
// exit codes: parameter/data/format problems -> 2, numeric failures -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParameterError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct DegenerateMarginalError : Error { using Error::Error; };
struct DegenerateSeriesError : Error { using Error::Error; };
struct StabilityError : Error { using Error::Error; };
struct RankError : Error { using Error::Error; };
struct IdentifiabilityError : Error { using Error::Error; };
struct SingularSystemError : Error { using Error::Error; };
struct LinkMonotonicityError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct WeightDegeneracyError : Error { using Error::Error; };
struct DegenerateBinError : Error { using Error::Error; };

}  // namespace countdfm
