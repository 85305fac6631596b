#pragma once
// Exception hierarchy shared by all modules.

#include <stdexcept>
#include <string>

namespace gstvar {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Linear algebra / density evaluation
struct SingularMeanSystem : Error { using Error::Error; };
struct NonstationaryRegime : Error { using Error::Error; };
struct NotPositiveDefinite : Error { using Error::Error; };
struct AllDensitiesUnderflow : Error { using Error::Error; };
struct EigenFailure : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };

// Estimation
struct TiedAlphas : Error { using Error::Error; };
struct NoFeasibleIndividual : Error { using Error::Error; };
struct NumericalFailure : Error { using Error::Error; };
struct AllRoundsFailed : Error { using Error::Error; };
struct NoAdequateSolution : Error { using Error::Error; };
struct SingularHessian : Error { using Error::Error; };

// Structural analysis
struct EmptyHistorySet : Error { using Error::Error; };
struct ScaleDegenerate : Error { using Error::Error; };
struct ZeroDenominator : Error { using Error::Error; };

// Diagnostics / input validation
struct ZeroVariance : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };

}  // namespace gstvar
