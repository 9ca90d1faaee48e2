#pragma once

#include <stdexcept>
#include <string>

namespace morphctl {

// Base class for everything this library throws on purpose. The CLI maps
// subtypes onto exit codes (solver failure = 2, divergence = 3, config = 4).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverError : Error {
    using Error::Error;
};

struct NotHurwitz : SolverError {
    using SolverError::SolverError;
};
struct SingularSystem : SolverError {
    using SolverError::SolverError;
};
struct NotStabilizable : SolverError {
    using SolverError::SolverError;
};
struct NoConvergence : SolverError {
    using SolverError::SolverError;
};
struct LostStability : SolverError {
    using SolverError::SolverError;
};
struct MaxIterations : SolverError {
    using SolverError::SolverError;
};

struct OutOfEnvelope : Error {
    using Error::Error;
};
struct DegenerateState : Error {
    using Error::Error;
};
struct OutOfRange : Error {
    using Error::Error;
};

struct SingularGram : Error {
    using Error::Error;
};
struct InsufficientData : Error {
    using Error::Error;
};
struct NotSimplex : Error {
    using Error::Error;
};

struct DivergedTrajectory : Error {
    using Error::Error;
};
struct MismatchedGrids : Error {
    using Error::Error;
};

struct BadConfig : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

}  // namespace morphctl
