#pragma once

#include <stdexcept>
#include <string>

namespace elsem {

// A matrix required to be positive definite failed its factorization.
class IllConditioned : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The origin is not inside the convex hull of the constraint rows, so no
// probability weights satisfying the moment constraint exist.
class NotInHull : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MaxIterations : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Constraint second-moment matrix is numerically singular.
class DegenerateConstraints : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Jacobian of the structured covariance is rank deficient at the point asked.
class NotLocallyIdentified : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The structural coefficient system I - B is not invertible.
class SingularSystem : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A Monte Carlo study lost too many replications to produce summaries.
class StudyDegenerate : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace elsem
