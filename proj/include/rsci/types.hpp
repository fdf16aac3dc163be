#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace rsci {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Numerical solve failed (instability, bound escape, non-finite values).
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Feasible set is empty after intersecting mode requirements.
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A stated operation precondition does not hold.
struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Inconsistent configuration (utility/constraint/field mode mismatch).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Utility { Power, Log, ExpDet, ExpRandom };

std::string utility_name(Utility u);

} // namespace rsci
