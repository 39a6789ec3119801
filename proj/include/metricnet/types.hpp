#ifndef METRICNET_TYPES_HPP
#define METRICNET_TYPES_HPP

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace metricnet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Operand dimensions do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A point lies outside the domain of a metric or function (nonpositive
/// coordinate for cone metrics, zero distance in a ratio, singular Jacobian).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid construction parameters (negative scale, hi < lo, ...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline void require_same_dim(const Vector& x, const Vector& y, const char* what) {
    if (x.size() != y.size()) {
        throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(x.size()) +
                             " vs " + std::to_string(y.size()) + ")");
    }
}

} // namespace metricnet

#endif
