#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ousac {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Class label for conditional prediction; std::nullopt is the null condition.
using Condition = std::optional<int>;

enum class Branch { conditional = 0, unconditional = 1 };

inline const char* to_string(Branch b) {
    return b == Branch::conditional ? "conditional" : "unconditional";
}

/// Invalid experiment or model configuration. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// NaN/Inf encountered while integrating a trajectory. Maps to CLI exit code 3.
class NumericalDivergence : public std::runtime_error {
public:
    NumericalDivergence(const std::string& what, int timestep)
        : std::runtime_error(what + " (timestep " + std::to_string(timestep) + ")"), timestep_(timestep) {}
    int timestep() const noexcept { return timestep_; }

private:
    int timestep_;
};

}  // namespace ousac
