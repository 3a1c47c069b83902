#pragma once

#include <stdexcept>
#include <string>

namespace vsense {

// Error taxonomy. Each maps to a CLI exit code in tools/ (see cli.hpp):
// config/parameter -> 2, dependency -> 3, invariant -> 4, everything else -> 1.

struct dimension_error : std::runtime_error {
    explicit dimension_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct parameter_error : std::runtime_error {
    explicit parameter_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct format_error : std::runtime_error {
    explicit format_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct incompatibility_error : std::runtime_error {
    explicit incompatibility_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct labeling_error : std::runtime_error {
    explicit labeling_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct sequencing_error : std::runtime_error {
    explicit sequencing_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct invariant_violation : std::runtime_error {
    explicit invariant_violation(const std::string& msg) : std::runtime_error(msg) {}
};

struct dependency_error : std::runtime_error {
    explicit dependency_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct aggregation_error : std::runtime_error {
    explicit aggregation_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace vsense
