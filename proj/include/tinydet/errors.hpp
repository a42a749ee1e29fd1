#pragma once

#include <stdexcept>
#include <string>

namespace tinydet {

// Input files that cannot be parsed or reference unknown ids.
class parse_error : public std::runtime_error {
public:
    explicit parse_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration: bad flag combinations, indivisible reduction
// ratios, infeasible scene placement.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A gradient-descent run whose loss left the finite range.
class divergence_error : public std::runtime_error {
public:
    explicit divergence_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace tinydet
