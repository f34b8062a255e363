#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cugr {

// Error thrown on contract violations (bad configs, shape mismatches,
// missing prerequisites). CLI turns these into nonzero exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

} // namespace cugr
