#pragma once

#include <stdexcept>
#include <string>

namespace dlmp {

enum class ErrorKind {
    io,
    schema,
    cycle,
    multiple_roots,
    missing_root,
    dangling_ancestor,
    unreachable_bus,
    unknown_bus,
    index_out_of_range,
    negative_quadratic,
    invalid_base_load,
    invalid_argument,
    infeasible,
    solver_failure,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what, int bus = -1)
        : std::runtime_error(what), kind_(kind), bus_(bus) {}

    ErrorKind kind() const { return kind_; }
    // Offending bus id for structural errors, -1 otherwise.
    int bus() const { return bus_; }

private:
    ErrorKind kind_;
    int bus_;
};

}  // namespace dlmp
