#pragma once

#include <stdexcept>
#include <string>

namespace mipose {

// Bad or inconsistent input data (unreadable file, empty model, absent class).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A violated internal invariant; indicates a bug rather than bad input.
class InvariantError : public std::logic_error {
public:
    explicit InvariantError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace mipose
