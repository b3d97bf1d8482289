#pragma once

#include <stdexcept>
#include <string>

namespace mdbsde {

/// Invalid model input or a callback returning a value outside its declared domain.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure inside a solver.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration document.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mdbsde
