#pragma once

#include <stdexcept>
#include <string>

namespace sdcf {

/// A transform has (numerically) collapsed rank: some singular value fell
/// below the strict tolerance. Training surfaces this instead of returning
/// an infinite objective.
class singular_transform_error : public std::runtime_error {
public:
    explicit singular_transform_error(const std::string& what)
        : std::runtime_error(what) {}
};

/// The training loss became non-finite or blew up past the divergence guard.
class divergence_error : public std::runtime_error {
public:
    explicit divergence_error(const std::string& what)
        : std::runtime_error(what) {}
};

/// Malformed input file (bad header, unparseable row structure).
class format_error : public std::runtime_error {
public:
    explicit format_error(const std::string& what)
        : std::runtime_error(what) {}
};

/// Invalid run configuration (unknown preset, infeasible window size,
/// insufficient data span, ...).
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what)
        : std::runtime_error(what) {}
};

} // namespace sdcf
